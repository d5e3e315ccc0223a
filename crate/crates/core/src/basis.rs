//! 1D nodal bases and quadrature on the reference interval `[-1, 1]`.
//!
//! Volume and trace spaces use tensor products of the Gauss-Lobatto-Legendre
//! (GLL) nodal basis of degree `p`; integrals are evaluated with Gauss-Legendre
//! quadrature. Both node sets are computed by Newton iteration on the Legendre
//! recurrence, which is accurate to machine precision for the orders used here
//! (p <= 10 plus a small quadrature excess).

use nalgebra::DMatrix;

/// Legendre polynomial value and derivative at `x` via the three-term recurrence.
fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    // d/dx P_n = n (x P_n - P_{n-1}) / (x^2 - 1), safe away from +-1
    let dp = (n as f64) * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre points and weights, exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        pts[i] = x;
        wts[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (pts, wts)
}

/// Gauss-Lobatto-Legendre points (endpoints included), `n >= 2` points.
pub fn gauss_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1; // interior points are roots of P'_m
    let mut pts = vec![0.0; n];
    pts[0] = -1.0;
    pts[n - 1] = 1.0;
    for i in 1..m {
        // initial guess: Chebyshev-Lobatto
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            // Newton on P'_m using P''_m from the Legendre ODE:
            // (1-x^2) P''_m = 2x P'_m - m(m+1) P_m
            let (p, dp) = legendre_and_deriv(m, x);
            let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        pts[i] = x;
    }
    pts
}

/// Lagrange nodal basis on a fixed node set.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    pub nodes: Vec<f64>,
    /// Barycentric weights for stable evaluation.
    bary: Vec<f64>,
}

impl NodalBasis {
    pub fn gll(p: usize) -> Self {
        Self::on_nodes(gauss_lobatto(p + 1))
    }

    pub fn on_nodes(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut bary = vec![1.0; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    bary[i] /= nodes[i] - nodes[j];
                }
            }
        }
        Self { nodes, bary }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Value of the `i`-th Lagrange basis function at `x`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let n = self.nodes.len();
        for j in 0..n {
            if (x - self.nodes[j]).abs() < 1e-14 {
                return if i == j { 1.0 } else { 0.0 };
            }
        }
        let mut num = self.bary[i] / (x - self.nodes[i]);
        let mut den = 0.0;
        for j in 0..n {
            den += self.bary[j] / (x - self.nodes[j]);
        }
        num /= den;
        num
    }

    /// Derivative of the `i`-th basis function at `x`.
    pub fn eval_deriv(&self, i: usize, x: f64) -> f64 {
        // Differentiate the product form; O(n^2) but only used at setup.
        let n = self.nodes.len();
        let mut sum = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (self.nodes[i] - self.nodes[k]);
            for j in 0..n {
                if j != i && j != k {
                    term *= (x - self.nodes[j]) / (self.nodes[i] - self.nodes[j]);
                }
            }
            sum += term;
        }
        sum
    }

    /// Matrix of basis values at the given points: `V[q][i] = phi_i(x_q)`.
    pub fn vandermonde(&self, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.len(), |q, i| self.eval(i, points[q]))
    }

    pub fn vandermonde_deriv(&self, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.len(), |q, i| {
            self.eval_deriv(i, points[q])
        })
    }

    /// Reference-interval mass matrix `M_ij = int phi_i phi_j dx` on `[-1,1]`.
    pub fn mass(&self) -> DMatrix<f64> {
        let nq = self.len() + 2;
        let (pts, wts) = gauss_legendre(nq);
        let v = self.vandermonde(&pts);
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for q in 0..pts.len() {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += wts[q] * v[(q, i)] * v[(q, j)];
                }
            }
        }
        m
    }
}
