//! Monolithic (non-condensed) HDG assembly used as an oracle by the
//! integration tests. The full saddle system over all volume unknowns plus
//! the skeleton traces is built entrywise from quadrature loops, with no use
//! of the static-condensation code path, and solved densely.
//!
//! Shared by several test binaries, not all of which use every item.
#![allow(dead_code)]

use hdgml::basis::{gauss_legendre, NodalBasis};
use hdgml::hdg::{is_inflow, stabilization_tau, Coefficients, Mode, FACE_NORMALS};
use hdgml::linalg::DofLayout;
use hdgml::mesh::{EdgeKind, StructuredMesh};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub struct Monolithic {
    /// Full system over `[volume dofs of all elements | unknown trace dofs]`.
    pub a: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub n_vol: usize,
    /// Volume dofs per element.
    pub nz: usize,
    pub layout: Arc<DofLayout>,
    pub dirichlet: Vec<Option<DVector<f64>>>,
}

impl Monolithic {
    pub fn solve(&self) -> DVector<f64> {
        self.a.clone().lu().solve(&self.rhs).expect("monolithic solve")
    }

    /// Schur complement onto the trace block and the condensed right-hand side.
    pub fn schur(&self) -> (DMatrix<f64>, DVector<f64>) {
        let nv = self.n_vol;
        let nl = self.a.nrows() - nv;
        let avv = self.a.view((0, 0), (nv, nv)).into_owned();
        let avl = self.a.view((0, nv), (nv, nl)).into_owned();
        let alv = self.a.view((nv, 0), (nl, nv)).into_owned();
        let all = self.a.view((nv, nv), (nl, nl)).into_owned();
        let lu = avv.lu();
        let x = lu.solve(&avl).expect("volume block solve");
        let y = lu.solve(&self.rhs.rows(0, nv).into_owned()).unwrap();
        (all - &alv * x, self.rhs.rows(nv, nl).into_owned() - alv * y)
    }
}

fn project_edge(
    mesh: &StructuredMesh,
    basis: &NodalBasis,
    qp: &[f64],
    qw: &[f64],
    g: &dyn Fn(f64, f64) -> f64,
    edge: usize,
) -> DVector<f64> {
    let ((xa, ya), (xb, yb)) = mesh.edge_endpoints(edge);
    let n1 = basis.len();
    let mut m = DMatrix::zeros(n1, n1);
    let mut r = DVector::zeros(n1);
    for (q, (&t, &w)) in qp.iter().zip(qw).enumerate() {
        let _ = q;
        let s = (t + 1.0) * 0.5;
        let (x, y) = (xa + s * (xb - xa), ya + s * (yb - ya));
        let gv = g(x, y);
        for a in 0..n1 {
            let pa = basis.eval(a, t);
            r[a] += w * gv * pa;
            for b in 0..n1 {
                m[(a, b)] += w * pa * basis.eval(b, t);
            }
        }
    }
    m.lu().solve(&r).unwrap()
}

pub fn assemble_monolithic(mesh: &StructuredMesh, coeffs: &Coefficients, p: usize) -> Monolithic {
    let mode = coeffs.mode();
    let basis = NodalBasis::gll(p);
    let n1 = p + 1;
    let nu = n1 * n1;
    let nz = match mode {
        Mode::Diffusive => 3 * nu,
        Mode::Transport => nu,
    };
    let nq = p + 2;
    let (qp, qw) = gauss_legendre(nq);
    let h = mesh.h;
    let nelem = mesh.element_count();
    let n_vol = nelem * nz;

    // trace layout: interior edges, plus outflow boundary edges in transport
    let mut sizes = vec![None; mesh.edges.len()];
    let mut dirichlet: Vec<Option<DVector<f64>>> = vec![None; mesh.edges.len()];
    for e in &mesh.edges {
        match e.kind {
            EdgeKind::Interior => sizes[e.id] = Some(n1),
            EdgeKind::Boundary => {
                let known = match mode {
                    Mode::Diffusive => true,
                    Mode::Transport => is_inflow(mesh, &coeffs.beta, e.id),
                };
                if known {
                    dirichlet[e.id] = Some(project_edge(
                        mesh,
                        &basis,
                        &qp,
                        &qw,
                        coeffs.dirichlet.as_ref(),
                        e.id,
                    ));
                } else {
                    sizes[e.id] = Some(n1);
                }
            }
        }
    }
    let layout = Arc::new(DofLayout::new(&sizes));
    let dim = n_vol + layout.total_dofs();
    let mut a = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);

    // indices of the volume unknowns of an element: sigma_x, sigma_y, u
    let sx = |e: usize, i: usize| e * nz + i;
    let sy = |e: usize, i: usize| e * nz + nu + i;
    let uu = |e: usize, i: usize| match mode {
        Mode::Diffusive => e * nz + 2 * nu + i,
        Mode::Transport => e * nz + i,
    };
    // global column of an edge dof, or its known value
    enum Col {
        Unknown(usize),
        Known(f64),
    }
    let lam_col = |edge: usize, b: usize| -> Col {
        if let Some(u) = layout.unknown_of_entity[edge] {
            Col::Unknown(n_vol + layout.offset(u) + b)
        } else {
            Col::Known(dirichlet[edge].as_ref().unwrap()[b])
        }
    };

    let phi2 = |a_: usize, xi: f64, eta: f64| basis.eval(a_ % n1, xi) * basis.eval(a_ / n1, eta);
    let dphix = |a_: usize, xi: f64, eta: f64| {
        basis.eval_deriv(a_ % n1, xi) * basis.eval(a_ / n1, eta) * (2.0 / h)
    };
    let dphiy = |a_: usize, xi: f64, eta: f64| {
        basis.eval(a_ % n1, xi) * basis.eval_deriv(a_ / n1, eta) * (2.0 / h)
    };

    // outflow closure (transport): subtract <beta.n lambda, mu> so the edge
    // equation reads <(beta.n + tau)(u - lambda), mu> = 0, i.e. lambda = u
    for e in &mesh.edges {
        if mode != Mode::Transport || e.kind != EdgeKind::Boundary {
            continue;
        }
        if layout.unknown_of_entity[e.id].is_none() {
            continue;
        }
        let ((xa, ya), (xb, yb)) = mesh.edge_endpoints(e.id);
        let (nx, ny) = mesh.boundary_normal(e.id);
        for (q, (&t, &wq)) in qp.iter().zip(&qw).enumerate() {
            let _ = q;
            let s = (t + 1.0) * 0.5;
            let (x, y) = (xa + s * (xb - xa), ya + s * (yb - ya));
            let (bx, by) = (coeffs.beta)(x, y);
            let w = wq * (h / 2.0) * (bx * nx + by * ny);
            for la in 0..n1 {
                let Col::Unknown(r) = lam_col(e.id, la) else { unreachable!() };
                for lb in 0..n1 {
                    let Col::Unknown(c) = lam_col(e.id, lb) else { unreachable!() };
                    a[(r, c)] -= w * basis.eval(la, t) * basis.eval(lb, t);
                }
            }
        }
    }

    for elem in 0..nelem {
        let (x0, y0) = mesh.element_origin(elem);
        let kappa = coeffs.diffusion.kappa(elem);
        // volume quadrature
        for qj in 0..nq {
            for qi in 0..nq {
                let (xi, eta) = (qp[qi], qp[qj]);
                let w = qw[qi] * qw[qj] * (h / 2.0) * (h / 2.0);
                let x = x0 + (xi + 1.0) * 0.5 * h;
                let y = y0 + (eta + 1.0) * 0.5 * h;
                let (bx, by) = (coeffs.beta)(x, y);
                let fv = (coeffs.forcing)(x, y);
                for ta in 0..nu {
                    let (va, dxa, dya) = (phi2(ta, xi, eta), dphix(ta, xi, eta), dphiy(ta, xi, eta));
                    rhs[uu(elem, ta)] += w * fv * va;
                    for tb in 0..nu {
                        let vb = phi2(tb, xi, eta);
                        if mode == Mode::Diffusive {
                            a[(sx(elem, ta), sx(elem, tb))] += w * va * vb / kappa;
                            a[(sy(elem, ta), sy(elem, tb))] += w * va * vb / kappa;
                            a[(sx(elem, ta), uu(elem, tb))] -= w * dxa * vb;
                            a[(sy(elem, ta), uu(elem, tb))] -= w * dya * vb;
                            a[(uu(elem, ta), sx(elem, tb))] -= w * dxa * vb;
                            a[(uu(elem, ta), sy(elem, tb))] -= w * dya * vb;
                        }
                        a[(uu(elem, ta), uu(elem, tb))] -= w * (bx * dxa + by * dya) * vb;
                    }
                }
            }
        }
        // faces S, E, N, W
        let faces = mesh.element_faces(elem);
        for (f, &edge) in faces.iter().enumerate() {
            let (nx, ny) = FACE_NORMALS[f];
            for q in 0..nq {
                let t = qp[q];
                let w = qw[q] * h / 2.0;
                let s = (t + 1.0) * 0.5 * h;
                let (x, y, xi, eta) = match f {
                    0 => (x0 + s, y0, t, -1.0),
                    1 => (x0 + h, y0 + s, 1.0, t),
                    2 => (x0 + s, y0 + h, t, 1.0),
                    3 => (x0, y0 + s, -1.0, t),
                    _ => unreachable!(),
                };
                let (bx, by) = (coeffs.beta)(x, y);
                let bn = bx * nx + by * ny;
                let tau = stabilization_tau(bn);
                for ta in 0..nu {
                    let va = phi2(ta, xi, eta);
                    if va == 0.0 {
                        continue;
                    }
                    for tb in 0..nu {
                        let vb = phi2(tb, xi, eta);
                        if mode == Mode::Diffusive {
                            // <sigma.n, w> in the u rows
                            a[(uu(elem, ta), sx(elem, tb))] += w * nx * va * vb;
                            a[(uu(elem, ta), sy(elem, tb))] += w * ny * va * vb;
                        }
                        // <(beta.n + tau) u, w>
                        a[(uu(elem, ta), uu(elem, tb))] += w * (bn + tau) * va * vb;
                    }
                    for lb in 0..n1 {
                        let eb = basis.eval(lb, t);
                        match lam_col(edge, lb) {
                            Col::Unknown(c) => {
                                if mode == Mode::Diffusive {
                                    a[(sx(elem, ta), c)] += w * nx * va * eb;
                                    a[(sy(elem, ta), c)] += w * ny * va * eb;
                                }
                                a[(uu(elem, ta), c)] -= w * tau * va * eb;
                            }
                            Col::Known(g) => {
                                if mode == Mode::Diffusive {
                                    rhs[sx(elem, ta)] -= w * nx * va * eb * g;
                                    rhs[sy(elem, ta)] -= w * ny * va * eb * g;
                                }
                                rhs[uu(elem, ta)] += w * tau * va * eb * g;
                            }
                        }
                    }
                }
                // conservation rows of this edge's unknown dofs
                for la in 0..n1 {
                    let Col::Unknown(r) = lam_col(edge, la) else { continue };
                    let ea = basis.eval(la, t);
                    for tb in 0..nu {
                        let vb = phi2(tb, xi, eta);
                        if vb == 0.0 {
                            continue;
                        }
                        if mode == Mode::Diffusive {
                            a[(r, sx(elem, tb))] += w * nx * ea * vb;
                            a[(r, sy(elem, tb))] += w * ny * ea * vb;
                        }
                        a[(r, uu(elem, tb))] += w * (bn + tau) * ea * vb;
                    }
                    for lb in 0..n1 {
                        let eb = basis.eval(lb, t);
                        match lam_col(edge, lb) {
                            Col::Unknown(c) => a[(r, c)] -= w * tau * ea * eb,
                            Col::Known(g) => rhs[r] += w * tau * ea * eb * g,
                        }
                    }
                }
            }
        }
    }

    Monolithic { a, rhs, n_vol, nz, layout, dirichlet }
}
