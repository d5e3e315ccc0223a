//! Upwind HDG local solvers, static condensation to the trace system, and
//! element-local recovery.
//!
//! Volume unknowns are `sigma = -K grad u` (diffusive mode only) and `u`,
//! discretized with the tensor-product GLL nodal basis of degree `p`. The
//! numerical flux is
//!
//! `(sigma_hat + beta_hat u) . n = sigma.n + (beta.n) u + tau (u - lambda)`
//!
//! with `tau = ((|beta.n|^2 + 4)^(1/2) - beta.n) / 2`. In pure-transport mode
//! (`K = 0`) sigma is dropped and the same flux is used without the sigma term.

use crate::basis::{gauss_legendre, NodalBasis};
use crate::error::HdgError;
use crate::linalg::{BlockMatrix, DofLayout};
use crate::mesh::{EdgeKind, StructuredMesh};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Diffusion tensor `K = kappa * I`, possibly varying per element.
#[derive(Clone)]
pub enum Diffusion {
    /// Pure transport, `K = 0`; sigma is absent.
    Zero,
    Constant(f64),
    PerElement(Arc<Vec<f64>>),
}

impl Diffusion {
    pub fn kappa(&self, elem: usize) -> f64 {
        match self {
            Diffusion::Zero => 0.0,
            Diffusion::Constant(k) => *k,
            Diffusion::PerElement(v) => v[elem],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Diffusive,
    Transport,
}

#[derive(Clone)]
pub struct Coefficients {
    pub diffusion: Diffusion,
    pub beta: VectorField,
    pub forcing: ScalarField,
    /// Dirichlet data (diffusive) or inflow data (transport).
    pub dirichlet: ScalarField,
}

impl Coefficients {
    pub fn mode(&self) -> Mode {
        match self.diffusion {
            Diffusion::Zero => Mode::Transport,
            _ => Mode::Diffusive,
        }
    }
}

/// Upwind stabilization `tau(beta.n) = ((|beta.n|^2 + 4)^(1/2) - beta.n) / 2`.
pub fn stabilization_tau(beta_dot_n: f64) -> f64 {
    0.5 * ((beta_dot_n * beta_dot_n + 4.0).sqrt() - beta_dot_n)
}

/// Reference-element data shared by all elements of one assembly.
pub struct RefElement {
    pub p: usize,
    pub basis: NodalBasis,
    /// 1D Gauss points/weights, `p + 2` of them.
    pub qp: Vec<f64>,
    pub qw: Vec<f64>,
    /// Volume basis values/reference derivatives at tensor quad points,
    /// `(nq^2) x nu` with point index `qj * nq + qi`.
    pub v2: DMatrix<f64>,
    pub d2x: DMatrix<f64>,
    pub d2y: DMatrix<f64>,
    /// Volume basis traces at face quad points, faces S, E, N, W.
    pub face_trace: [DMatrix<f64>; 4],
    /// Edge basis values at the 1D quad points.
    pub edge_v: DMatrix<f64>,
    /// Edge mass matrix on the reference interval.
    pub edge_mass_ref: DMatrix<f64>,
}

impl RefElement {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        let basis = NodalBasis::gll(p);
        let nq = p + 2;
        let (qp, qw) = gauss_legendre(nq);
        let n1 = p + 1;
        let nu = n1 * n1;
        let v1 = basis.vandermonde(&qp);
        let d1 = basis.vandermonde_deriv(&qp);
        let mut v2 = DMatrix::zeros(nq * nq, nu);
        let mut d2x = DMatrix::zeros(nq * nq, nu);
        let mut d2y = DMatrix::zeros(nq * nq, nu);
        for qj in 0..nq {
            for qi in 0..nq {
                let q = qj * nq + qi;
                for j in 0..n1 {
                    for i in 0..n1 {
                        let a = j * n1 + i;
                        v2[(q, a)] = v1[(qi, i)] * v1[(qj, j)];
                        d2x[(q, a)] = d1[(qi, i)] * v1[(qj, j)];
                        d2y[(q, a)] = v1[(qi, i)] * d1[(qj, j)];
                    }
                }
            }
        }
        // face quad points in the direction of increasing coordinate
        let trace_at = |fixed_eta: Option<f64>, fixed_xi: Option<f64>| -> DMatrix<f64> {
            DMatrix::from_fn(nq, nu, |q, a| {
                let (i, j) = (a % n1, a / n1);
                let (xi, eta) = match (fixed_eta, fixed_xi) {
                    (Some(eta), None) => (qp[q], eta),
                    (None, Some(xi)) => (xi, qp[q]),
                    _ => unreachable!(),
                };
                basis.eval(i, xi) * basis.eval(j, eta)
            })
        };
        let face_trace = [
            trace_at(Some(-1.0), None), // S
            trace_at(None, Some(1.0)),  // E
            trace_at(Some(1.0), None),  // N
            trace_at(None, Some(-1.0)), // W
        ];
        let edge_v = basis.vandermonde(&qp);
        let edge_mass_ref = basis.mass();
        Self { p, basis, qp, qw, v2, d2x, d2y, face_trace, edge_v, edge_mass_ref }
    }

    pub fn n1(&self) -> usize {
        self.p + 1
    }

    pub fn nu(&self) -> usize {
        self.n1() * self.n1()
    }
}

/// Outward unit normals for faces S, E, N, W.
pub const FACE_NORMALS: [(f64, f64); 4] = [(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)];

/// Condensation data of one element: trace-to-volume maps, affine parts from
/// the forcing, and the flux-moment map used to assemble the conservation
/// condition.
pub struct LocalElement {
    pub elem: usize,
    /// `u = u_lambda * lambda_local + u_f`.
    pub u_lambda: DMatrix<f64>,
    pub u_f: DVector<f64>,
    /// `[sigma_x; sigma_y] = sigma_lambda * lambda_local + sigma_f` (diffusive).
    pub sigma_lambda: Option<DMatrix<f64>>,
    pub sigma_f: Option<DVector<f64>>,
    /// Flux moments on all four faces: `flux_map * lambda_local + flux_aff`
    /// gives `<(sigma_hat + beta_hat u).n, mu>` for every face test function.
    pub flux_map: DMatrix<f64>,
    pub flux_aff: DVector<f64>,
}

/// Physical coordinates of the face quadrature points of face `f`.
fn face_points(mesh: &StructuredMesh, elem: usize, f: usize, qp: &[f64]) -> Vec<(f64, f64)> {
    let (x0, y0) = mesh.element_origin(elem);
    let h = mesh.h;
    qp.iter()
        .map(|&t| {
            let s = (t + 1.0) * 0.5 * h;
            match f {
                0 => (x0 + s, y0),
                1 => (x0 + h, y0 + s),
                2 => (x0 + s, y0 + h),
                3 => (x0, y0 + s),
                _ => unreachable!(),
            }
        })
        .collect()
}

/// `a^T diag(w) b`.
fn wgram(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut aw = a.clone();
    for (q, &wq) in w.iter().enumerate() {
        aw.row_mut(q).scale_mut(wq);
    }
    aw.transpose() * b
}

/// Build the local solver of one element and condense it.
pub fn condense_element(
    mesh: &StructuredMesh,
    coeffs: &Coefficients,
    refel: &RefElement,
    elem: usize,
) -> Result<LocalElement, HdgError> {
    let mode = coeffs.mode();
    let h = mesh.h;
    let nq = refel.qp.len();
    let n1 = refel.n1();
    let nu = refel.nu();
    let nl = 4 * n1;
    let (x0, y0) = mesh.element_origin(elem);

    // volume quadrature data
    let jac_vol = (h / 2.0) * (h / 2.0);
    let mut wv = vec![0.0; nq * nq];
    let mut bx = vec![0.0; nq * nq];
    let mut by = vec![0.0; nq * nq];
    let mut fv = vec![0.0; nq * nq];
    for qj in 0..nq {
        for qi in 0..nq {
            let q = qj * nq + qi;
            let x = x0 + (refel.qp[qi] + 1.0) * 0.5 * h;
            let y = y0 + (refel.qp[qj] + 1.0) * 0.5 * h;
            wv[q] = refel.qw[qi] * refel.qw[qj] * jac_vol;
            let (b1, b2) = (coeffs.beta)(x, y);
            bx[q] = b1;
            by[q] = b2;
            fv[q] = (coeffs.forcing)(x, y);
        }
    }
    let dscale = 2.0 / h; // reference-to-physical derivative
    let jac_face = h / 2.0;

    // face quadrature data
    let mut face_w: [Vec<f64>; 4] = Default::default();
    let mut face_bn: [Vec<f64>; 4] = Default::default();
    let mut face_tau: [Vec<f64>; 4] = Default::default();
    for f in 0..4 {
        let pts = face_points(mesh, elem, f, &refel.qp);
        let (nx, ny) = FACE_NORMALS[f];
        face_w[f] = refel.qw.iter().map(|w| w * jac_face).collect();
        face_bn[f] = pts
            .iter()
            .map(|&(x, y)| {
                let (b1, b2) = (coeffs.beta)(x, y);
                b1 * nx + b2 * ny
            })
            .collect();
        face_tau[f] = face_bn[f].iter().map(|&bn| stabilization_tau(bn)).collect();
    }

    // u-u block, shared by both modes:
    // -(beta u, grad w) + sum_f <(beta.n + tau) u, w>
    let mut grad_beta = refel.d2x.clone();
    grad_beta.scale_mut(dscale);
    let mut dyb = refel.d2y.clone();
    dyb.scale_mut(dscale);
    for q in 0..nq * nq {
        let (gx, gy) = (bx[q], by[q]);
        for a in 0..nu {
            grad_beta[(q, a)] = grad_beta[(q, a)] * gx + dyb[(q, a)] * gy;
        }
    }
    let mut m_uu = -wgram(&grad_beta, &wv, &refel.v2);
    for f in 0..4 {
        let w: Vec<f64> = face_w[f]
            .iter()
            .zip(&face_bn[f])
            .zip(&face_tau[f])
            .map(|((w, bn), tau)| w * (bn + tau))
            .collect();
        m_uu += wgram(&refel.face_trace[f], &w, &refel.face_trace[f]);
    }

    // lambda terms on the u rows: +<tau lambda, w>
    let mut b_u = DMatrix::zeros(nu, nl);
    for f in 0..4 {
        let w: Vec<f64> = face_w[f]
            .iter()
            .zip(&face_tau[f])
            .map(|(w, tau)| w * tau)
            .collect();
        b_u.view_mut((0, f * n1), (nu, n1))
            .copy_from(&wgram(&refel.face_trace[f], &w, &refel.edge_v));
    }

    let fw: Vec<f64> = wv.iter().zip(&fv).map(|(w, f)| w * f).collect();
    let rhs_f_u = {
        let mut vweighted = refel.v2.clone();
        for (q, &c) in fw.iter().enumerate() {
            vweighted.row_mut(q).scale_mut(c);
        }
        DVector::from_iterator(nu, vweighted.row_sum().iter().copied())
    };

    let (z_lambda, z_f, nsig) = match mode {
        Mode::Transport => {
            let lu = m_uu.lu();
            let z = lu
                .solve(&b_u)
                .ok_or_else(|| HdgError::SingularLocalSolver {
                    element: elem,
                    detail: "transport local matrix".into(),
                })?;
            let zf = lu.solve(&rhs_f_u).unwrap();
            (z, zf, 0usize)
        }
        Mode::Diffusive => {
            let kappa = coeffs.diffusion.kappa(elem);
            if !(kappa > 0.0) {
                return Err(HdgError::SingularLocalSolver {
                    element: elem,
                    detail: format!("non-positive kappa {kappa}"),
                });
            }
            let kinv = 1.0 / kappa;
            let nz = 3 * nu;
            let mut m = DMatrix::zeros(nz, nz);
            let mut b = DMatrix::zeros(nz, nl);
            let mut rf = DVector::zeros(nz);

            // (K^-1 sigma, v)
            let kw: Vec<f64> = wv.iter().map(|w| w * kinv).collect();
            let mass_k = wgram(&refel.v2, &kw, &refel.v2);
            m.view_mut((0, 0), (nu, nu)).copy_from(&mass_k);
            m.view_mut((nu, nu), (nu, nu)).copy_from(&mass_k);

            // -(u, div v): rows v_x get -(u, dx v_x), rows v_y get -(u, dy v_y)
            let mut dx = refel.d2x.clone();
            dx.scale_mut(dscale);
            let mut dy = refel.d2y.clone();
            dy.scale_mut(dscale);
            let dxt_v = wgram(&dx, &wv, &refel.v2);
            let dyt_v = wgram(&dy, &wv, &refel.v2);
            m.view_mut((0, 2 * nu), (nu, nu)).copy_from(&(-&dxt_v));
            m.view_mut((nu, 2 * nu), (nu, nu)).copy_from(&(-&dyt_v));

            // u rows: -(sigma, grad w) + sum_f <sigma.n, w>
            let mut w_sx = -dxt_v.clone();
            let mut w_sy = -dyt_v.clone();
            for f in 0..4 {
                let (nx, ny) = FACE_NORMALS[f];
                let face_m = wgram(&refel.face_trace[f], &face_w[f], &refel.face_trace[f]);
                if nx != 0.0 {
                    w_sx += nx * &face_m;
                }
                if ny != 0.0 {
                    w_sy += ny * &face_m;
                }
            }
            m.view_mut((2 * nu, 0), (nu, nu)).copy_from(&w_sx);
            m.view_mut((2 * nu, nu), (nu, nu)).copy_from(&w_sy);
            m.view_mut((2 * nu, 2 * nu), (nu, nu)).copy_from(&m_uu);

            // lambda terms: v rows get -<lambda, v.n>, u rows get +<tau lambda, w>
            for f in 0..4 {
                let (nx, ny) = FACE_NORMALS[f];
                let g = wgram(&refel.face_trace[f], &face_w[f], &refel.edge_v);
                if nx != 0.0 {
                    b.view_mut((0, f * n1), (nu, n1)).copy_from(&(-nx * &g));
                }
                if ny != 0.0 {
                    b.view_mut((nu, f * n1), (nu, n1)).copy_from(&(-ny * &g));
                }
            }
            b.view_mut((2 * nu, 0), (nu, nl)).copy_from(&b_u);
            rf.rows_mut(2 * nu, nu).copy_from(&rhs_f_u);

            let lu = m.lu();
            let z = lu
                .solve(&b)
                .ok_or_else(|| HdgError::SingularLocalSolver {
                    element: elem,
                    detail: "diffusive local matrix".into(),
                })?;
            let zf = lu.solve(&rf).unwrap();
            (z, zf, 2 * nu)
        }
    };

    let u_lambda = z_lambda.rows(nsig, nu).into_owned();
    let u_f = z_f.rows(nsig, nu).into_owned();
    let (sigma_lambda, sigma_f) = if nsig > 0 {
        (
            Some(z_lambda.rows(0, nsig).into_owned()),
            Some(z_f.rows(0, nsig).into_owned()),
        )
    } else {
        (None, None)
    };

    // flux moments: for each face f and edge test mu,
    // <sigma.n + (beta.n) u + tau (u - lambda), mu>_f
    let mut flux_map = DMatrix::zeros(nl, nl);
    let mut flux_aff = DVector::zeros(nl);
    for f in 0..4 {
        let wbt: Vec<f64> = face_w[f]
            .iter()
            .zip(&face_bn[f])
            .zip(&face_tau[f])
            .map(|((w, bn), tau)| w * (bn + tau))
            .collect();
        let g_u = wgram(&refel.edge_v, &wbt, &refel.face_trace[f]); // n1 x nu
        let mut rows = &g_u * &u_lambda; // n1 x nl
        let mut aff = &g_u * &u_f;
        if let (Some(sl), Some(sf)) = (&sigma_lambda, &sigma_f) {
            let (nx, ny) = FACE_NORMALS[f];
            let g_s = wgram(&refel.edge_v, &face_w[f], &refel.face_trace[f]);
            if nx != 0.0 {
                rows += nx * &g_s * sl.rows(0, nu);
                aff += nx * &g_s * sf.rows(0, nu);
            }
            if ny != 0.0 {
                rows += ny * &g_s * sl.rows(nu, nu);
                aff += ny * &g_s * sf.rows(nu, nu);
            }
        }
        // -<tau lambda, mu> on the face's own columns
        let wt: Vec<f64> = face_w[f]
            .iter()
            .zip(&face_tau[f])
            .map(|(w, tau)| w * tau)
            .collect();
        let own = wgram(&refel.edge_v, &wt, &refel.edge_v);
        let mut own_block = rows.view_mut((0, f * n1), (n1, n1));
        own_block -= &own;
        flux_map.view_mut((f * n1, 0), (n1, nl)).copy_from(&rows);
        flux_aff.rows_mut(f * n1, n1).copy_from(&aff);
    }

    Ok(LocalElement {
        elem,
        u_lambda,
        u_f,
        sigma_lambda,
        sigma_f,
        flux_map,
        flux_aff,
    })
}

/// The condensed global system `A lambda = g` over the unknown trace dofs.
pub struct TraceSystem {
    pub p: usize,
    pub mode: Mode,
    pub layout: Arc<DofLayout>,
    pub matrix: Arc<BlockMatrix>,
    pub rhs: DVector<f64>,
    /// Known boundary trace values (`None` for unknown edges).
    pub dirichlet: Vec<Option<DVector<f64>>>,
}

impl TraceSystem {
    /// Local trace vector of an element, combining unknowns and boundary data.
    pub fn gather_local(&self, mesh: &StructuredMesh, elem: usize, lambda: &DVector<f64>) -> DVector<f64> {
        let n1 = self.p + 1;
        let mut out = DVector::zeros(4 * n1);
        for (f, e) in mesh.element_faces(elem).into_iter().enumerate() {
            if let Some(u) = self.layout.unknown_of_entity[e] {
                out.rows_mut(f * n1, n1)
                    .copy_from(&lambda.rows(self.layout.offset(u), n1));
            } else if let Some(d) = &self.dirichlet[e] {
                out.rows_mut(f * n1, n1).copy_from(d);
            }
        }
        out
    }
}

/// Whether a boundary edge is an inflow edge (`beta . n < 0` at the midpoint).
pub fn is_inflow(mesh: &StructuredMesh, beta: &VectorField, edge: usize) -> bool {
    let (x, y) = mesh.edge_midpoint(edge);
    let (nx, ny) = mesh.boundary_normal(edge);
    let (b1, b2) = beta(x, y);
    b1 * nx + b2 * ny < 0.0
}

/// L2 projection of the boundary data onto one edge's trace space.
fn project_boundary_data(
    mesh: &StructuredMesh,
    refel: &RefElement,
    g: &ScalarField,
    edge: usize,
) -> DVector<f64> {
    let ((xa, ya), (xb, yb)) = mesh.edge_endpoints(edge);
    let n1 = refel.n1();
    let mut rhs = DVector::zeros(n1);
    for (q, &t) in refel.qp.iter().enumerate() {
        let s = (t + 1.0) * 0.5;
        let x = xa + s * (xb - xa);
        let y = ya + s * (yb - ya);
        let gv = g(x, y);
        for a in 0..n1 {
            rhs[a] += refel.qw[q] * gv * refel.edge_v[(q, a)];
        }
    }
    refel
        .edge_mass_ref
        .clone()
        .lu()
        .solve(&rhs)
        .expect("edge mass matrix is SPD")
}

/// Statically condense every element and assemble the trace system.
pub fn assemble_trace_system(
    mesh: &StructuredMesh,
    coeffs: &Coefficients,
    p: usize,
) -> Result<TraceSystem, HdgError> {
    let refel = RefElement::new(p);
    let mode = coeffs.mode();
    let n1 = p + 1;

    // unknown layout and boundary data
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
                    dirichlet[e.id] =
                        Some(project_boundary_data(mesh, &refel, &coeffs.dirichlet, e.id));
                } else {
                    sizes[e.id] = Some(n1);
                }
            }
        }
    }
    let layout = Arc::new(DofLayout::new(&sizes));
    let mut matrix = BlockMatrix::new(layout.clone());
    let mut rhs = DVector::zeros(layout.total_dofs());

    // condense in parallel chunks, accumulate serially
    let chunk = 2048usize;
    let nelem = mesh.element_count();
    let mut start = 0;
    while start < nelem {
        let end = (start + chunk).min(nelem);
        let locals: Vec<Result<LocalElement, HdgError>> = (start..end)
            .into_par_iter()
            .map(|elem| condense_element(mesh, coeffs, &refel, elem))
            .collect();
        for res in locals {
            let le = res?;
            let faces = mesh.element_faces(le.elem);
            // known-lambda part of the local trace vector
            let mut lam_known = DVector::zeros(4 * n1);
            let mut has_known = false;
            for (f, &e) in faces.iter().enumerate() {
                if let Some(d) = &dirichlet[e] {
                    lam_known.rows_mut(f * n1, n1).copy_from(d);
                    has_known = true;
                }
            }
            let aff = if has_known {
                &le.flux_aff + &le.flux_map * &lam_known
            } else {
                le.flux_aff.clone()
            };
            for (f, &e) in faces.iter().enumerate() {
                let Some(r) = layout.unknown_of_entity[e] else { continue };
                for (f2, &e2) in faces.iter().enumerate() {
                    if let Some(c) = layout.unknown_of_entity[e2] {
                        let blk = le.flux_map.view((f * n1, f2 * n1), (n1, n1)).into_owned();
                        matrix.add_block(r, c, &blk);
                    }
                }
                let mut rr = rhs.rows_mut(layout.offset(r), n1);
                rr -= aff.rows(f * n1, n1);
            }
        }
        start = end;
    }

    // Outflow closure (transport): the one-sided flux moment alone would set
    // the total flux to zero, which picks up the exponentially growing
    // characteristic mode. Subtracting <beta.n lambda, mu> turns the edge
    // equation into <(beta.n + tau)(u - lambda), mu> = 0, i.e. lambda = u
    // weakly (beta.n + tau > 0 pointwise), the upwind trace.
    if mode == Mode::Transport {
        for e in &mesh.edges {
            if e.kind != EdgeKind::Boundary {
                continue;
            }
            let Some(u) = layout.unknown_of_entity[e.id] else { continue };
            let ((xa, ya), (xb, yb)) = mesh.edge_endpoints(e.id);
            let (nx, ny) = mesh.boundary_normal(e.id);
            let jac = mesh.h / 2.0;
            let mut blk = DMatrix::zeros(n1, n1);
            for (q, &t) in refel.qp.iter().enumerate() {
                let s = (t + 1.0) * 0.5;
                let (x, y) = (xa + s * (xb - xa), ya + s * (yb - ya));
                let (b1, b2) = (coeffs.beta)(x, y);
                let w = refel.qw[q] * jac * (b1 * nx + b2 * ny);
                for a in 0..n1 {
                    for b in 0..n1 {
                        blk[(a, b)] -= w * refel.edge_v[(q, a)] * refel.edge_v[(q, b)];
                    }
                }
            }
            matrix.add_block(u, u, &blk);
        }
    }

    Ok(TraceSystem { p, mode, layout, matrix: Arc::new(matrix), rhs, dirichlet })
}

/// Per-element recovered volume solution.
pub struct ElementSolution {
    pub u: DVector<f64>,
    /// `[sigma_x; sigma_y]` (diffusive mode).
    pub sigma: Option<DVector<f64>>,
}

/// Recover `(u, sigma)` element by element from a trace solution.
pub fn recover_volume(
    mesh: &StructuredMesh,
    coeffs: &Coefficients,
    system: &TraceSystem,
    lambda: &DVector<f64>,
) -> Result<Vec<ElementSolution>, HdgError> {
    if lambda.len() != system.layout.total_dofs() {
        return Err(HdgError::DimensionMismatch(format!(
            "lambda has {} dofs, layout has {}",
            lambda.len(),
            system.layout.total_dofs()
        )));
    }
    let refel = RefElement::new(system.p);
    (0..mesh.element_count())
        .into_par_iter()
        .map(|elem| {
            let le = condense_element(mesh, coeffs, &refel, elem)?;
            let lam = system.gather_local(mesh, elem, lambda);
            let u = &le.u_lambda * &lam + &le.u_f;
            let sigma = le
                .sigma_lambda
                .as_ref()
                .map(|sl| sl * &lam + le.sigma_f.as_ref().unwrap());
            Ok(ElementSolution { u, sigma })
        })
        .collect()
}

/// Global L2 error of the recovered `u` against an exact solution.
pub fn l2_error_u(
    mesh: &StructuredMesh,
    system: &TraceSystem,
    solutions: &[ElementSolution],
    exact: &ScalarField,
) -> f64 {
    let refel = RefElement::new(system.p);
    let nq = refel.qp.len();
    let h = mesh.h;
    let jac = (h / 2.0) * (h / 2.0);
    let total: f64 = (0..mesh.element_count())
        .into_par_iter()
        .map(|elem| {
            let (x0, y0) = mesh.element_origin(elem);
            let uh = &refel.v2 * &solutions[elem].u;
            let mut acc = 0.0;
            for qj in 0..nq {
                for qi in 0..nq {
                    let q = qj * nq + qi;
                    let x = x0 + (refel.qp[qi] + 1.0) * 0.5 * h;
                    let y = y0 + (refel.qp[qj] + 1.0) * 0.5 * h;
                    let d = uh[q] - exact(x, y);
                    acc += refel.qw[qi] * refel.qw[qj] * jac * d * d;
                }
            }
            acc
        })
        .sum();
    total.sqrt()
}

/// Max over interior edges of the conservation-condition residual
/// `<[[flux]], mu>` for a given trace solution.
pub fn conservation_residual(system: &TraceSystem, lambda: &DVector<f64>) -> f64 {
    let r = &system.rhs - system.matrix.matvec(lambda);
    r.amax()
}
