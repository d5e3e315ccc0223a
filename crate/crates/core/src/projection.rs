//! Level-0 / level-1 trace transfer operators for the ML and EML hierarchies.
//!
//! The coarse (level-1) space replaces each separator arm by a single long
//! edge carrying one polynomial: degree `p` for ML, degree
//! `min(p + (k-1), cap)` for EML when the owning front sits at level `k`.
//! The prolongation `I0` maps each coarse polynomial to its L2-best
//! approximation in the `Q^p` space of every constituent fine edge; `Q1` is
//! the L2 adjoint `M1^-1 I0^T M0`. The Galerkin coarse operator is assembled
//! as `A1 = I0^T A0 I0`, which makes the energy identity
//! `<A0 I0 l, I0 l> = <A1 l, l>` hold by construction (residuals live in the
//! dual space, so their restriction is the plain transpose; the edge mass
//! scalings of `Q1` cancel inside the coarse correction).

use crate::basis::{gauss_legendre, NodalBasis};
use crate::error::HdgError;
use crate::hdg::TraceSystem;
use crate::linalg::{BlockMatrix, DofLayout};
use crate::mesh::{LumpingMap, StructuredMesh};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coarsening {
    /// Lumped arms keep the fine order `p`.
    Ml,
    /// Lumped arms are enriched by owning-front level, `min(p + (k-1), cap)`.
    Eml,
}

#[derive(Debug, Clone, Copy)]
pub struct EnrichmentSchedule {
    pub p: usize,
    pub cap: usize,
    pub coarsening: Coarsening,
}

impl EnrichmentSchedule {
    pub fn new(coarsening: Coarsening, p: usize, cap: usize) -> Self {
        Self { p, cap, coarsening }
    }

    /// Polynomial order of a lumped edge owned by a level-`k` front.
    pub fn order_for_level(&self, k: usize) -> usize {
        match self.coarsening {
            Coarsening::Ml => self.p,
            Coarsening::Eml => (self.p + k - 1).min(self.cap),
        }
    }
}

/// What a coarse unknown stands for.
#[derive(Debug, Clone, Copy)]
pub enum CoarseEntity {
    /// A lumped separator arm (index into `LumpingMap::lumped`).
    Lumped(usize),
    /// A fine edge kept as-is (outflow boundary edges in transport mode).
    Passthrough(usize),
}

/// The prolongation/restriction pair between the fine trace space and the
/// lumped (and possibly enriched) level-1 space.
pub struct ProjectionPair {
    pub fine_layout: Arc<DofLayout>,
    pub coarse_layout: Arc<DofLayout>,
    pub coarse_entities: Vec<CoarseEntity>,
    /// Coarse unknown of a lumped edge id.
    pub coarse_of_lumped: Vec<usize>,
    /// For each fine unknown: its coarse unknown and the `(p+1) x (q+1)`
    /// prolongation block.
    pub blocks: Vec<(usize, DMatrix<f64>)>,
    /// Physical edge mass matrices per fine / coarse unknown.
    pub m0: Vec<DMatrix<f64>>,
    pub m1: Vec<DMatrix<f64>>,
    /// Polynomial order per coarse unknown.
    pub coarse_order: Vec<usize>,
}

impl ProjectionPair {
    /// `I0 x1`: coarse coefficients to fine coefficients.
    pub fn prolong(&self, x1: &DVector<f64>) -> DVector<f64> {
        let mut x0 = DVector::zeros(self.fine_layout.total_dofs());
        for (u, (cu, p)) in self.blocks.iter().enumerate() {
            let xc = x1.rows(self.coarse_layout.offset(*cu), self.coarse_layout.size(*cu));
            x0.rows_mut(self.fine_layout.offset(u), self.fine_layout.size(u))
                .gemv(1.0, p, &xc, 0.0);
        }
        x0
    }

    /// `I0^T r0`: restriction of a dual vector (residual of the assembled system).
    pub fn restrict_dual(&self, r0: &DVector<f64>) -> DVector<f64> {
        let mut r1 = DVector::zeros(self.coarse_layout.total_dofs());
        for (u, (cu, p)) in self.blocks.iter().enumerate() {
            let rf = r0.rows(self.fine_layout.offset(u), self.fine_layout.size(u));
            r1.rows_mut(self.coarse_layout.offset(*cu), self.coarse_layout.size(*cu))
                .gemv_tr(1.0, p, &rf, 1.0);
        }
        r1
    }

    /// `Q1 x0 = M1^-1 I0^T M0 x0`: the L2 adjoint acting on functions.
    pub fn restrict_l2(&self, x0: &DVector<f64>) -> DVector<f64> {
        let mut r1 = DVector::zeros(self.coarse_layout.total_dofs());
        for (u, (cu, p)) in self.blocks.iter().enumerate() {
            let xf = x0.rows(self.fine_layout.offset(u), self.fine_layout.size(u));
            let w = p.transpose() * (&self.m0[u] * xf);
            r1.rows_mut(self.coarse_layout.offset(*cu), self.coarse_layout.size(*cu))
                .axpy(1.0, &w, 1.0);
        }
        for cu in 0..self.coarse_layout.n_unknowns() {
            let s = self.coarse_layout.size(cu);
            let o = self.coarse_layout.offset(cu);
            let z = self.m1[cu]
                .clone()
                .lu()
                .solve(&r1.rows(o, s).into_owned())
                .expect("coarse edge mass is SPD");
            r1.rows_mut(o, s).copy_from(&z);
        }
        r1
    }
}

/// Build `I0` (and the mass matrices realizing its L2 adjoint) from the
/// lumping map and the enrichment schedule.
pub fn build_prolongation(
    mesh: &StructuredMesh,
    lumping: &LumpingMap,
    schedule: &EnrichmentSchedule,
    fine_layout: Arc<DofLayout>,
) -> Result<ProjectionPair, HdgError> {
    let p = schedule.p;
    let n1 = p + 1;
    let fine_basis = NodalBasis::gll(p);
    let fine_mass_ref = fine_basis.mass();
    let fine_mass_lu = fine_mass_ref.clone().lu();

    // coarse entities: lumped edges that contain at least one unknown fine
    // edge, then passthrough fine unknowns not owned by any lumped edge
    let mut coarse_entities = Vec::new();
    let mut coarse_of_lumped = vec![usize::MAX; lumping.lumped.len()];
    for le in &lumping.lumped {
        let any_unknown = le
            .fine_edges
            .iter()
            .any(|&e| fine_layout.unknown_of_entity[e].is_some());
        if any_unknown {
            coarse_of_lumped[le.id] = coarse_entities.len();
            coarse_entities.push(CoarseEntity::Lumped(le.id));
        }
    }
    let mut coarse_of_fine = vec![None; mesh.edges.len()];
    for (u, &e) in fine_layout.entity_of_unknown.iter().enumerate() {
        let _ = u;
        if lumping.fine_to_lumped[e].is_none() {
            coarse_of_fine[e] = Some(coarse_entities.len());
            coarse_entities.push(CoarseEntity::Passthrough(e));
        }
    }

    let mut coarse_order = Vec::with_capacity(coarse_entities.len());
    let mut sizes = Vec::with_capacity(coarse_entities.len());
    for ce in &coarse_entities {
        let q = match ce {
            CoarseEntity::Lumped(l) => schedule.order_for_level(lumping.lumped[*l].level),
            CoarseEntity::Passthrough(_) => p,
        };
        coarse_order.push(q);
        sizes.push(Some(q + 1));
    }
    let coarse_layout = Arc::new(DofLayout::new(&sizes));

    // coarse edge masses
    let mut m1 = Vec::with_capacity(coarse_entities.len());
    for (ci, ce) in coarse_entities.iter().enumerate() {
        let q = coarse_order[ci];
        let len = match ce {
            CoarseEntity::Lumped(l) => lumping.lumped[*l].fine_edges.len() as f64 * mesh.h,
            CoarseEntity::Passthrough(_) => mesh.h,
        };
        m1.push(NodalBasis::gll(q).mass() * (len / 2.0));
    }

    // prolongation blocks per fine unknown
    let mut blocks = Vec::with_capacity(fine_layout.n_unknowns());
    let mut m0 = Vec::with_capacity(fine_layout.n_unknowns());
    let mut coarse_bases: std::collections::HashMap<usize, NodalBasis> = Default::default();
    for &e in &fine_layout.entity_of_unknown {
        m0.push(&fine_mass_ref * (mesh.h / 2.0));
        let (cu, block) = match lumping.fine_to_lumped[e] {
            Some(l) => {
                let le = &lumping.lumped[l];
                let cu = coarse_of_lumped[l];
                let q = coarse_order[cu];
                if q == p && le.fine_edges.len() == 1 {
                    (cu, DMatrix::identity(n1, n1))
                } else {
                    let cb = coarse_bases
                        .entry(q)
                        .or_insert_with(|| NodalBasis::gll(q));
                    let m = le.fine_edges.len();
                    let pos = le
                        .fine_edges
                        .iter()
                        .position(|&f| f == e)
                        .expect("fine edge listed in its lumped edge");
                    // fine edge occupies [a, a + 2/m] of the lumped interval
                    let a = -1.0 + 2.0 * pos as f64 / m as f64;
                    let nq = q.max(p) + 2;
                    let (qp, qw) = gauss_legendre(nq);
                    let mut g = DMatrix::zeros(n1, q + 1);
                    for (&t, &w) in qp.iter().zip(&qw) {
                        let s = a + (t + 1.0) / m as f64;
                        for i in 0..n1 {
                            let fi = fine_basis.eval(i, t);
                            for j in 0..=q {
                                g[(i, j)] += w * fi * cb.eval(j, s);
                            }
                        }
                    }
                    let block = fine_mass_lu
                        .solve(&g)
                        .ok_or_else(|| HdgError::DimensionMismatch("singular edge mass".into()))?;
                    (cu, block)
                }
            }
            None => {
                let cu = coarse_of_fine[e].expect("passthrough registered");
                (cu, DMatrix::identity(n1, n1))
            }
        };
        blocks.push((cu, block));
    }

    Ok(ProjectionPair {
        fine_layout,
        coarse_layout,
        coarse_entities,
        coarse_of_lumped,
        blocks,
        m0,
        m1,
        coarse_order,
    })
}

/// Galerkin coarse operator `A1 = I0^T A0 I0`, assembled blockwise.
pub fn galerkin_coarse_matrix(
    a0: &TraceSystem,
    pair: &ProjectionPair,
) -> Result<BlockMatrix, HdgError> {
    if !Arc::ptr_eq(&a0.layout, &pair.fine_layout)
        && a0.layout.total_dofs() != pair.fine_layout.total_dofs()
    {
        return Err(HdgError::DimensionMismatch(
            "trace system and projection pair disagree".into(),
        ));
    }
    let mut a1 = BlockMatrix::new(pair.coarse_layout.clone());
    for (r, row) in a0.matrix.rows.iter().enumerate() {
        let (cr, pr) = &pair.blocks[r];
        for (c, b) in row {
            let (cc, pc) = &pair.blocks[*c];
            let blk = pr.transpose() * b * pc;
            a1.add_block(*cr, *cc, &blk);
        }
    }
    Ok(a1)
}
