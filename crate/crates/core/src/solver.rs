//! Nested-dissection block elimination, block-Jacobi smoothing, and the
//! ML/EML v-cycle.
//!
//! The same elimination engine factors both the fine trace matrix `A0` in ND
//! order (the direct solver, and the degenerate identity-lumping case) and
//! the lumped level-1 operator `A1` (the ML/EML coarse solver, where every
//! front has four lumped arms regardless of level). Eliminating a front's
//! interior block and propagating the Schur update to its boundary edges is
//! exact block Gaussian elimination, so the coarse solve is a direct solve
//! of `A1`.

use crate::error::HdgError;
use crate::hdg::TraceSystem;
use crate::linalg::{BlockMatrix, DofLayout};
use crate::mesh::{build_lumping_map, SkeletonHierarchy, StructuredMesh};
use crate::projection::{build_prolongation, galerkin_coarse_matrix, Coarsening, EnrichmentSchedule, ProjectionPair};
use nalgebra::{DMatrix, DVector, LU};
use nalgebra::{Dyn, VecStorage};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

type DenseLu = LU<f64, Dyn, Dyn>;

/// One elimination front: the unknowns removed together.
#[derive(Debug, Clone)]
pub struct ElimGroup {
    pub level: usize,
    pub unknowns: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ElimPlan {
    pub groups: Vec<ElimGroup>,
}

/// ND elimination order on the fine trace unknowns: level-ascending fronts,
/// then (transport mode) the outflow boundary edges as a final pseudo-front.
pub fn nd_plan(hier: &SkeletonHierarchy, layout: &DofLayout) -> ElimPlan {
    let mut covered = vec![false; layout.n_unknowns()];
    let mut groups = Vec::new();
    let mut top_level = 0;
    for (level, fronts) in hier.fronts_by_level.iter().enumerate() {
        for &fid in fronts {
            let mut unknowns = Vec::new();
            for e in hier.fronts[fid].edges() {
                if let Some(u) = layout.unknown_of_entity[e] {
                    unknowns.push(u);
                    covered[u] = true;
                }
            }
            if !unknowns.is_empty() {
                groups.push(ElimGroup { level, unknowns });
            }
        }
        top_level = top_level.max(level);
    }
    let rest: Vec<usize> = (0..layout.n_unknowns()).filter(|&u| !covered[u]).collect();
    if !rest.is_empty() {
        groups.push(ElimGroup { level: top_level + 1, unknowns: rest });
    }
    ElimPlan { groups }
}

/// Elimination order on the lumped level-1 unknowns: each front's four arms
/// form its interior block; passthrough edges go last.
pub fn coarse_plan(
    hier: &SkeletonHierarchy,
    lumping: &crate::mesh::LumpingMap,
    pair: &ProjectionPair,
) -> ElimPlan {
    let mut covered = vec![false; pair.coarse_layout.n_unknowns()];
    let mut groups = Vec::new();
    let mut top_level = 0;
    for (level, fronts) in hier.fronts_by_level.iter().enumerate() {
        for &fid in fronts {
            let mut unknowns = Vec::new();
            for &l in &lumping.front_lumped[fid] {
                let cu = pair.coarse_of_lumped[l];
                if cu != usize::MAX {
                    unknowns.push(cu);
                    covered[cu] = true;
                }
            }
            if !unknowns.is_empty() {
                groups.push(ElimGroup { level, unknowns });
            }
        }
        top_level = top_level.max(level);
    }
    let rest: Vec<usize> = (0..pair.coarse_layout.n_unknowns())
        .filter(|&u| !covered[u])
        .collect();
    if !rest.is_empty() {
        groups.push(ElimGroup { level: top_level + 1, unknowns: rest });
    }
    ElimPlan { groups }
}

/// Cost counters in the paper's model granularity: `sum m^3` factor flops and
/// `sum m^2` stored entries over front interior sizes `m`.
#[derive(Debug, Clone, Default)]
pub struct EliminationCounters {
    pub factor_flops: f64,
    pub memory: f64,
    pub front_sizes: Vec<(usize, usize)>,
}

impl EliminationCounters {
    fn record(&mut self, level: usize, m: usize) {
        let mf = m as f64;
        self.factor_flops += mf * mf * mf;
        self.memory += mf * mf;
        self.front_sizes.push((level, m));
    }
}

/// Model counters of a plan without performing the factorization.
pub fn plan_counters(plan: &ElimPlan, layout: &DofLayout) -> EliminationCounters {
    let mut c = EliminationCounters::default();
    for g in &plan.groups {
        let m: usize = g.unknowns.iter().map(|&u| layout.size(u)).sum();
        c.record(g.level, m);
    }
    c
}

struct GroupFactor {
    level: usize,
    unknowns: Vec<usize>,
    boundary: Vec<usize>,
    /// Interior block before elimination (kept for the ideal-operator tests).
    a_ii: DMatrix<f64>,
    lu: DenseLu,
    /// `A_II^-1 A_IB`.
    x: DMatrix<f64>,
    a_bi: DMatrix<f64>,
}

/// Exact block factorization of a `BlockMatrix` in a given front order.
pub struct BlockElimination {
    layout: Arc<DofLayout>,
    groups: Vec<GroupFactor>,
    pub counters: EliminationCounters,
}

fn gather_dense(
    layout: &DofLayout,
    rows: &[BTreeMap<usize, DMatrix<f64>>],
    rlist: &[usize],
    roffs: &[usize],
    clist: &[usize],
    coffs: &[usize],
) -> DMatrix<f64> {
    let m = roffs.last().copied().unwrap_or(0) + rlist.last().map(|&u| layout.size(u)).unwrap_or(0);
    let n = coffs.last().copied().unwrap_or(0) + clist.last().map(|&u| layout.size(u)).unwrap_or(0);
    let mut out = DMatrix::zeros(m, n);
    for (ri, &r) in rlist.iter().enumerate() {
        for (ci, &c) in clist.iter().enumerate() {
            if let Some(b) = rows[r].get(&c) {
                out.view_mut((roffs[ri], coffs[ci]), (b.nrows(), b.ncols()))
                    .copy_from(b);
            }
        }
    }
    out
}

fn offsets(layout: &DofLayout, list: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(list.len());
    let mut acc = 0;
    for &u in list {
        o.push(acc);
        acc += layout.size(u);
    }
    o
}

impl BlockElimination {
    pub fn factor(matrix: &BlockMatrix, plan: &ElimPlan) -> Result<Self, HdgError> {
        let layout = matrix.layout.clone();
        let mut rows: Vec<BTreeMap<usize, DMatrix<f64>>> = matrix
            .rows
            .iter()
            .map(|r| r.iter().map(|(c, b)| (*c, b.clone())).collect())
            .collect();
        let mut active = vec![true; layout.n_unknowns()];
        let mut groups = Vec::with_capacity(plan.groups.len());
        let mut counters = EliminationCounters::default();

        for (gid, g) in plan.groups.iter().enumerate() {
            let interior = &g.unknowns;
            debug_assert!(interior.iter().all(|&u| active[u]));
            let in_interior: std::collections::HashSet<usize> =
                interior.iter().copied().collect();
            let mut boundary: Vec<usize> = interior
                .iter()
                .flat_map(|&i| rows[i].keys().copied())
                .filter(|c| !in_interior.contains(c))
                .collect();
            boundary.sort_unstable();
            boundary.dedup();
            debug_assert!(boundary.iter().all(|&b| active[b]));

            let ioffs = offsets(&layout, interior);
            let boffs = offsets(&layout, &boundary);
            let a_ii = gather_dense(&layout, &rows, interior, &ioffs, interior, &ioffs);
            let a_ib = gather_dense(&layout, &rows, interior, &ioffs, &boundary, &boffs);
            let a_bi = gather_dense(&layout, &rows, &boundary, &boffs, interior, &ioffs);
            let m = a_ii.nrows();
            counters.record(g.level, m);

            let lu = a_ii.clone().lu();
            let x = lu.solve(&a_ib).ok_or(HdgError::SingularFront {
                level: g.level,
                front: gid,
            })?;

            if !boundary.is_empty() {
                let schur = &a_bi * &x;
                for (bi, &r) in boundary.iter().enumerate() {
                    for (bj, &c) in boundary.iter().enumerate() {
                        let (rs, cs) = (layout.size(r), layout.size(c));
                        let sub = schur.view((boffs[bi], boffs[bj]), (rs, cs));
                        match rows[r].get_mut(&c) {
                            Some(b) => *b -= sub,
                            None => {
                                rows[r].insert(c, -sub.into_owned());
                            }
                        }
                    }
                }
            }
            for &i in interior {
                rows[i].clear();
                active[i] = false;
            }
            for &b in &boundary {
                for &i in interior {
                    rows[b].remove(&i);
                }
            }

            groups.push(GroupFactor {
                level: g.level,
                unknowns: interior.clone(),
                boundary,
                a_ii,
                lu,
                x,
                a_bi,
            });
        }
        if let Some(u) = active.iter().position(|&a| a) {
            return Err(HdgError::DimensionMismatch(format!(
                "elimination plan leaves unknown {u} uneliminated"
            )));
        }
        Ok(Self { layout, groups, counters })
    }

    fn gather(&self, v: &DVector<f64>, list: &[usize]) -> DVector<f64> {
        let n: usize = list.iter().map(|&u| self.layout.size(u)).sum();
        let mut out = DVector::zeros(n);
        let mut o = 0;
        for &u in list {
            let s = self.layout.size(u);
            out.rows_mut(o, s).copy_from(&v.rows(self.layout.offset(u), s));
            o += s;
        }
        out
    }

    fn scatter(&self, v: &mut DVector<f64>, list: &[usize], vals: &DVector<f64>) {
        let mut o = 0;
        for &u in list {
            let s = self.layout.size(u);
            v.rows_mut(self.layout.offset(u), s).copy_from(&vals.rows(o, s));
            o += s;
        }
    }

    /// Exact solve `A x = b` via forward elimination and back-substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.layout.total_dofs());
        let mut work = b.clone();
        let mut ys = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let bi = self.gather(&work, &g.unknowns);
            let y = g.lu.solve(&bi).expect("factored block");
            if !g.boundary.is_empty() {
                let upd = &g.a_bi * &y;
                let mut o = 0;
                for &u in &g.boundary {
                    let s = self.layout.size(u);
                    let mut rb = work.rows_mut(self.layout.offset(u), s);
                    rb -= upd.rows(o, s);
                    o += s;
                }
            }
            ys.push(y);
        }
        let mut x = DVector::zeros(b.len());
        for (g, y) in self.groups.iter().zip(&ys).rev() {
            let xi = if g.boundary.is_empty() {
                y.clone()
            } else {
                let xb = self.gather(&x, &g.boundary);
                y - &g.x * xb
            };
            self.scatter(&mut x, &g.unknowns, &xi);
        }
        x
    }

    /// Interior blocks `A_{k,II}` per group, for the ideal-operator tests.
    pub fn interior_blocks(&self) -> impl Iterator<Item = (usize, &[usize], &DMatrix<f64>)> {
        self.groups
            .iter()
            .map(|g| (g.level, g.unknowns.as_slice(), &g.a_ii))
    }
}

/// Undamped block-Jacobi over the per-edge diagonal blocks of `A0`.
pub struct BlockJacobiSmoother {
    layout: Arc<DofLayout>,
    lus: Vec<DenseLu>,
}

impl BlockJacobiSmoother {
    pub fn new(matrix: &BlockMatrix) -> Result<Self, HdgError> {
        let layout = matrix.layout.clone();
        let lus = (0..layout.n_unknowns())
            .map(|u| {
                let b = matrix.block(u, u).ok_or_else(|| {
                    HdgError::DimensionMismatch(format!("missing diagonal block {u}"))
                })?;
                let lu = b.clone().lu();
                if !lu.is_invertible() {
                    return Err(HdgError::SingularFront { level: 0, front: u });
                }
                Ok(lu)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { layout, lus })
    }

    /// `steps` sweeps of `x <- x + D^-1 (b - A x)`.
    pub fn smooth(&self, a: &BlockMatrix, x: &mut DVector<f64>, b: &DVector<f64>, steps: usize) {
        for _ in 0..steps {
            let r = b - a.matvec(x);
            let updates: Vec<VecStorage<f64, Dyn, nalgebra::U1>> = (0..self.lus.len())
                .into_par_iter()
                .map(|u| {
                    let (o, s) = (self.layout.offset(u), self.layout.size(u));
                    self.lus[u]
                        .solve(&r.rows(o, s).into_owned())
                        .expect("invertible diagonal block")
                        .data
                })
                .collect();
            for (u, upd) in updates.into_iter().enumerate() {
                let (o, s) = (self.layout.offset(u), self.layout.size(u));
                let mut xs = x.rows_mut(o, s);
                xs += DVector::from_data(upd);
            }
        }
    }
}

/// The multiplicative two-level preconditioner: block-Jacobi pre/post smoothing
/// around a coarse correction through the lumped (ML) or enriched (EML) space.
pub struct VCyclePreconditioner {
    pub a0: Arc<BlockMatrix>,
    pub smoother: BlockJacobiSmoother,
    pub pair: Arc<ProjectionPair>,
    pub coarse: BlockElimination,
    pub m1: usize,
    pub m2: usize,
}

impl VCyclePreconditioner {
    /// `z0 = I0 A1^-1 I0^T r0`.
    pub fn coarse_correct(&self, r0: &DVector<f64>) -> DVector<f64> {
        self.pair.prolong(&self.coarse.solve(&self.pair.restrict_dual(r0)))
    }

    /// One v-cycle applied to a residual, zero initial guess.
    pub fn apply(&self, r0: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(r0.len());
        self.smoother.smooth(&self.a0, &mut x, r0, self.m1);
        let r = if self.m1 == 0 { r0.clone() } else { r0 - self.a0.matvec(&x) };
        x += self.coarse_correct(&r);
        self.smoother.smooth(&self.a0, &mut x, r0, self.m2);
        x
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlOptions {
    pub coarsening: Coarsening,
    pub cap: usize,
    pub m1: usize,
    pub m2: usize,
}

impl MlOptions {
    pub fn ml() -> Self {
        Self { coarsening: Coarsening::Ml, cap: 10, m1: 2, m2: 2 }
    }

    pub fn eml() -> Self {
        Self { coarsening: Coarsening::Eml, cap: 10, m1: 2, m2: 2 }
    }
}

/// Assemble the coarse operator and factor it; build the full v-cycle.
pub fn build_vcycle(
    mesh: &StructuredMesh,
    hier: &SkeletonHierarchy,
    sys: &TraceSystem,
    opts: MlOptions,
) -> Result<VCyclePreconditioner, HdgError> {
    let lumping = build_lumping_map(mesh, hier);
    let schedule = EnrichmentSchedule::new(opts.coarsening, sys.p, opts.cap);
    let pair = Arc::new(build_prolongation(mesh, &lumping, &schedule, sys.layout.clone())?);
    let a1 = galerkin_coarse_matrix(sys, &pair)?;
    let plan = coarse_plan(hier, &lumping, &pair);
    let coarse = BlockElimination::factor(&a1, &plan)?;
    let smoother = BlockJacobiSmoother::new(&sys.matrix)?;
    Ok(VCyclePreconditioner {
        a0: sys.matrix.clone(),
        smoother,
        pair,
        coarse,
        m1: opts.m1,
        m2: opts.m2,
    })
}

/// Direct ND factorization of the fine trace matrix.
pub fn nd_factor(hier: &SkeletonHierarchy, sys: &TraceSystem) -> Result<BlockElimination, HdgError> {
    let plan = nd_plan(hier, &sys.layout);
    BlockElimination::factor(&sys.matrix, &plan)
}
