//! Serial cost models for the ND, ML, and EML factorizations.
//!
//! On a square (cube) of `N_T = n^d` elements with `n = 2^N`, level `k`
//! holds `4^{N-k}` (`8^{N-k}`) separator fronts. ND fronts are crosses of
//! size `4 {n/2^{N+1-k}} q_0` in 2D (`12 {.}^2 q_0` in 3D) with
//! `q_0 = (p+1)^{d-1}` nodes per edge (face); ML/EML fronts are lumped
//! crosses of size `4 q_k` (`12 q_k`) where `q_k` uses the level's
//! solution order. Factor cost is modeled as the sum of cubes of front
//! sizes and memory as the sum of squares, matching the counters recorded
//! by [`crate::solver::EliminationCounters`].

use serde::Serialize;

/// Which factorization the model prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Nested dissection: exact fronts, no lumping.
    Nd,
    /// Multilevel: lumped fronts, order `p` on every level.
    Ml,
    /// Enriched multilevel: order `min(p + k - 1, cap)` on level `k`.
    Eml { cap: usize },
}

/// Cost model for one mesh/order/schedule combination.
#[derive(Debug, Clone, Copy)]
pub struct CostModel {
    /// Spatial dimension, 2 or 3.
    pub dimension: usize,
    /// Number of levels `N`; the mesh has `n = 2^N` elements per side.
    pub levels: usize,
    /// Base solution order `p`.
    pub order: usize,
    pub schedule: Schedule,
}

impl CostModel {
    /// Nodes per edge (2D) or face (3D) at the base order.
    pub fn q0(&self) -> f64 {
        (self.order as f64 + 1.0).powi(self.dimension as i32 - 1)
    }

    /// Solution order on level-`k` fronts, `k = 1..=N`.
    pub fn order_at(&self, k: usize) -> usize {
        match self.schedule {
            Schedule::Nd | Schedule::Ml => self.order,
            Schedule::Eml { cap } => (self.order + k - 1).min(cap),
        }
    }

    fn qk(&self, k: usize) -> f64 {
        (self.order_at(k) as f64 + 1.0).powi(self.dimension as i32 - 1)
    }

    /// Enrichment ratio `alpha_k = q_k / q_0`.
    pub fn alpha(&self, k: usize) -> f64 {
        self.qk(k) / self.q0()
    }

    /// Total number of elements `N_T = 2^(d N)`.
    pub fn n_elements(&self) -> f64 {
        2f64.powi((self.dimension * self.levels) as i32)
    }

    /// Dense size of a level-`k` front under this schedule.
    pub fn front_size(&self, k: usize) -> f64 {
        // n / 2^{N+1-k} = 2^{k-1} segments per cross arm.
        let seg = 2f64.powi(k as i32 - 1);
        match (self.schedule, self.dimension) {
            (Schedule::Nd, 2) => 4.0 * seg * self.q0(),
            (Schedule::Nd, 3) => 12.0 * seg * seg * self.q0(),
            (_, 2) => 4.0 * self.qk(k),
            (_, 3) => 12.0 * self.qk(k),
            _ => panic!("dimension must be 2 or 3"),
        }
    }

    fn level_sum(&self, power: i32) -> f64 {
        let fronts_ratio: f64 = if self.dimension == 2 { 4.0 } else { 8.0 };
        (1..=self.levels)
            .map(|k| {
                fronts_ratio.powi((self.levels - k) as i32) * self.front_size(k).powi(power)
            })
            .sum()
    }

    /// Exact model factorization cost: sum over levels of
    /// (#fronts) x (front size)^3.
    pub fn factor_cost(&self) -> f64 {
        self.level_sum(3)
    }

    /// Exact model memory (and back-solve) cost: sum over levels of
    /// (#fronts) x (front size)^2.
    pub fn memory_cost(&self) -> f64 {
        self.level_sum(2)
    }

    /// Closed-form asymptote of [`Self::factor_cost`].
    ///
    /// For ML/EML the bound replaces every `alpha_k` by `alpha_N`, so it
    /// is exact for ML and an over-estimate for EML that tightens as the
    /// leading term dominates.
    pub fn factor_closed_form(&self) -> f64 {
        let q0 = self.q0();
        let nt = self.n_elements();
        let a = self.alpha(self.levels);
        match (self.schedule, self.dimension) {
            (Schedule::Nd, 2) => 16.0 * q0.powi(3) * nt.powf(1.5) * (1.0 - 1.0 / nt.sqrt()),
            (Schedule::Nd, 3) => {
                (1728.0 / 56.0) * q0.powi(3) * nt * nt * (1.0 - 1.0 / nt)
            }
            (_, 2) => {
                64.0 * q0.powi(3) * (0.25 * (1.0 + a.powi(3) / 3.0) * nt - a.powi(3) / 3.0)
            }
            (_, 3) => {
                1728.0 * q0.powi(3) * (0.125 * (1.0 + a.powi(3) / 7.0) * nt - a.powi(3) / 7.0)
            }
            _ => panic!("dimension must be 2 or 3"),
        }
    }

    /// Closed-form asymptote of [`Self::memory_cost`].
    ///
    /// The 2D ND constant is 2 (the sum evaluates exactly to
    /// `2 q0^2 N_T log2 N_T`); reported analyses sometimes quote a larger
    /// constant for the same O-form.
    pub fn memory_closed_form(&self) -> f64 {
        let q0 = self.q0();
        let nt = self.n_elements();
        let a = self.alpha(self.levels);
        match (self.schedule, self.dimension) {
            (Schedule::Nd, 2) => 2.0 * q0 * q0 * nt * nt.log2(),
            (Schedule::Nd, 3) => 18.0 * q0 * q0 * nt.powf(4.0 / 3.0) * (1.0 - nt.powf(-1.0 / 3.0)),
            (_, 2) => 16.0 * q0 * q0 * (0.25 * (1.0 + a * a / 3.0) * nt - a * a / 3.0),
            (_, 3) => 144.0 * q0 * q0 * (0.125 * (1.0 + a * a / 7.0) * nt - a * a / 7.0),
            _ => panic!("dimension must be 2 or 3"),
        }
    }
}

/// One row of a model complexity table.
#[derive(Debug, Clone, Serialize)]
pub struct CostRow {
    pub levels: usize,
    pub n_elements: f64,
    pub factor_sum: f64,
    pub factor_closed: f64,
    pub memory_sum: f64,
    pub memory_closed: f64,
}

/// Tabulates exact sums and closed forms over a range of levels.
pub fn cost_table(
    dimension: usize,
    order: usize,
    schedule: Schedule,
    levels: impl IntoIterator<Item = usize>,
) -> Vec<CostRow> {
    levels
        .into_iter()
        .map(|n| {
            let m = CostModel { dimension, levels: n, order, schedule };
            CostRow {
                levels: n,
                n_elements: m.n_elements(),
                factor_sum: m.factor_cost(),
                factor_closed: m.factor_closed_form(),
                memory_sum: m.memory_cost(),
                memory_closed: m.memory_closed_form(),
            }
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Measured counters plotted against `N_T` should show slope ~1 for
/// ML/EML factor cost and ~3/2 for 2D ND factor cost.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "need at least two points for a slope");
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
