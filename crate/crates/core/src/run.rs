//! Orchestration of single solves: assemble a benchmark case on a mesh,
//! build the requested solver, run it, and fill a [`SolveReport`].
//! Shared by the CLI, the C API, and the acceptance suite.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;

use crate::benchmarks::{error_vs_direct, BenchmarkCase};
use crate::hdg::{assemble_trace_system, TraceSystem};
use crate::krylov::{gmres_solve, BlockJacobiPrecond, GmresConfig, SolveReport};
use crate::mesh::{build_hierarchy, SkeletonHierarchy, StructuredMesh};
use crate::projection::Coarsening;
use crate::solver::{build_vcycle, nd_factor, BlockJacobiSmoother, MlOptions};
use crate::HdgError;

/// Which solver handles the trace system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// Exact nested-dissection block factorization, no iteration.
    DirectNd,
    /// GMRES preconditioned by the ML v-cycle, coarse-solve initial guess.
    Ml,
    /// GMRES preconditioned by the EML v-cycle, coarse-solve initial guess.
    Eml,
    /// GMRES preconditioned by block-Jacobi alone (baseline).
    BlockJacobi,
}

impl FromStr for SolverChoice {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "direct-nd" | "direct" | "nd" => Ok(Self::DirectNd),
            "ml" | "ml-gmres" => Ok(Self::Ml),
            "eml" | "eml-gmres" => Ok(Self::Eml),
            "bjacobi" | "block-jacobi" | "blockjacobi-gmres" => Ok(Self::BlockJacobi),
            other => Err(HdgError::UnknownCase(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DirectNd => "direct-ND",
            Self::Ml => "ML",
            Self::Eml => "EML",
            Self::BlockJacobi => "bjacobi",
        })
    }
}

/// Per-cell solve options beyond the case itself.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub solver: SolverChoice,
    pub tol: f64,
    pub max_iter: usize,
    pub smooth_steps: usize,
    pub enrich_cap: usize,
    /// Also run the ND direct solve and report `max|lambda_direct - lambda|`.
    pub compare_direct: bool,
}

impl RunOptions {
    pub fn new(solver: SolverChoice) -> Self {
        Self {
            solver,
            tol: 1e-9,
            max_iter: 200,
            smooth_steps: 2,
            enrich_cap: 10,
            compare_direct: false,
        }
    }
}

/// Everything a caller may want after one solve.
pub struct RunOutcome {
    pub mesh: StructuredMesh,
    pub hierarchy: SkeletonHierarchy,
    pub system: TraceSystem,
    pub lambda: DVector<f64>,
    pub report: SolveReport,
}

/// Assemble `case` at `levels`/`order` and solve its trace system.
pub fn run_cell(
    case: &BenchmarkCase,
    levels: usize,
    order: usize,
    opts: &RunOptions,
) -> Result<RunOutcome, HdgError> {
    let setup_start = Instant::now();
    let (mesh, hierarchy) = build_hierarchy(levels, case.domain)?;
    let coeffs = case.coefficients(&mesh);
    let system = assemble_trace_system(&mesh, &coeffs, order)?;
    let config = GmresConfig { tol: opts.tol, max_iter: opts.max_iter, ..Default::default() };

    let (lambda, mut report) = match opts.solver {
        SolverChoice::DirectNd => {
            let factor = nd_factor(&hierarchy, &system)?;
            let setup_seconds = setup_start.elapsed().as_secs_f64();
            let solve_start = Instant::now();
            let lambda = factor.solve(&system.rhs);
            let mut report = SolveReport {
                converged: true,
                solve_seconds: solve_start.elapsed().as_secs_f64(),
                setup_seconds,
                factor_flops: Some(factor.counters.factor_flops),
                factor_memory: Some(factor.counters.memory),
                ..Default::default()
            };
            let rhs_norm = system.rhs.norm();
            report.final_true_residual = if rhs_norm > 0.0 {
                (&system.rhs - system.matrix.matvec(&lambda)).norm() / rhs_norm
            } else {
                0.0
            };
            (lambda, report)
        }
        SolverChoice::Ml | SolverChoice::Eml => {
            let coarsening = if opts.solver == SolverChoice::Ml {
                Coarsening::Ml
            } else {
                Coarsening::Eml
            };
            let ml_opts = MlOptions {
                coarsening,
                cap: opts.enrich_cap,
                m1: opts.smooth_steps,
                m2: opts.smooth_steps,
            };
            let pc = build_vcycle(&mesh, &hierarchy, &system, ml_opts)?;
            let setup_seconds = setup_start.elapsed().as_secs_f64();
            let x0 = pc.coarse_correct(&system.rhs);
            let (lambda, mut report) =
                gmres_solve(&system.matrix, &system.rhs, &pc, Some(x0), &config);
            report.setup_seconds = setup_seconds;
            report.factor_flops = Some(pc.coarse.counters.factor_flops);
            report.factor_memory = Some(pc.coarse.counters.memory);
            (lambda, report)
        }
        SolverChoice::BlockJacobi => {
            let smoother = BlockJacobiSmoother::new(&system.matrix)?;
            let pc = BlockJacobiPrecond { a0: system.matrix.clone(), smoother };
            let setup_seconds = setup_start.elapsed().as_secs_f64();
            let (lambda, mut report) =
                gmres_solve(&system.matrix, &system.rhs, &pc, None, &config);
            report.setup_seconds = setup_seconds;
            (lambda, report)
        }
    };

    if opts.compare_direct && opts.solver != SolverChoice::DirectNd {
        let factor = nd_factor(&hierarchy, &system)?;
        let lambda_direct = factor.solve(&system.rhs);
        report.error_vs_direct = Some(error_vs_direct(&lambda, &lambda_direct));
    }

    Ok(RunOutcome { mesh, hierarchy, system, lambda, report })
}
