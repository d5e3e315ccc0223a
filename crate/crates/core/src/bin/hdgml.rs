//! Experiment runner: single solves, iteration-count tables, and
//! complexity curves, emitted as Markdown (stdout) and CSV (`--out`).

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hdgml::benchmarks::{make_case, BenchmarkCase, CaseId};
use hdgml::complexity::{cost_table, CostModel, Schedule};
use hdgml::hdg::{l2_error_u, recover_volume, Mode};
use hdgml::run::{run_cell, RunOptions, SolverChoice};

#[derive(Parser)]
#[command(name = "hdgml", about = "Multilevel HDG trace-system solvers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Benchmark case: I, II, III-shock, III-smooth, IV, V, VI.
    #[arg(long, default_value = "I")]
    example: String,
    /// Case parameter (alpha for IV/VI, kappa for V); case default if omitted.
    #[arg(long)]
    param: Option<f64>,
    /// Mesh levels N (n = 2^N elements per side): "4", "2,3,5", or "2..5".
    #[arg(long, default_value = "4")]
    levels: String,
    /// Solution orders p, same syntax as --levels.
    #[arg(long, default_value = "2")]
    orders: String,
    /// Solver: direct-ND, ml, eml, or bjacobi.
    #[arg(long, default_value = "ml")]
    solver: String,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    /// Block-Jacobi pre- and post-smoothing steps in the v-cycle.
    #[arg(long = "smooth-steps", default_value_t = 2)]
    smooth_steps: usize,
    /// Maximum EML enrichment order.
    #[arg(long = "enrich-cap", default_value_t = 10)]
    enrich_cap: usize,
    /// Seed for the Example II permeability field.
    #[arg(long, default_value_t = 2023)]
    seed: u64,
    /// CSV output path (solve: JSON report path).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one (N, p) cell and print the report.
    Solve(CommonArgs),
    /// Iteration-count table over an (N, p) sweep.
    Table(CommonArgs),
    /// Measured and modeled factorization/memory cost curves.
    Complexity(CommonArgs),
    /// Quick end-to-end sanity checks.
    Selftest,
}

fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range '{s}'");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(Into::into))
        .collect()
}

struct Manifest {
    case: BenchmarkCase,
    levels: Vec<usize>,
    orders: Vec<usize>,
    opts: RunOptions,
    out: Option<PathBuf>,
}

impl Manifest {
    fn from_args(args: &CommonArgs) -> Result<Self> {
        let id: CaseId = args.example.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        let case = make_case(id, args.param, args.seed)?;
        let solver: SolverChoice = args.solver.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut opts = RunOptions::new(solver);
        opts.tol = args.tol;
        opts.max_iter = args.max_iter;
        opts.smooth_steps = args.smooth_steps;
        opts.enrich_cap = args.enrich_cap;
        Ok(Self {
            case,
            levels: parse_sweep(&args.levels)?,
            orders: parse_sweep(&args.orders)?,
            opts,
            out: args.out.clone(),
        })
    }
}

fn write_out(path: &Option<PathBuf>, contents: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, contents).with_context(|| format!("writing {}", p.display()))?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_solve(args: &CommonArgs) -> Result<()> {
    let m = Manifest::from_args(args)?;
    let (&levels, &order) = (
        m.levels.first().context("--levels is empty")?,
        m.orders.first().context("--orders is empty")?,
    );
    let mut opts = m.opts;
    opts.compare_direct = opts.solver != SolverChoice::DirectNd;
    let out = run_cell(&m.case, levels, order, &opts)?;
    let mut report = out.report;

    if let Some(exact) = &m.case.exact {
        let coeffs = m.case.coefficients(&out.mesh);
        let sols = recover_volume(&out.mesh, &coeffs, &out.system, &out.lambda)?;
        let l2 = l2_error_u(&out.mesh, &out.system, &sols, exact);
        println!(
            "example {} N={levels} p={order} solver={}: L2(u) error {l2:.6e}",
            m.case.id, opts.solver
        );
    } else {
        println!("example {} N={levels} p={order} solver={}", m.case.id, opts.solver);
    }
    if out.system.mode == Mode::Transport {
        println!("mode: pure transport (inflow data, outflow traces solved)");
    }
    report.residual_history.truncate(report.iterations + 1);
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    write_out(&m.out, &json)
}

/// One table cell following the reporting convention: an iteration count,
/// or `*` (max iterations) with `max|lambda_direct - lambda|` in parens,
/// or `err` if the combination could not be run.
fn cell_text(case: &BenchmarkCase, levels: usize, order: usize, opts: &RunOptions) -> String {
    let mut opts = *opts;
    match run_cell(case, levels, order, &opts) {
        Ok(out) if out.report.converged => format!("{}", out.report.iterations),
        Ok(_) => {
            // retry once with the direct comparison to report the error
            opts.compare_direct = true;
            match run_cell(case, levels, order, &opts) {
                Ok(out) => match out.report.error_vs_direct {
                    Some(e) => format!("*({e:.1e})"),
                    None => "*".to_string(),
                },
                Err(_) => "*".to_string(),
            }
        }
        Err(_) => "err".to_string(),
    }
}

fn cmd_table(args: &CommonArgs) -> Result<()> {
    let m = Manifest::from_args(args)?;
    let mut cells: Vec<Vec<String>> = Vec::new();
    for &n in &m.levels {
        let row = m.orders.iter().map(|&p| cell_text(&m.case, n, p, &m.opts)).collect();
        cells.push(row);
    }

    // Markdown to stdout
    let mut md = String::new();
    writeln!(md, "iterations: example {}, solver {}", m.case.id, m.opts.solver)?;
    write!(md, "| N \\ p |")?;
    for p in &m.orders {
        write!(md, " {p} |")?;
    }
    writeln!(md)?;
    write!(md, "|---|")?;
    for _ in &m.orders {
        write!(md, "---|")?;
    }
    writeln!(md)?;
    for (row, n) in cells.iter().zip(&m.levels) {
        write!(md, "| {n} |")?;
        for c in row {
            write!(md, " {c} |")?;
        }
        writeln!(md)?;
    }
    println!("{md}");

    let mut csv = String::from("example,solver,levels,order,cell\n");
    for (row, n) in cells.iter().zip(&m.levels) {
        for (c, p) in row.iter().zip(&m.orders) {
            writeln!(csv, "{},{},{n},{p},{c}", m.case.id, m.opts.solver)?;
        }
    }
    write_out(&m.out, &csv)
}

fn cmd_complexity(args: &CommonArgs) -> Result<()> {
    let m = Manifest::from_args(args)?;
    let schedule = match m.opts.solver {
        SolverChoice::DirectNd => Schedule::Nd,
        SolverChoice::Ml => Schedule::Ml,
        SolverChoice::Eml => Schedule::Eml { cap: m.opts.enrich_cap },
        SolverChoice::BlockJacobi => bail!("complexity models direct-ND, ml, or eml only"),
    };

    let mut csv = String::from(
        "solver,order,levels,n_elements,measured_factor,measured_memory,\
         model_factor,model_factor_closed,model_memory,model_memory_closed\n",
    );
    let mut md = String::from(
        "| solver | p | N | N_T | measured factor | model factor | closed form |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for &p in &m.orders {
        let rows = cost_table(2, p, schedule, m.levels.iter().copied());
        for (row, &n) in rows.iter().zip(&m.levels) {
            let out = run_cell(&m.case, n, p, &m.opts)?;
            let (mf, mm) = (
                out.report.factor_flops.unwrap_or(f64::NAN),
                out.report.factor_memory.unwrap_or(f64::NAN),
            );
            writeln!(
                csv,
                "{},{p},{n},{},{mf},{mm},{},{},{},{}",
                m.opts.solver,
                row.n_elements,
                row.factor_sum,
                row.factor_closed,
                row.memory_sum,
                row.memory_closed
            )?;
            writeln!(
                md,
                "| {} | {p} | {n} | {} | {mf:.3e} | {:.3e} | {:.3e} |",
                m.opts.solver, row.n_elements, row.factor_sum, row.factor_closed
            )?;
        }
    }
    println!("{md}");
    write_out(&m.out, &csv)
}

fn cmd_selftest() -> Result<()> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}{}", if ok { "PASS" } else { "FAIL" }, detail);
        if !ok {
            failures += 1;
        }
    };

    let case = make_case(CaseId::I, None, 2023)?;
    let direct = run_cell(&case, 3, 2, &RunOptions::new(SolverChoice::DirectNd))?;
    check(
        "direct-ND residual <= 1e-10",
        direct.report.final_true_residual <= 1e-10,
        format!(" (residual {:.2e})", direct.report.final_true_residual),
    );

    for solver in [SolverChoice::Ml, SolverChoice::Eml] {
        let mut opts = RunOptions::new(solver);
        opts.compare_direct = true;
        let out = run_cell(&case, 4, 2, &opts)?;
        let err = out.report.error_vs_direct.unwrap_or(f64::NAN);
        check(
            &format!("{solver} GMRES converges on example I (N=4, p=2)"),
            out.report.converged && err < 1e-6,
            format!(" ({} iterations, error vs direct {err:.2e})", out.report.iterations),
        );
    }

    let shock = make_case(CaseId::IiiShock, None, 2023)?;
    let out = run_cell(&shock, 4, 2, &RunOptions::new(SolverChoice::Eml))?;
    check(
        "EML GMRES converges on transport shock case",
        out.report.converged,
        format!(" ({} iterations)", out.report.iterations),
    );

    let model = CostModel { dimension: 2, levels: 8, order: 2, schedule: Schedule::Nd };
    let gap = (model.factor_cost() - model.factor_closed_form()).abs() / model.factor_cost();
    check("ND cost model matches closed form", gap < 1e-12, format!(" (gap {gap:.2e})"));

    if failures > 0 {
        bail!("{failures} selftest check(s) failed");
    }
    println!("all selftest checks passed");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Table(args) => cmd_table(&args),
        Command::Complexity(args) => cmd_complexity(&args),
        Command::Selftest => cmd_selftest(),
    }
}
