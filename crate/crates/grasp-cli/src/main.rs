//! Command-line driver: single solves, parameter sweeps, synthetic data
//! generation, and restricted-conditioning certificates.
//!
//! Exit codes: 0 on success, 2 on usage or input errors (bad flags, unknown
//! methods, malformed files, dimension mismatches), 3 when the solver
//! diverges.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grasp::analysis::{estimate_srh_with, EstimateMode, EstimatorOptions};
use grasp::data::{
    fmt_f64, gen_dataset, read_dataset, read_regression_dataset, trial_rng, write_dataset,
    write_parameter, GenConfig,
};
use grasp::objective::{Dataset, LogisticLoss, Objective, SquaredError};
use grasp::solver::{grasp_solve, logit_omp, GraspOptions, SolverReport, Variant};
use grasp::sweep::{
    run_sweep, summarize, write_summary_csv, write_timing_csv, write_trial_csv, EtaRule, Method,
    SweepConfig,
};
use grasp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "grasp",
    about = "Greedy sparsity-constrained minimization of smooth losses",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one sparsity-constrained problem on a dataset file.
    Solve(SolveArgs),
    /// Run a seeded sweep over sample counts and feature correlations.
    Sweep(SweepArgs),
    /// Generate a synthetic logistic-model dataset and its true parameter.
    GenData(GenDataArgs),
    /// Estimate restricted-Hessian conditioning of a dataset objective.
    CertifySrh(CertifySrhArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    Logistic,
    SquaredError,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct SolveArgs {
    /// Dataset CSV (header y,x1,...,xp).
    #[arg(long)]
    data: PathBuf,
    /// Loss the labels are fit with.
    #[arg(long, value_enum, default_value = "logistic")]
    objective: ObjectiveKind,
    #[arg(long, value_parser = parse_method, default_value = "grasp")]
    method: Method,
    /// Target number of nonzeros.
    #[arg(long)]
    sparsity: usize,
    /// Ridge coefficient for the *_l2 methods; defaults to 0.2*sqrt(ln p / n).
    #[arg(long)]
    eta: Option<f64>,
    /// Step size for the gradient-step variant.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Relative iterate-change tolerance of the outer loop.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Fit an intercept (exempt from the sparsity budget).
    #[arg(long)]
    intercept: bool,
    /// Expected feature dimension; rejected if the file disagrees.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; writes <out>.trace.csv and <out>.estimate.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    sparsity: usize,
    /// Comma-separated sample counts.
    #[arg(long, default_value = "20,40,60,80,100,120,140,160,180,200")]
    n_grid: String,
    /// Comma-separated correlations in [0, 1].
    #[arg(long, default_value = "0,0.3333333333333333,0.5,0.7071067811865476")]
    rho_grid: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Comma-separated method names.
    #[arg(
        long,
        default_value = "grasp,grasp_l2,grasp_debias,grasp_l2_debias,grasp_iht,logit_omp"
    )]
    methods: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed ridge coefficient; defaults to the 0.2*sqrt(ln p / n) rule.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Generate data without an intercept.
    #[arg(long)]
    no_intercept: bool,
    /// Also write wall-clock timings to <out stem>.timing.csv.
    #[arg(long)]
    timing: bool,
    /// Trial CSV path; the summary lands next to it as <stem>.summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    sparsity: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    intercept: bool,
    /// Dataset CSV path; the parameter file lands at <stem>.params.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CertifySrhArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "logistic")]
    objective: ObjectiveKind,
    /// Ridge coefficient added to the logistic loss (omit for none).
    #[arg(long)]
    eta: Option<f64>,
    /// Sparsity order of the conditioning constant.
    #[arg(long)]
    k: usize,
    /// Monte Carlo point trials when enumeration is infeasible.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    /// Enumerate all index sets when C(p, k) is at most this.
    #[arg(long, default_value_t = 20_000)]
    exhaustive_cap: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    intercept: bool,
    /// Optional one-row CSV with the estimate.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::GenData(args) => run_gen_data(args),
        Command::CertifySrh(args) => run_certify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn load_dataset(path: &Path, objective: ObjectiveKind, intercept: bool) -> Result<Dataset> {
    let ds = match objective {
        ObjectiveKind::Logistic => read_dataset(path)?,
        ObjectiveKind::SquaredError => read_regression_dataset(path)?,
    };
    Ok(ds.with_intercept(intercept))
}

fn build_objective(
    ds: &Dataset,
    objective: ObjectiveKind,
    method: Method,
    eta: Option<f64>,
) -> Result<Box<dyn Objective>> {
    let wants_l2 = matches!(method, Method::GraspL2 | Method::GraspL2Debias);
    match objective {
        ObjectiveKind::SquaredError => {
            if wants_l2 {
                return Err(Error::InvalidArgument(
                    "the *_l2 methods apply to the logistic objective only".into(),
                ));
            }
            Ok(Box::new(SquaredError::from_dataset(ds)?))
        }
        ObjectiveKind::Logistic => {
            if wants_l2 {
                let eta =
                    eta.unwrap_or_else(|| EtaRule::Adaptive.eta(ds.n_features(), ds.n_samples()));
                Ok(Box::new(LogisticLoss::l2(ds, eta)?))
            } else {
                Ok(Box::new(LogisticLoss::new(ds)?))
            }
        }
    }
}

fn render_trace(report: &SolverReport) -> String {
    let mut out = String::from(
        "iter,loss,restricted_grad_norm,iterate_change,inner_iterations,hessian_fallback,support\n",
    );
    for (i, rec) in report.iterations.iter().enumerate() {
        let support = rec
            .support
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i,
            fmt_f64(rec.loss),
            fmt_f64(rec.restricted_grad_norm),
            fmt_f64(rec.iterate_change),
            rec.inner_iterations,
            rec.hessian_fallback,
            support,
        )
        .expect("string write");
    }
    out
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let ds = load_dataset(&args.data, args.objective, args.intercept)?;
    if let Some(expected) = args.p {
        if ds.n_features() != expected {
            return Err(Error::InvalidArgument(format!(
                "dataset has p = {}, but --p {} was given",
                ds.n_features(),
                expected
            )));
        }
    }

    let obj = build_objective(&ds, args.objective, args.method, args.eta)?;
    let mut opts = GraspOptions::new(args.sparsity);
    opts.max_outer_iters = args.max_iters;
    opts.iterate_tol = args.tol;
    match args.method {
        Method::GraspDebias | Method::GraspL2Debias => opts.debias = true,
        Method::GraspIht => opts.variant = Variant::GradientStep { kappa: args.kappa },
        _ => {}
    }

    let report = match args.method {
        Method::LogitOmp => logit_omp(obj.as_ref(), args.sparsity)?,
        _ => grasp_solve(obj.as_ref(), &opts)?,
    };

    let trace_path = with_suffix(&args.out, ".trace.csv");
    std::fs::write(&trace_path, render_trace(&report)).map_err(|e| Error::Io {
        path: trace_path.display().to_string(),
        source: e,
    })?;

    let estimate_path = with_suffix(&args.out, ".estimate.csv");
    let (free, c) = match obj.intercept_index() {
        Some(idx) => (
            report.estimate.rows(0, idx).into_owned(),
            report.estimate[idx],
        ),
        None => (report.estimate.clone(), 0.0),
    };
    write_parameter(&estimate_path, &free, c)?;

    println!(
        "termination: {:?}; iterations: {}; loss: {}",
        report.termination,
        report.outer_iterations(),
        report
            .final_loss()
            .map(fmt_f64)
            .unwrap_or_else(|| "n/a".into()),
    );
    println!("trace: {}", trace_path.display());
    println!("estimate: {}", estimate_path.display());
    Ok(())
}

fn parse_grid<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn run_sweep_cmd(args: SweepArgs) -> Result<()> {
    let methods = parse_grid::<String>(&args.methods, "method")?
        .iter()
        .map(|name| Method::parse(name))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SweepConfig {
        p: args.p,
        s: args.sparsity,
        n_grid: parse_grid(&args.n_grid, "n-grid")?,
        rho_grid: parse_grid(&args.rho_grid, "rho-grid")?,
        trials: args.trials,
        methods,
        seed: args.seed,
        eta_rule: args.eta.map_or(EtaRule::Adaptive, EtaRule::Fixed),
        kappa: args.kappa,
        intercept: !args.no_intercept,
        max_outer_iters: args.max_iters,
    };
    let rows = run_sweep(&cfg)?;
    write_trial_csv(&args.out, &rows)?;
    let summary_path = with_suffix(&args.out, ".summary.csv");
    write_summary_csv(&summary_path, &summarize(&rows))?;
    if args.timing {
        let timing_path = with_suffix(&args.out, ".timing.csv");
        write_timing_csv(&timing_path, &rows)?;
    }
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "wrote {} rows ({} failed) to {}",
        rows.len(),
        failures,
        args.out.display()
    );
    println!("summary: {}", summary_path.display());
    Ok(())
}

fn run_gen_data(args: GenDataArgs) -> Result<()> {
    let cfg = GenConfig {
        p: args.p,
        s: args.sparsity,
        rho: args.rho,
        n: args.n,
        seed: args.seed,
        intercept: args.intercept,
    };
    let (ds, x_star, c) = gen_dataset(&cfg)?;
    write_dataset(&args.out, &ds)?;
    let params_path = with_suffix(&args.out, ".params.csv");
    write_parameter(&params_path, &x_star, c)?;
    println!("dataset: {}", args.out.display());
    println!("parameter: {}", params_path.display());
    Ok(())
}

fn run_certify(args: CertifySrhArgs) -> Result<()> {
    let ds = load_dataset(&args.data, args.objective, args.intercept)?;
    let obj: Box<dyn Objective> = match (args.objective, args.eta) {
        (ObjectiveKind::SquaredError, None) => Box::new(SquaredError::from_dataset(&ds)?),
        (ObjectiveKind::SquaredError, Some(_)) => {
            return Err(Error::InvalidArgument(
                "--eta applies to the logistic objective only".into(),
            ))
        }
        (ObjectiveKind::Logistic, None) => Box::new(LogisticLoss::new(&ds)?),
        (ObjectiveKind::Logistic, Some(eta)) => Box::new(LogisticLoss::l2(&ds, eta)?),
    };

    let opts = EstimatorOptions {
        exhaustive_cap: args.exhaustive_cap,
        ..EstimatorOptions::default()
    };
    let mut rng = trial_rng(args.seed, 0);
    let est = estimate_srh_with(obj.as_ref(), args.k, args.budget, &opts, &mut rng)?;

    let mode = match est.mode {
        EstimateMode::Exhaustive => "exhaustive".to_string(),
        EstimateMode::Sampled { trials } => format!("sampled({trials})"),
    };
    println!("k: {}", est.k);
    println!("mode: {mode}");
    println!("valid: {}", est.valid);
    println!("b_min: {}", fmt_f64(est.b_min));
    println!("a_max: {}", fmt_f64(est.a_max));
    println!("mu_k: {}", fmt_f64(est.mu_k));
    if !est.valid {
        println!("note: non-positive restricted curvature observed; the objective is not convex on these sparse subspaces");
    }

    if let Some(out) = args.out {
        let mut text = String::from("k,mode,valid,b_min,a_max,mu_k\n");
        writeln!(
            text,
            "{},{},{},{},{},{}",
            est.k,
            mode,
            est.valid,
            fmt_f64(est.b_min),
            fmt_f64(est.a_max),
            fmt_f64(est.mu_k)
        )
        .expect("string write");
        std::fs::write(&out, text).map_err(|e| Error::Io {
            path: out.display().to_string(),
            source: e,
        })?;
        println!("certificate: {}", out.display());
    }
    Ok(())
}
