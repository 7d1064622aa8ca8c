//! Seeded experiment sweeps over sample counts and feature correlation.
//!
//! One sweep cell is a `(rho, n)` pair; each trial of a cell generates a
//! fresh instance on its own random stream and runs every configured method
//! on the same data. Trials execute in parallel, but rows are buffered and
//! written in `(rho, n, trial, method)` order and all randomness is
//! stream-derived, so the emitted CSV is byte-identical across runs and
//! schedules. Losses are always reported as the plain (unregularized)
//! logistic loss so that regularized and unregularized methods are measured
//! against the same truth line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{fmt_f64, gen_dataset_with, trial_rng, GenConfig};
use crate::objective::{Dataset, LogisticLoss, Objective};
use crate::solver::{grasp_solve, logit_omp, GraspOptions, Variant};
use crate::sparse::{support, DenseVector};
use crate::{Error, Result};

/// The estimators a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Pursuit on the plain logistic loss.
    Grasp,
    /// Pursuit on the ridge-regularized logistic loss.
    GraspL2,
    /// Pursuit with debiasing after each prune.
    GraspDebias,
    GraspL2Debias,
    /// Restricted gradient-step variant (hard-thresholding style updates).
    GraspIht,
    /// Forward-selection baseline.
    LogitOmp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Grasp,
        Method::GraspL2,
        Method::GraspDebias,
        Method::GraspL2Debias,
        Method::GraspIht,
        Method::LogitOmp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Grasp => "grasp",
            Method::GraspL2 => "grasp_l2",
            Method::GraspDebias => "grasp_debias",
            Method::GraspL2Debias => "grasp_l2_debias",
            Method::GraspIht => "grasp_iht",
            Method::LogitOmp => "logit_omp",
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        match name {
            "grasp" => Ok(Method::Grasp),
            "grasp_l2" => Ok(Method::GraspL2),
            "grasp_debias" => Ok(Method::GraspDebias),
            "grasp_l2_debias" => Ok(Method::GraspL2Debias),
            "grasp_iht" => Ok(Method::GraspIht),
            "logit_omp" => Ok(Method::LogitOmp),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }

    fn uses_l2(&self) -> bool {
        matches!(self, Method::GraspL2 | Method::GraspL2Debias)
    }
}

/// How the ridge coefficient is chosen for the regularized methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    Fixed(f64),
    /// `0.2 * sqrt(ln(p) / n)`: decays with the sampling ratio.
    Adaptive,
}

impl EtaRule {
    pub fn eta(&self, p: usize, n: usize) -> f64 {
        match self {
            EtaRule::Fixed(v) => *v,
            EtaRule::Adaptive => 0.2 * ((p as f64).ln() / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub p: usize,
    pub s: usize,
    pub n_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub eta_rule: EtaRule,
    /// Step size for the gradient-step variant; `None` picks it from the
    /// restricted curvature.
    pub kappa: Option<f64>,
    /// Generate and fit an intercept coordinate.
    pub intercept: bool,
    pub max_outer_iters: usize,
}

impl SweepConfig {
    /// Desk-scale defaults: full sweeps finish in minutes rather than hours.
    pub fn desk_scale() -> Self {
        SweepConfig {
            p: 200,
            s: 5,
            n_grid: (1..=10).map(|i| i * 20).collect(),
            rho_grid: vec![0.0, 1.0 / 3.0, 0.5, std::f64::consts::FRAC_1_SQRT_2],
            trials: 20,
            methods: Method::ALL.to_vec(),
            seed: 42,
            eta_rule: EtaRule::Adaptive,
            kappa: None,
            intercept: true,
            max_outer_iters: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.rho_grid.is_empty() {
            return Err(Error::invalid("n and rho grids must be non-empty"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        if self.s < 1 || self.s > self.p {
            return Err(Error::invalid(format!(
                "sparsity {} must lie in [1, {}]",
                self.s, self.p
            )));
        }
        for &rho in &self.rho_grid {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::invalid(format!("rho {rho} outside [0, 1]")));
            }
        }
        for &n in &self.n_grid {
            if n < 1 {
                return Err(Error::invalid("sample counts must be positive"));
            }
        }
        Ok(())
    }
}

/// One method applied to one generated instance.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub rho: f64,
    pub n: usize,
    pub trial: usize,
    pub method: Method,
    pub loss_at_estimate: f64,
    pub loss_at_truth: f64,
    pub relative_error: Option<f64>,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
    pub outer_iterations: usize,
    /// Wall-clock solve time. Kept out of the deterministic CSV; see
    /// [`write_timing_csv`].
    pub wall_time_s: f64,
    /// Failure marker; metric columns are NaN when set.
    pub error: Option<String>,
}

/// Recovery metrics of an estimate against the generating parameter.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub loss_at_estimate: f64,
    pub relative_error: Option<f64>,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
}

/// Computes loss and recovery metrics. The estimate lives in the parameter
/// space of `eval_obj` (which may include an intercept coordinate); `x_star`
/// is intercept-free and the intercept coordinate is excluded from the error
/// norm and the support comparison.
pub fn compute_metrics(
    estimate: &DenseVector,
    x_star: &DenseVector,
    eval_obj: &dyn Objective,
) -> Result<Metrics> {
    if estimate.len() != eval_obj.dim() {
        return Err(Error::invalid(format!(
            "estimate has dimension {}, objective expects {}",
            estimate.len(),
            eval_obj.dim()
        )));
    }
    let free = match eval_obj.intercept_index() {
        Some(idx) => {
            if idx != x_star.len() || estimate.len() != x_star.len() + 1 {
                return Err(Error::invalid(
                    "intercept layout does not match the target parameter",
                ));
            }
            estimate.rows(0, idx).into_owned()
        }
        None => {
            if estimate.len() != x_star.len() {
                return Err(Error::invalid(format!(
                    "estimate has {} coordinates, target has {}",
                    estimate.len(),
                    x_star.len()
                )));
            }
            estimate.clone()
        }
    };

    let truth_norm = x_star.norm();
    let relative_error = if truth_norm > 0.0 {
        Some((&free - x_star).norm() / truth_norm)
    } else {
        None
    };

    let est_support = support(&free);
    let true_support = support(x_star);
    let hits = est_support
        .iter()
        .filter(|&i| true_support.contains(i))
        .count() as f64;
    let support_precision = (!est_support.is_empty()).then(|| hits / est_support.len() as f64);
    let support_recall = (!true_support.is_empty()).then(|| hits / true_support.len() as f64);

    Ok(Metrics {
        loss_at_estimate: eval_obj.value(estimate)?,
        relative_error,
        support_precision,
        support_recall,
    })
}

fn solver_options(method: Method, cfg: &SweepConfig) -> GraspOptions {
    let mut opts = GraspOptions::new(cfg.s);
    opts.max_outer_iters = cfg.max_outer_iters;
    match method {
        Method::GraspDebias | Method::GraspL2Debias => opts.debias = true,
        Method::GraspIht => opts.variant = Variant::GradientStep { kappa: cfg.kappa },
        _ => {}
    }
    opts
}

/// Truth vector in solver coordinates: `x*` with the intercept appended when
/// the model has one.
fn truth_point(x_star: &DenseVector, c: f64, intercept: bool) -> DenseVector {
    if !intercept {
        return x_star.clone();
    }
    let p = x_star.len();
    let mut full = DenseVector::zeros(p + 1);
    full.rows_mut(0, p).copy_from(x_star);
    full[p] = c;
    full
}

fn run_methods_on_instance(
    cfg: &SweepConfig,
    ds: &Dataset,
    x_star: &DenseVector,
    c: f64,
    rho: f64,
    n: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let eval_obj = LogisticLoss::new(ds)?;
    let loss_at_truth = eval_obj.value(&truth_point(x_star, c, cfg.intercept))?;

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let started = Instant::now();
        let solved: Result<(DenseVector, usize)> = (|| {
            let objective: Box<dyn Objective> = if method.uses_l2() {
                let eta = cfg.eta_rule.eta(cfg.p, n);
                Box::new(LogisticLoss::l2(ds, eta)?)
            } else {
                Box::new(LogisticLoss::new(ds)?)
            };
            let report = match method {
                Method::LogitOmp => logit_omp(objective.as_ref(), cfg.s)?,
                _ => grasp_solve(objective.as_ref(), &solver_options(method, cfg))?,
            };
            let outer = report.outer_iterations();
            Ok((report.estimate, outer))
        })();
        let wall_time_s = started.elapsed().as_secs_f64();

        let row = match solved {
            Ok((estimate, outer_iterations)) => {
                let m = compute_metrics(&estimate, x_star, &eval_obj)?;
                TrialRecord {
                    rho,
                    n,
                    trial,
                    method,
                    loss_at_estimate: m.loss_at_estimate,
                    loss_at_truth,
                    relative_error: m.relative_error,
                    support_precision: m.support_precision,
                    support_recall: m.support_recall,
                    outer_iterations,
                    wall_time_s,
                    error: None,
                }
            }
            Err(Error::Diverged { reason, .. }) => TrialRecord {
                rho,
                n,
                trial,
                method,
                loss_at_estimate: f64::NAN,
                loss_at_truth,
                relative_error: None,
                support_precision: None,
                support_recall: None,
                outer_iterations: 0,
                wall_time_s,
                error: Some(reason),
            },
            Err(other) => return Err(other),
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the full sweep and returns one record per
/// `(rho, n, trial, method)`, in that order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
        for (ni, &n) in cfg.n_grid.iter().enumerate() {
            for trial in 0..cfg.trials {
                tasks.push((ri, rho, ni, n, trial));
            }
        }
    }

    let results: Vec<Result<Vec<TrialRecord>>> = tasks
        .par_iter()
        .map(|&(ri, rho, ni, n, trial)| {
            // Stream id mixes the grid position so every cell-trial draws
            // from an independent stream regardless of schedule.
            let stream = ((ri as u64) << 42) ^ ((ni as u64) << 21) ^ trial as u64;
            let mut rng = trial_rng(cfg.seed, stream);
            let gen = GenConfig {
                p: cfg.p,
                s: cfg.s,
                rho,
                n,
                seed: cfg.seed,
                intercept: cfg.intercept,
            };
            let (ds, x_star, c) = gen_dataset_with(&gen, &mut rng)?;
            run_methods_on_instance(cfg, &ds, &x_star, c, rho, n, trial)
        })
        .collect();

    let mut rows = Vec::with_capacity(tasks.len() * cfg.methods.len());
    for chunk in results {
        rows.extend(chunk?);
    }
    // Tasks were laid out in (rho, n, trial) order and each chunk is in
    // method order, so the concatenation is already deterministic.
    Ok(rows)
}

fn opt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "NaN".to_string(),
    }
}

/// Renders records as the deterministic trial CSV.
pub fn render_trial_csv(rows: &[TrialRecord]) -> String {
    let mut out = String::from(
        "rho,n,trial,method,loss_at_estimate,loss_at_truth,relative_error,\
         support_precision,support_recall,outer_iterations,error\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.rho),
            r.n,
            r.trial,
            r.method.name(),
            fmt_f64(r.loss_at_estimate),
            fmt_f64(r.loss_at_truth),
            opt_metric(r.relative_error),
            opt_metric(r.support_precision),
            opt_metric(r.support_recall),
            r.outer_iterations,
            r.error.as_deref().unwrap_or(""),
        )
        .expect("string write");
    }
    out
}

pub fn write_trial_csv(path: impl AsRef<Path>, rows: &[TrialRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_trial_csv(rows)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Wall-time sidecar. Kept separate because timings differ run to run while
/// the trial CSV must not.
pub fn write_timing_csv(path: impl AsRef<Path>, rows: &[TrialRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("rho,n,trial,method,wall_time_s\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.rho),
            r.n,
            r.trial,
            r.method.name(),
            fmt_f64(r.wall_time_s),
        )
        .expect("string write");
    }
    fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Per-cell aggregate of the finished rows.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub rho: f64,
    pub n: usize,
    pub method: Method,
    /// Rows that finished without an error marker.
    pub completed: usize,
    pub failed: usize,
    pub mean_loss_at_estimate: f64,
    pub std_loss_at_estimate: f64,
    pub mean_loss_at_truth: f64,
    pub std_loss_at_truth: f64,
    pub mean_relative_error: f64,
    pub std_relative_error: f64,
    pub mean_support_precision: f64,
    pub mean_support_recall: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Collapses trial rows into per-`(rho, n, method)` aggregates, in first
/// appearance order.
pub fn summarize(rows: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(u64, usize, Method)> = Vec::new();
    let mut groups: Vec<Vec<&TrialRecord>> = Vec::new();
    for r in rows {
        let key = (r.rho.to_bits(), r.n, r.method);
        match order.iter().position(|&k| k == key) {
            Some(idx) => groups[idx].push(r),
            None => {
                order.push(key);
                groups.push(vec![r]);
            }
        }
    }

    groups
        .iter()
        .map(|group| {
            let ok: Vec<&&TrialRecord> = group.iter().filter(|r| r.error.is_none()).collect();
            let losses: Vec<f64> = ok.iter().map(|r| r.loss_at_estimate).collect();
            let truths: Vec<f64> = ok.iter().map(|r| r.loss_at_truth).collect();
            let rel: Vec<f64> = ok.iter().filter_map(|r| r.relative_error).collect();
            let prec: Vec<f64> = ok.iter().filter_map(|r| r.support_precision).collect();
            let rec: Vec<f64> = ok.iter().filter_map(|r| r.support_recall).collect();
            let (mean_loss, std_loss) = mean_std(&losses);
            let (mean_truth, std_truth) = mean_std(&truths);
            let (mean_rel, std_rel) = mean_std(&rel);
            let (mean_prec, _) = mean_std(&prec);
            let (mean_rec, _) = mean_std(&rec);
            let first = group[0];
            SummaryRow {
                rho: first.rho,
                n: first.n,
                method: first.method,
                completed: ok.len(),
                failed: group.len() - ok.len(),
                mean_loss_at_estimate: mean_loss,
                std_loss_at_estimate: std_loss,
                mean_loss_at_truth: mean_truth,
                std_loss_at_truth: std_truth,
                mean_relative_error: mean_rel,
                std_relative_error: std_rel,
                mean_support_precision: mean_prec,
                mean_support_recall: mean_rec,
            }
        })
        .collect()
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "rho,n,method,completed,failed,mean_loss_at_estimate,std_loss_at_estimate,\
         mean_loss_at_truth,std_loss_at_truth,mean_relative_error,std_relative_error,\
         mean_support_precision,mean_support_recall\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.rho),
            r.n,
            r.method.name(),
            r.completed,
            r.failed,
            fmt_f64(r.mean_loss_at_estimate),
            fmt_f64(r.std_loss_at_estimate),
            fmt_f64(r.mean_loss_at_truth),
            fmt_f64(r.std_loss_at_truth),
            fmt_f64(r.mean_relative_error),
            fmt_f64(r.std_relative_error),
            fmt_f64(r.mean_support_precision),
            fmt_f64(r.mean_support_recall),
        )
        .expect("string write");
    }
    out
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_summary_csv(rows)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
