//! Gradient support pursuit and its variants.
//!
//! One outer iteration evaluates the gradient at the current `s`-sparse
//! iterate, selects the `2s` coordinates where it is largest in magnitude,
//! merges them with the current support, computes an intermediate estimate on
//! the merged support, and prunes back to `s` nonzeros. The intermediate
//! estimate is either the restricted minimizer (the default), a restricted
//! Newton step, or a restricted gradient step; optional debiasing re-minimizes
//! over the pruned support.
//!
//! The restricted minimizer is a damped Newton method with Armijo
//! backtracking (parameter `1e-4`, backtrack factor `0.5`), falling back to a
//! gradient step whenever the restricted Hessian solve fails. Newton is exact
//! on quadratics, which is what makes the squared-error specialization
//! reproduce CoSaMP's pseudoinverse step. The outer loop halts on small
//! relative iterate change, an iteration cap, or two consecutive loss
//! increases, and the report keeps the best-loss pruned iterate seen.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::objective::Objective;
use crate::sparse::{restrict, support, top_k_support, DenseVector, SupportSet};
use crate::{Error, Result};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// How the intermediate estimate over the merged support is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// Minimize the objective restricted to the merged support.
    FullMinimize,
    /// Single damped Newton step of length `kappa`.
    NewtonStep { kappa: f64, target: NewtonTarget },
    /// Single gradient step. `None` picks the step size as the reciprocal of
    /// a power-iteration estimate of the restricted Hessian's largest
    /// eigenvalue.
    GradientStep { kappa: Option<f64> },
}

/// What the inverse restricted Hessian is applied to in the Newton variant.
///
/// `Gradient` is the ordinary Newton step. `Iterate` applies the inverse to
/// the current iterate instead; it does not fix stationary points and exists
/// only for comparison experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonTarget {
    Gradient,
    Iterate,
}

/// Solver configuration. `sparsity` is the target number of nonzeros, not
/// counting an intercept coordinate when the objective has one.
#[derive(Debug, Clone)]
pub struct GraspOptions {
    pub sparsity: usize,
    pub max_outer_iters: usize,
    /// Relative iterate-change threshold for the halting test.
    pub iterate_tol: f64,
    /// Restricted gradient-norm tolerance of the inner minimizer.
    pub inner_grad_tol: f64,
    pub inner_max_iters: usize,
    pub variant: Variant,
    /// Re-minimize over the pruned support after each hard threshold.
    pub debias: bool,
}

impl GraspOptions {
    pub fn new(sparsity: usize) -> Self {
        GraspOptions {
            sparsity,
            max_outer_iters: 100,
            iterate_tol: 1e-7,
            inner_grad_tol: 1e-8,
            inner_max_iters: 100,
            variant: Variant::FullMinimize,
            debias: false,
        }
    }

    fn validate(&self, obj: &dyn Objective) -> Result<()> {
        if self.sparsity < 1 {
            return Err(Error::invalid("sparsity must be at least 1"));
        }
        if self.sparsity > free_dim(obj) {
            return Err(Error::invalid(format!(
                "sparsity {} exceeds the {} selectable coordinates",
                self.sparsity,
                free_dim(obj)
            )));
        }
        if !(self.iterate_tol.is_finite() && self.iterate_tol > 0.0)
            || !(self.inner_grad_tol.is_finite() && self.inner_grad_tol > 0.0)
        {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if let Variant::NewtonStep { kappa, .. } = self.variant {
            if kappa.is_nan() || kappa < 0.0 {
                return Err(Error::invalid("kappa must be nonnegative"));
            }
        }
        if let Variant::GradientStep { kappa: Some(k) } = self.variant {
            if k.is_nan() || k < 0.0 {
                return Err(Error::invalid("kappa must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Number of coordinates that count toward the sparsity budget.
fn free_dim(obj: &dyn Objective) -> usize {
    obj.dim() - usize::from(obj.intercept_index().is_some())
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative iterate change fell below `iterate_tol`.
    Converged,
    MaxIterations,
    /// Loss increased on two consecutive iterations.
    LossStalled,
}

/// Per-iteration trace entry.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Loss at the pruned (and debiased, if enabled) iterate.
    pub loss: f64,
    /// Restricted gradient norm reported by the inner step.
    pub restricted_grad_norm: f64,
    /// Coordinates selected from the gradient (`Z`).
    pub selected: SupportSet,
    /// Merged support the intermediate estimate lives on (`T`).
    pub merged: SupportSet,
    /// Support after pruning.
    pub support: SupportSet,
    /// Euclidean norm of the iterate change.
    pub iterate_change: f64,
    pub inner_iterations: usize,
    /// The restricted Hessian solve failed and a gradient direction was used.
    pub hessian_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Best-loss pruned iterate observed over the run.
    pub estimate: DenseVector,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Set when `3 * sparsity` reaches the full dimension, in which case the
    /// merged support can be the whole space.
    pub support_saturated: bool,
}

impl SolverReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.loss)
    }

    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }
}

/// Outcome of a single pursuit iteration.
#[derive(Debug, Clone)]
pub struct GraspIteration {
    pub next: DenseVector,
    pub selected: SupportSet,
    pub merged: SupportSet,
    pub pruned_support: SupportSet,
    pub restricted_grad_norm: f64,
    pub inner_iterations: usize,
    pub hessian_fallback: bool,
}

fn gather(v: &DenseVector, s: &SupportSet) -> DVector<f64> {
    DVector::from_fn(s.len(), |j, _| v[s.indices()[j]])
}

fn scatter(small: &DVector<f64>, s: &SupportSet, dim: usize) -> DenseVector {
    let mut out = DenseVector::zeros(dim);
    for (j, &i) in s.indices().iter().enumerate() {
        out[i] = small[j];
    }
    out
}

/// Top-`k` magnitude selection that skips the intercept coordinate; the
/// intercept is appended to the result so every formed support keeps it.
fn select_top(v: &DenseVector, k: usize, intercept: Option<usize>) -> Result<SupportSet> {
    match intercept {
        None => top_k_support(v, k.min(v.len())),
        Some(idx) => {
            let mut masked = v.clone();
            masked[idx] = 0.0;
            let mut set = top_k_support(&masked, k.min(v.len().saturating_sub(1)))?;
            set.insert(idx);
            Ok(set)
        }
    }
}

/// Hard threshold to `s` nonzeros, keeping the intercept coordinate intact.
fn prune(b: &DenseVector, s: usize, intercept: Option<usize>) -> Result<(DenseVector, SupportSet)> {
    let keep = select_top(b, s, intercept)?;
    Ok((restrict(b, &keep)?, keep))
}

struct InnerOutcome {
    x: DenseVector,
    restricted_grad_norm: f64,
    iterations: usize,
    hessian_fallback: bool,
}

fn diverged(reason: impl Into<String>) -> Error {
    Error::Diverged {
        reason: reason.into(),
        report: None,
    }
}

/// Damped Newton with Armijo backtracking over the coordinates in `t`.
/// The iterate never leaves the span of `t` and the loss never increases.
fn minimize_over_support(
    obj: &dyn Objective,
    t: &SupportSet,
    x0: DenseVector,
    grad_tol: f64,
    max_iters: usize,
) -> Result<InnerOutcome> {
    let mut x = x0;
    let mut loss = obj.value(&x)?;
    if !loss.is_finite() {
        return Err(diverged(format!("non-finite loss {loss} at inner start")));
    }
    let mut fallback = false;
    let mut iterations = 0;
    loop {
        let g_full = obj.gradient(&x)?;
        let g_t = gather(&g_full, t);
        let grad_norm = g_t.norm();
        if !grad_norm.is_finite() {
            return Err(diverged("non-finite gradient in inner solver"));
        }
        if grad_norm <= grad_tol || iterations >= max_iters || t.is_empty() {
            return Ok(InnerOutcome {
                x,
                restricted_grad_norm: grad_norm,
                iterations,
                hessian_fallback: fallback,
            });
        }

        let h = obj.restricted_hessian(&x, t)?;
        let (mut dir, mut used_fallback) = match Cholesky::new(h) {
            Some(ch) => (ch.solve(&(-&g_t)), false),
            None => (-g_t.clone(), true),
        };
        let mut slope = g_t.dot(&dir);
        if slope.is_nan() || slope >= 0.0 || dir.iter().any(|d| !d.is_finite()) {
            // Not a descent direction; retreat to steepest descent.
            dir = -g_t.clone();
            slope = -grad_norm * grad_norm;
            used_fallback = true;
        }
        fallback |= used_fallback;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand = &x + scatter(&(&dir * step), t, x.len());
            let cand_loss = obj.value(&cand)?;
            if cand_loss.is_finite() && cand_loss <= loss + ARMIJO_C * step * slope {
                x = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= BACKTRACK;
        }
        iterations += 1;
        if !accepted {
            // No admissible step; x is unchanged so monotonicity holds.
            let grad_norm = gather(&obj.gradient(&x)?, t).norm();
            return Ok(InnerOutcome {
                x,
                restricted_grad_norm: grad_norm,
                iterations,
                hessian_fallback: fallback,
            });
        }
    }
}

/// Minimizes the objective over the coordinates in `t`, starting from `x0`
/// (which must be supported on `t`). Returns the minimizer; its restricted
/// gradient norm is below `grad_tol` unless the iteration cap was hit.
pub fn restricted_minimize(
    obj: &dyn Objective,
    t: &SupportSet,
    x0: &DenseVector,
    grad_tol: f64,
    max_iters: usize,
) -> Result<DenseVector> {
    if x0.len() != obj.dim() {
        return Err(Error::invalid(format!(
            "start point has dimension {}, objective expects {}",
            x0.len(),
            obj.dim()
        )));
    }
    if !support(x0).is_subset_of(t) {
        return Err(Error::invalid(
            "start point must be supported on the restriction set",
        ));
    }
    Ok(minimize_over_support(obj, t, x0.clone(), grad_tol, max_iters)?.x)
}

/// Estimates the largest eigenvalue of a symmetric matrix by power iteration
/// from a deterministic start vector.
fn largest_eigenvalue_estimate(h: &DMatrix<f64>) -> f64 {
    let m = h.nrows();
    if m == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    for _ in 0..50 {
        let w = h * &v;
        let n = w.norm();
        if n < 1e-300 {
            return 0.0;
        }
        v = w / n;
    }
    v.dot(&(h * &v))
}

/// Computes the intermediate estimate on `t` for the Newton and gradient
/// variants. The estimate is zero off `t`.
pub fn variant_step(
    obj: &dyn Objective,
    x_hat: &DenseVector,
    t: &SupportSet,
    opts: &GraspOptions,
) -> Result<DenseVector> {
    let step = variant_step_detailed(obj, x_hat, t, opts)?;
    Ok(step.0)
}

fn variant_step_detailed(
    obj: &dyn Objective,
    x_hat: &DenseVector,
    t: &SupportSet,
    opts: &GraspOptions,
) -> Result<(DenseVector, f64, bool)> {
    let g_t = gather(&obj.gradient(x_hat)?, t);
    let x_t = gather(x_hat, t);
    let grad_norm = g_t.norm();
    match opts.variant {
        Variant::FullMinimize => Err(Error::invalid(
            "variant_step is only defined for the Newton and gradient variants",
        )),
        Variant::GradientStep { kappa } => {
            let kappa = match kappa {
                Some(k) => k,
                None => {
                    let top = largest_eigenvalue_estimate(&obj.restricted_hessian(x_hat, t)?);
                    if top > 1e-12 {
                        1.0 / top
                    } else {
                        1.0
                    }
                }
            };
            let b_t = &x_t - &g_t * kappa;
            Ok((scatter(&b_t, t, x_hat.len()), grad_norm, false))
        }
        Variant::NewtonStep { kappa, target } => {
            let h = obj.restricted_hessian(x_hat, t)?;
            let rhs = match target {
                NewtonTarget::Gradient => &g_t,
                NewtonTarget::Iterate => &x_t,
            };
            match Cholesky::new(h.clone()) {
                Some(ch) => {
                    let d = ch.solve(rhs);
                    let b_t = &x_t - &d * kappa;
                    Ok((scatter(&b_t, t, x_hat.len()), grad_norm, false))
                }
                None => {
                    // Singular restricted Hessian: gradient step instead.
                    let top = largest_eigenvalue_estimate(&h);
                    let k = if top > 1e-12 { 1.0 / top } else { kappa };
                    let b_t = &x_t - &g_t * k;
                    Ok((scatter(&b_t, t, x_hat.len()), grad_norm, true))
                }
            }
        }
    }
}

/// One pursuit iteration from `x_hat`, returning the selection, merge, and
/// prune details alongside the next iterate.
pub fn grasp_iterate_detailed(
    obj: &dyn Objective,
    x_hat: &DenseVector,
    opts: &GraspOptions,
) -> Result<GraspIteration> {
    opts.validate(obj)?;
    if x_hat.len() != obj.dim() {
        return Err(Error::invalid(format!(
            "iterate has dimension {}, objective expects {}",
            x_hat.len(),
            obj.dim()
        )));
    }
    let intercept = obj.intercept_index();
    let carried = support(x_hat);
    let carried_count = carried.len() - usize::from(intercept.is_some_and(|i| carried.contains(i)));
    if carried_count > opts.sparsity {
        return Err(Error::invalid(format!(
            "iterate has {carried_count} nonzeros, more than the sparsity budget {}",
            opts.sparsity
        )));
    }

    let z = obj.gradient(x_hat)?;
    let selected = select_top(&z, 2 * opts.sparsity, intercept)?;
    let mut merged = selected.union(&carried);
    if let Some(idx) = intercept {
        merged.insert(idx);
    }

    let (b, grad_norm, inner_iters, fallback) = match opts.variant {
        Variant::FullMinimize => {
            let warm = restrict(x_hat, &merged)?;
            let out = minimize_over_support(
                obj,
                &merged,
                warm,
                opts.inner_grad_tol,
                opts.inner_max_iters,
            )?;
            (
                out.x,
                out.restricted_grad_norm,
                out.iterations,
                out.hessian_fallback,
            )
        }
        _ => {
            let (b, grad_norm, fallback) = variant_step_detailed(obj, x_hat, &merged, opts)?;
            (b, grad_norm, 1, fallback)
        }
    };

    let (mut next, pruned_support) = prune(&b, opts.sparsity, intercept)?;
    let mut inner_iters = inner_iters;
    if opts.debias {
        let out = minimize_over_support(
            obj,
            &pruned_support,
            next,
            opts.inner_grad_tol,
            opts.inner_max_iters,
        )?;
        next = out.x;
        inner_iters += out.iterations;
    }

    Ok(GraspIteration {
        next,
        selected,
        merged,
        pruned_support,
        restricted_grad_norm: grad_norm,
        inner_iterations: inner_iters,
        hessian_fallback: fallback,
    })
}

/// One pursuit iteration; returns just the next iterate.
pub fn grasp_iterate(
    obj: &dyn Objective,
    x_hat: &DenseVector,
    opts: &GraspOptions,
) -> Result<DenseVector> {
    Ok(grasp_iterate_detailed(obj, x_hat, opts)?.next)
}

/// Runs the pursuit from the zero vector until the halting condition holds.
///
/// On divergence (non-finite loss) the error carries the partial report with
/// the last valid iterate as its estimate.
pub fn grasp_solve(obj: &dyn Objective, opts: &GraspOptions) -> Result<SolverReport> {
    opts.validate(obj)?;
    let support_saturated = 3 * opts.sparsity >= free_dim(obj);
    let mut x = DenseVector::zeros(obj.dim());
    let mut prev_loss = obj.value(&x)?;
    if !prev_loss.is_finite() {
        return Err(diverged(format!("loss at the zero vector is {prev_loss}")));
    }

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_x = x.clone();
    let mut consecutive_increases = 0usize;
    let mut termination = Termination::MaxIterations;

    let partial = |records: &[IterationRecord], best_x: &DenseVector| SolverReport {
        estimate: best_x.clone(),
        iterations: records.to_vec(),
        termination: Termination::MaxIterations,
        support_saturated,
    };

    for _ in 0..opts.max_outer_iters {
        let it = match grasp_iterate_detailed(obj, &x, opts) {
            Ok(it) => it,
            Err(Error::Diverged { reason, .. }) => {
                return Err(Error::Diverged {
                    reason,
                    report: Some(Box::new(partial(&records, &best_x))),
                });
            }
            Err(e) => return Err(e),
        };
        let loss = obj.value(&it.next)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                reason: format!("loss became {loss} after pruning"),
                report: Some(Box::new(partial(&records, &best_x))),
            });
        }

        let change = (&it.next - &x).norm();
        let scale = x.norm().max(it.next.norm()).max(1e-12);
        records.push(IterationRecord {
            loss,
            restricted_grad_norm: it.restricted_grad_norm,
            selected: it.selected,
            merged: it.merged,
            support: it.pruned_support,
            iterate_change: change,
            inner_iterations: it.inner_iterations,
            hessian_fallback: it.hessian_fallback,
        });

        if loss < best_loss {
            best_loss = loss;
            best_x = it.next.clone();
        }
        if loss > prev_loss {
            consecutive_increases += 1;
        } else {
            consecutive_increases = 0;
        }
        x = it.next;
        prev_loss = loss;

        if change / scale < opts.iterate_tol {
            termination = Termination::Converged;
            break;
        }
        if consecutive_increases >= 2 {
            termination = Termination::LossStalled;
            break;
        }
    }

    Ok(SolverReport {
        estimate: best_x,
        iterations: records,
        termination,
        support_saturated,
    })
}

/// Forward-selection baseline: grow the support one coordinate at a time by
/// largest gradient magnitude, re-minimizing after each addition.
pub fn logit_omp(obj: &dyn Objective, s: usize) -> Result<SolverReport> {
    let intercept = obj.intercept_index();
    if s > free_dim(obj) {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds the {} selectable coordinates",
            free_dim(obj)
        )));
    }
    let grad_tol = 1e-8;
    let max_iters = 100;

    let mut sup = SupportSet::empty();
    let mut x = DenseVector::zeros(obj.dim());
    let mut records = Vec::new();
    if let Some(idx) = intercept {
        sup.insert(idx);
        let out = minimize_over_support(obj, &sup, x, grad_tol, max_iters)?;
        x = out.x;
    }

    for _ in 0..s {
        let g = obj.gradient(&x)?;
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..g.len() {
            if sup.contains(i) || Some(i) == intercept {
                continue;
            }
            let mag = g[i].abs();
            if pick.is_none_or(|(_, best)| mag > best) {
                pick = Some((i, mag));
            }
        }
        let Some((idx, mag)) = pick else { break };
        if mag == 0.0 {
            break; // Gradient vanishes off-support: nothing left to gain.
        }
        sup.insert(idx);
        let out = minimize_over_support(obj, &sup, x, grad_tol, max_iters)?;
        x = out.x;
        records.push(IterationRecord {
            loss: obj.value(&x)?,
            restricted_grad_norm: out.restricted_grad_norm,
            selected: SupportSet::new(vec![idx]),
            merged: sup.clone(),
            support: support(&x),
            iterate_change: 0.0,
            inner_iterations: out.iterations,
            hessian_fallback: out.hessian_fallback,
        });
    }

    Ok(SolverReport {
        estimate: x,
        iterations: records,
        termination: Termination::Converged,
        support_saturated: false,
    })
}
