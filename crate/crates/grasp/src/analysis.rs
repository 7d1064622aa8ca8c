//! Restricted-conditioning diagnostics and closed-form sample bounds.
//!
//! The stable-restricted-Hessian constant bounds the ratio of the largest to
//! smallest curvature of the cost over sparse canonical subspaces; its
//! nonsmooth analogue replaces quadratic forms with restricted Bregman
//! divergence ratios. Both quantify over a continuum of sparse points, so any
//! sampled estimate here is a lower bound on the true constant: a reported
//! violation (non-positive curvature, large ratio) is a certificate, while a
//! small estimate is evidence, never proof.
//!
//! The estimators share one sampling scheme. A point `x` with `j <= k`
//! nonzeros is drawn together with an index set `K` of size `k` containing
//! its support, so the pair satisfies the `|supp(x) ∪ K| <= k` constraint of
//! the definitions; the overlap size `j` is drawn uniformly so both the
//! zero-support and full-support regimes are exercised. Eigenvalue
//! interlacing makes maximal sets `K` sufficient.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::objective::Objective;
use crate::sparse::{restrict, top_k_support, DenseVector, SupportSet};
use crate::{Error, Result};

/// How an estimate explored the space of sparse points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// Every size-`k` index set was enumerated.
    Exhaustive,
    /// Monte Carlo with the recorded number of point trials.
    Sampled { trials: usize },
}

/// Observed extremes of the restricted Hessian over the sampled pairs.
#[derive(Debug, Clone)]
pub struct SrhEstimate {
    pub k: usize,
    /// Smallest restricted eigenvalue seen anywhere.
    pub b_min: f64,
    /// Largest restricted eigenvalue seen anywhere.
    pub a_max: f64,
    /// Largest per-point curvature ratio `A_k(x) / B_k(x)` among points with
    /// positive lower curvature; `NaN` when no such point was seen.
    pub mu_k: f64,
    pub mode: EstimateMode,
    /// False as soon as any non-positive lower curvature is observed.
    pub valid: bool,
}

/// Bregman-divergence analogue of [`SrhEstimate`].
#[derive(Debug, Clone)]
pub struct SrlEstimate {
    pub k: usize,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub mu_k: f64,
    pub mode: EstimateMode,
    pub valid: bool,
}

/// Inputs to the matrix-Chernoff sample bound.
#[derive(Debug, Clone, Copy)]
pub struct ChernoffParams {
    /// Almost-sure bound on `||a|_J||^2` over size-`k` index sets.
    pub r: f64,
    /// Largest restricted eigenvalue of the feature second-moment matrix.
    pub theta_bar: f64,
    /// Smallest (over index sets) largest restricted eigenvalue.
    pub theta_tilde: f64,
    pub tau: f64,
    /// Failure probability, in `(0, 1)`.
    pub eps: f64,
}

impl ChernoffParams {
    fn validate(&self) -> Result<()> {
        if self.r.is_nan() || self.r <= 0.0 {
            return Err(Error::invalid("R must be positive"));
        }
        if self.theta_tilde.is_nan() || self.theta_tilde <= 0.0 || self.theta_tilde > self.theta_bar
        {
            return Err(Error::invalid(
                "theta bounds must satisfy 0 < theta_tilde <= theta_bar",
            ));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("eps must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Tuning knobs for the conditioning estimators.
#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    /// Exhaustive enumeration is used when `C(p, k)` is at most this.
    pub exhaustive_cap: usize,
    /// Index sets sampled per point in Monte Carlo mode.
    pub subsets_per_point: usize,
    /// Gaussian points drawn per support in exhaustive mode.
    pub x_draws_per_support: usize,
    /// Extra random directions probed per pair by the Bregman estimator.
    pub extra_deltas: usize,
    /// Step magnitudes probed by the Bregman estimator.
    pub scales: Vec<f64>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            exhaustive_cap: 20_000,
            subsets_per_point: 4,
            x_draws_per_support: 2,
            extra_deltas: 16,
            scales: vec![1e-2, 1.0, 10.0],
        }
    }
}

/// Smallest and largest eigenvalue of the Hessian restricted to `k_set`,
/// i.e. the extreme curvatures available to perturbations supported there.
pub fn srh_extremes(
    obj: &dyn Objective,
    x: &DenseVector,
    k_set: &SupportSet,
) -> Result<(f64, f64)> {
    let h = obj.restricted_hessian(x, k_set)?;
    eigen_extremes(&h)
}

fn eigen_extremes(h: &DMatrix<f64>) -> Result<(f64, f64)> {
    if h.nrows() == 0 {
        return Err(Error::invalid("empty index set"));
    }
    let asym = (h - h.transpose()).amax();
    if asym > 1e-8 * (1.0 + h.amax()) {
        return Err(Error::Internal(format!(
            "restricted Hessian is asymmetric by {asym}"
        )));
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    Ok((lo, hi))
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Advances `sub` to the next size-`k` subset of `[0, p)` in lexicographic
/// order; returns false after the last one.
fn next_subset(sub: &mut [usize], p: usize) -> bool {
    let k = sub.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if sub[i] < p - k + i {
            sub[i] += 1;
            for j in (i + 1)..k {
                sub[j] = sub[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn gaussian_on(indices: &[usize], dim: usize, rng: &mut impl Rng) -> DenseVector {
    let mut x = DenseVector::zeros(dim);
    for &i in indices {
        x[i] = rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// Uniform random size-`m` subset of the indices not in `exclude`.
fn random_subset_avoiding(p: usize, m: usize, exclude: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..p).filter(|i| !exclude.contains(i)).collect();
    let mut picked = Vec::with_capacity(m);
    let mut remaining = pool.len();
    // Partial Fisher-Yates over the index pool.
    for _ in 0..m {
        let j = rng.random_range(0..remaining);
        picked.push(pool[j]);
        pool.swap(j, remaining - 1);
        remaining -= 1;
    }
    picked
}

struct ExtremeTracker {
    b_min: f64,
    a_max: f64,
    mu: f64,
    saw_ratio: bool,
}

impl ExtremeTracker {
    fn new() -> Self {
        ExtremeTracker {
            b_min: f64::INFINITY,
            a_max: f64::NEG_INFINITY,
            mu: f64::NEG_INFINITY,
            saw_ratio: false,
        }
    }

    fn record_global(&mut self, lo: f64, hi: f64) {
        self.b_min = self.b_min.min(lo);
        self.a_max = self.a_max.max(hi);
    }

    /// Records one per-point ratio from that point's own extremes.
    fn record_point(&mut self, point_lo: f64, point_hi: f64) {
        if point_lo > 0.0 {
            self.mu = self.mu.max(point_hi / point_lo);
            self.saw_ratio = true;
        }
    }

    fn mu_or_nan(&self) -> f64 {
        if self.saw_ratio {
            self.mu
        } else {
            f64::NAN
        }
    }
}

/// Estimates the restricted-Hessian conditioning of `obj` at sparsity `k`.
///
/// When `C(p, k)` is within the exhaustive cap every index set is enumerated,
/// both at the zero vector and at Gaussian points drawn on each support;
/// otherwise `budget` Monte Carlo point trials are run. See the module notes
/// on how to read the result.
pub fn estimate_srh(
    obj: &dyn Objective,
    k: usize,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<SrhEstimate> {
    estimate_srh_with(obj, k, budget, &EstimatorOptions::default(), rng)
}

pub fn estimate_srh_with(
    obj: &dyn Objective,
    k: usize,
    budget: usize,
    opts: &EstimatorOptions,
    rng: &mut impl Rng,
) -> Result<SrhEstimate> {
    let p = obj.dim();
    check_estimator_args(p, k, budget)?;

    let exhaustive = binomial(p, k)
        .map(|c| c <= opts.exhaustive_cap as u128)
        .unwrap_or(false);
    let mut tracker = ExtremeTracker::new();

    if exhaustive {
        let zero = DenseVector::zeros(p);
        // The zero point is compatible with every size-k set, so its ratio
        // combines the global extremes.
        let mut sub: Vec<usize> = (0..k).collect();
        let (mut zero_lo, mut zero_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        loop {
            let set = SupportSet::new(sub.clone());
            let (lo, hi) = srh_extremes(obj, &zero, &set)?;
            zero_lo = zero_lo.min(lo);
            zero_hi = zero_hi.max(hi);
            tracker.record_global(lo, hi);
            if !next_subset(&mut sub, p) {
                break;
            }
        }
        tracker.record_point(zero_lo, zero_hi);

        // Fully supported points: the only compatible maximal set is the
        // support itself.
        let mut sub: Vec<usize> = (0..k).collect();
        loop {
            let set = SupportSet::new(sub.clone());
            for _ in 0..opts.x_draws_per_support {
                let x = gaussian_on(&sub, p, rng);
                let (lo, hi) = srh_extremes(obj, &x, &set)?;
                tracker.record_global(lo, hi);
                tracker.record_point(lo, hi);
            }
            if !next_subset(&mut sub, p) {
                break;
            }
        }
    } else {
        for _ in 0..budget {
            let j = rng.random_range(0..=k);
            let support: Vec<usize> = random_subset_avoiding(p, j, &[], rng);
            let x = gaussian_on(&support, p, rng);
            let (mut point_lo, mut point_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..opts.subsets_per_point {
                let extra = random_subset_avoiding(p, k - j, &support, rng);
                let mut all = support.clone();
                all.extend(extra);
                let set = SupportSet::new(all);
                let (lo, hi) = srh_extremes(obj, &x, &set)?;
                point_lo = point_lo.min(lo);
                point_hi = point_hi.max(hi);
                tracker.record_global(lo, hi);
            }
            tracker.record_point(point_lo, point_hi);
        }
    }

    Ok(SrhEstimate {
        k,
        b_min: tracker.b_min,
        a_max: tracker.a_max,
        mu_k: tracker.mu_or_nan(),
        mode: if exhaustive {
            EstimateMode::Exhaustive
        } else {
            EstimateMode::Sampled { trials: budget }
        },
        valid: tracker.b_min > 0.0,
    })
}

fn check_estimator_args(p: usize, k: usize, budget: usize) -> Result<()> {
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "sparsity level k = {k} must lie in [1, {p}]"
        )));
    }
    if budget == 0 {
        return Err(Error::invalid("budget must be positive"));
    }
    Ok(())
}

/// Estimates the restricted-linearization conditioning of `obj` through its
/// Bregman divergence only. The point/set scheme matches [`estimate_srh`];
/// per pair, the probe directions are the eigenvectors of a small
/// divergence-difference matrix plus random unit directions, each evaluated
/// at several step magnitudes.
pub fn estimate_srl(
    obj: &dyn Objective,
    k: usize,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<SrlEstimate> {
    estimate_srl_with(obj, k, budget, &EstimatorOptions::default(), rng)
}

pub fn estimate_srl_with(
    obj: &dyn Objective,
    k: usize,
    budget: usize,
    opts: &EstimatorOptions,
    rng: &mut impl Rng,
) -> Result<SrlEstimate> {
    let p = obj.dim();
    check_estimator_args(p, k, budget)?;
    if opts.scales.is_empty() {
        return Err(Error::invalid("at least one probe scale is required"));
    }

    let exhaustive = binomial(p, k)
        .map(|c| c <= opts.exhaustive_cap as u128)
        .unwrap_or(false);
    let mut tracker = ExtremeTracker::new();

    if exhaustive {
        let zero = DenseVector::zeros(p);
        let mut sub: Vec<usize> = (0..k).collect();
        let (mut zero_lo, mut zero_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        loop {
            let (lo, hi) = bregman_extremes(obj, &zero, &sub, opts, rng)?;
            zero_lo = zero_lo.min(lo);
            zero_hi = zero_hi.max(hi);
            tracker.record_global(lo, hi);
            if !next_subset(&mut sub, p) {
                break;
            }
        }
        tracker.record_point(zero_lo, zero_hi);

        let mut sub: Vec<usize> = (0..k).collect();
        loop {
            for _ in 0..opts.x_draws_per_support {
                let x = gaussian_on(&sub, p, rng);
                let (lo, hi) = bregman_extremes(obj, &x, &sub, opts, rng)?;
                tracker.record_global(lo, hi);
                tracker.record_point(lo, hi);
            }
            if !next_subset(&mut sub, p) {
                break;
            }
        }
    } else {
        for _ in 0..budget {
            let j = rng.random_range(0..=k);
            let support: Vec<usize> = random_subset_avoiding(p, j, &[], rng);
            let x = gaussian_on(&support, p, rng);
            let (mut point_lo, mut point_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..opts.subsets_per_point {
                let extra = random_subset_avoiding(p, k - j, &support, rng);
                let mut all = support.clone();
                all.extend(extra);
                all.sort_unstable();
                let (lo, hi) = bregman_extremes(obj, &x, &all, opts, rng)?;
                point_lo = point_lo.min(lo);
                point_hi = point_hi.max(hi);
                tracker.record_global(lo, hi);
            }
            tracker.record_point(point_lo, point_hi);
        }
    }

    Ok(SrlEstimate {
        k,
        alpha_max: tracker.a_max,
        beta_min: tracker.b_min,
        mu_k: tracker.mu_or_nan(),
        mode: if exhaustive {
            EstimateMode::Exhaustive
        } else {
            EstimateMode::Sampled { trials: budget }
        },
        valid: tracker.b_min > 0.0,
    })
}

/// Extreme normalized Bregman ratios `B_f(x + t*d || x) / t^2` over unit
/// directions `d` supported on `set`.
fn bregman_extremes(
    obj: &dyn Objective,
    x: &DenseVector,
    set: &[usize],
    opts: &EstimatorOptions,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let p = obj.dim();
    let m = set.len();
    let embed = |small: &DVector<f64>| {
        let mut out = DenseVector::zeros(p);
        for (j, &i) in set.iter().enumerate() {
            out[i] = small[j];
        }
        out
    };
    let ratio = |dir: &DVector<f64>, t: f64| -> Result<f64> {
        let step = embed(&(dir * t));
        Ok(obj.bregman_divergence(x, &(x + step))? / (t * t))
    };

    // Polarization probe of the local curvature: entry (i, j) recovers
    // d_i' H d_j from divergence values alone. Its eigenvectors point at the
    // extreme directions whenever the divergence is near quadratic.
    let t0 = 1e-3;
    let mut diag = vec![0.0; m];
    let mut local = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        diag[i] = ratio(&e, t0)?;
        local[(i, i)] = 2.0 * diag[i];
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e[j] = 1.0;
            let mixed = ratio(&e, t0)?;
            let off = mixed - diag[i] - diag[j];
            local[(i, j)] = off;
            local[(j, i)] = off;
        }
    }

    let mut candidates: Vec<DVector<f64>> = Vec::new();
    let eig = SymmetricEigen::new(local);
    for c in 0..m {
        let v = eig.eigenvectors.column(c).into_owned();
        if v.norm() > 0.0 {
            candidates.push(v.normalize());
        }
    }
    for _ in 0..opts.extra_deltas {
        let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 0.0 {
            candidates.push(v.normalize());
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for dir in &candidates {
        for &t in &opts.scales {
            let r = ratio(dir, t)?;
            if r.is_finite() {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    Ok((lo, hi))
}

/// `h(tau) = (1 + tau) ln(1 + tau) - tau`, the exponent rate of the matrix
/// Chernoff tail.
pub fn h_tau(tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= -1.0 {
        return Err(Error::invalid(format!("h is undefined at tau = {tau}")));
    }
    Ok((1.0 + tau) * (1.0 + tau).ln() - tau)
}

/// The sample-count requirement before rounding up.
pub fn chernoff_sample_requirement(params: &ChernoffParams, k: usize, p: usize) -> Result<f64> {
    params.validate()?;
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "subset size k = {k} must lie in [1, {p}]"
        )));
    }
    let k_f = k as f64;
    let p_f = p as f64;
    let numerator = params.r * (k_f.ln() + k_f * (1.0 + (p_f / k_f).ln()) - params.eps.ln());
    Ok(numerator / (params.theta_tilde * h_tau(params.tau)?))
}

/// Number of samples sufficient for the restricted second-moment matrices of
/// the features to concentrate, by the matrix Chernoff tail union-bounded
/// over all size-`k` index sets.
pub fn chernoff_sample_bound(params: &ChernoffParams, k: usize, p: usize) -> Result<usize> {
    let raw = chernoff_sample_requirement(params, k, p)?;
    Ok(raw.ceil() as usize)
}

/// Conditioning bound for the ridge-regularized logistic loss implied by the
/// concentration event: `1 + (1 + tau) * theta_bar / (4 * eta)`.
pub fn srh_mu_bound(eta: f64, theta_bar: f64, tau: f64) -> Result<f64> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::invalid("eta must be positive"));
    }
    if theta_bar < 0.0 || tau < 0.0 {
        return Err(Error::invalid("theta_bar and tau must be nonnegative"));
    }
    Ok(1.0 + (1.0 + tau) * theta_bar / (4.0 * eta))
}

/// High-probability bound on the restricted gradient norm at the true
/// parameter: `0.5 * sqrt((1 + tau) * theta_bar) + eta * ||x*||`.
pub fn approx_error_bound(eta: f64, theta_bar: f64, tau: f64, x_star_norm: f64) -> f64 {
    0.5 * ((1.0 + tau) * theta_bar).sqrt() + eta * x_star_norm
}

/// The realized error-floor driver of the recovery guarantee: the norm of the
/// gradient at the target parameter restricted to its `3s` largest entries.
pub fn empirical_gradient_at_truth(
    obj: &dyn Objective,
    x_star: &DenseVector,
    s: usize,
) -> Result<f64> {
    let g = obj.gradient(x_star)?;
    let k = (3 * s).min(g.len());
    let idx = top_k_support(&g, k)?;
    Ok(restrict(&g, &idx)?.norm())
}

/// Monte Carlo range of the largest restricted eigenvalue of the empirical
/// feature second-moment matrix over size-`k` index sets. Returns
/// `(theta_tilde_hat, theta_bar_hat)`; enumeration is exhaustive when it
/// fits within `draws` sets.
pub fn empirical_theta_range(
    features: &DMatrix<f64>,
    k: usize,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let p = features.ncols();
    let n = features.nrows();
    check_estimator_args(p, k, draws)?;
    let second_moment = features.tr_mul(features) / n as f64;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |indices: &[usize]| -> Result<()> {
        let sub = second_moment
            .select_columns(indices.iter())
            .select_rows(indices.iter());
        let (_, top) = eigen_extremes(&sub)?;
        lo = lo.min(top);
        hi = hi.max(top);
        Ok(())
    };

    let exhaustive = binomial(p, k).map(|c| c <= draws as u128).unwrap_or(false);
    if exhaustive {
        let mut sub: Vec<usize> = (0..k).collect();
        loop {
            visit(&sub)?;
            if !next_subset(&mut sub, p) {
                break;
            }
        }
    } else {
        for _ in 0..draws {
            let mut pick = random_subset_avoiding(p, k, &[], rng);
            pick.sort_unstable();
            visit(&pick)?;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Dataset, LogisticLoss, QuadraticForm, SquaredError};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Unit diagonal, off-diagonal twos: convex on singletons, indefinite on
    /// pairs.
    fn spiked_quadratic(p: usize) -> QuadraticForm {
        let q = DMatrix::from_element(p, p, 2.0) - DMatrix::identity(p, p);
        QuadraticForm::homogeneous(q).unwrap()
    }

    fn random_psd_quadratic(p: usize, seed: u64) -> QuadraticForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = m.tr_mul(&m) + DMatrix::identity(p, p) * 0.5;
        QuadraticForm::homogeneous(q).unwrap()
    }

    // Closed-form symmetric eigenvalue extremes for k <= 3, an oracle
    // independent of the library eigensolver.
    fn closed_form_extremes(m: &DMatrix<f64>) -> (f64, f64) {
        match m.nrows() {
            1 => (m[(0, 0)], m[(0, 0)]),
            2 => {
                let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
                let mid = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                (mid - rad, mid + rad)
            }
            3 => {
                let a = m;
                let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
                if p1 == 0.0 {
                    let d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
                    return (
                        d.iter().cloned().fold(f64::INFINITY, f64::min),
                        d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    );
                }
                let q = (a[(0, 0)] + a[(1, 1)] + a[(2, 2)]) / 3.0;
                let p2 = (a[(0, 0)] - q).powi(2)
                    + (a[(1, 1)] - q).powi(2)
                    + (a[(2, 2)] - q).powi(2)
                    + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                let b = (a - DMatrix::identity(3, 3) * q) / p;
                let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
                    - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
                    + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
                let r = (det_b / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let roots: Vec<f64> = (0..3)
                    .map(|i| {
                        q + 2.0 * p * (phi + 2.0 * i as f64 * std::f64::consts::FRAC_PI_3).cos()
                    })
                    .collect();
                (
                    roots.iter().cloned().fold(f64::INFINITY, f64::min),
                    roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            }
            _ => panic!("oracle only handles k <= 3"),
        }
    }

    fn all_k_subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..p {
                cur.push(i);
                rec(i + 1, p, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, p, k, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn spiked_quadratic_singletons_are_unit_curvature() {
        let obj = spiked_quadratic(5);
        for i in 0..5 {
            let (lo, hi) =
                srh_extremes(&obj, &DenseVector::zeros(5), &SupportSet::new(vec![i])).unwrap();
            assert_relative_eq!(lo, 1.0, epsilon = 1e-12);
            assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spiked_quadratic_pairs_expose_negative_curvature() {
        // Eigenvalues of [[1, 2], [2, 1]] are -1 and 3 by the characteristic
        // polynomial (l - 1)^2 = 4.
        let obj = spiked_quadratic(5);
        let (lo, hi) =
            srh_extremes(&obj, &DenseVector::zeros(5), &SupportSet::new(vec![0, 1])).unwrap();
        assert_relative_eq!(lo, -1.0, epsilon = 1e-10);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn identity_design_has_unit_extremes_everywhere() {
        let obj = SquaredError::new(DMatrix::identity(6, 6), DVector::zeros(6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 1..=3 {
            let est = estimate_srh(&obj, k, 50, &mut rng).unwrap();
            assert!(est.valid);
            assert_relative_eq!(est.mu_k, 1.0, epsilon = 1e-12);
            assert_relative_eq!(est.b_min, 1.0, epsilon = 1e-12);
            assert_relative_eq!(est.a_max, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spiked_quadratic_order_one_is_perfectly_conditioned() {
        let obj = spiked_quadratic(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_srh(&obj, 1, 10, &mut rng).unwrap();
        assert_eq!(est.mode, EstimateMode::Exhaustive);
        assert!(est.valid);
        assert_relative_eq!(est.mu_k, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spiked_quadratic_order_two_is_invalid() {
        let obj = spiked_quadratic(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = estimate_srh(&obj, 2, 10, &mut rng).unwrap();
        assert!(!est.valid);
        assert_relative_eq!(est.b_min, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn exhaustive_estimate_matches_closed_form_brute_force() {
        for (p, k, seed) in [(8usize, 2usize, 10u64), (8, 3, 11), (10, 2, 12)] {
            let obj = random_psd_quadratic(p, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let est = estimate_srh(&obj, k, 10, &mut rng).unwrap();
            assert_eq!(est.mode, EstimateMode::Exhaustive);

            let zero = DenseVector::zeros(p);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for sub in all_k_subsets(p, k) {
                let h = obj
                    .restricted_hessian(&zero, &SupportSet::new(sub))
                    .unwrap();
                let (l, u) = closed_form_extremes(&h);
                lo = lo.min(l);
                hi = hi.max(u);
            }
            assert!(est.valid);
            assert_relative_eq!(est.b_min, lo, epsilon = 1e-10);
            assert_relative_eq!(est.a_max, hi, epsilon = 1e-10);
            assert_relative_eq!(est.mu_k, hi / lo, epsilon = 1e-10);
        }
    }

    #[test]
    fn sampled_estimate_lower_bounds_exhaustive() {
        let obj = random_psd_quadratic(9, 33);
        let k = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let exhaustive = estimate_srh(&obj, k, 10, &mut rng).unwrap();
        assert_eq!(exhaustive.mode, EstimateMode::Exhaustive);

        let tight = EstimatorOptions {
            exhaustive_cap: 0, // force sampling
            ..EstimatorOptions::default()
        };
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sampled = estimate_srh_with(&obj, k, 60, &tight, &mut rng).unwrap();
            assert!(matches!(sampled.mode, EstimateMode::Sampled { trials: 60 }));
            assert!(sampled.mu_k <= exhaustive.mu_k + 1e-12);
            assert!(sampled.b_min >= exhaustive.b_min - 1e-12);
            assert!(sampled.a_max <= exhaustive.a_max + 1e-12);
        }
    }

    #[test]
    fn ridge_conditioning_improves_with_stronger_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(60, 12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(60, |_, _| f64::from(rng.random_range(0..=1)));
        let ds = Dataset::new(a, y, false).unwrap();
        let mut mus = Vec::new();
        for eta in [0.01, 0.1, 1.0] {
            let obj = LogisticLoss::l2(&ds, eta).unwrap();
            // Same sampling stream for every eta so the comparison is paired.
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let est = estimate_srh(&obj, 3, 80, &mut rng).unwrap();
            assert!(est.valid);
            mus.push(est.mu_k);
        }
        assert!(mus[0] >= mus[1] && mus[1] >= mus[2], "mus = {mus:?}");
    }

    #[test]
    fn srl_agrees_with_srh_on_quadratics() {
        for seed in [1u64, 2, 3] {
            let obj = random_psd_quadratic(8, 40 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let srh = estimate_srh(&obj, 2, 10, &mut rng).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let srl = estimate_srl(&obj, 2, 120, &mut rng).unwrap();
            assert!(srl.valid);
            let rel = (srl.mu_k - srh.mu_k).abs() / srh.mu_k;
            assert!(
                rel < 0.05,
                "seed {seed}: srl {} vs srh {}",
                srl.mu_k,
                srh.mu_k
            );
        }
    }

    #[test]
    fn bregman_ratio_is_scale_invariant_for_quadratics() {
        let obj = random_psd_quadratic(6, 77);
        let x = DenseVector::zeros(6);
        let mut delta = DenseVector::zeros(6);
        delta[1] = 0.6;
        delta[4] = -0.8;
        let base = obj.bregman_divergence(&x, &(&x + &delta)).unwrap();
        for t in [1e-3, 0.1, 10.0, 1e3] {
            let scaled = obj.bregman_divergence(&x, &(&x + &delta * t)).unwrap();
            assert_relative_eq!(scaled / (t * t), base, max_relative = 1e-9);
        }
    }

    #[test]
    fn ridge_logistic_beta_stays_above_half_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(40, 10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(40, |_, _| f64::from(rng.random_range(0..=1)));
        let ds = Dataset::new(a, y, false).unwrap();
        let eta = 0.3;
        let obj = LogisticLoss::l2(&ds, eta).unwrap();
        let est = estimate_srl(&obj, 3, 60, &mut rng).unwrap();
        assert!(est.valid);
        assert!(
            est.beta_min >= eta / 2.0 - 1e-12,
            "beta_min = {}",
            est.beta_min
        );
    }

    /// Objective whose restricted Hessian violates symmetry by a chosen
    /// amount, to exercise the symmetry guard.
    struct LopsidedCurvature {
        skew: f64,
    }

    impl crate::objective::Objective for LopsidedCurvature {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, _x: &DenseVector) -> crate::Result<f64> {
            Ok(0.0)
        }
        fn gradient(&self, _x: &DenseVector) -> crate::Result<DenseVector> {
            Ok(DenseVector::zeros(3))
        }
        fn restricted_hessian(
            &self,
            _x: &DenseVector,
            support: &SupportSet,
        ) -> crate::Result<DMatrix<f64>> {
            let m = support.len();
            let mut h = DMatrix::identity(m, m);
            if m >= 2 {
                h[(0, 1)] = self.skew;
            }
            Ok(h)
        }
    }

    #[test]
    fn gross_hessian_asymmetry_is_an_internal_error() {
        let obj = LopsidedCurvature { skew: 1.0 };
        let pair = SupportSet::new(vec![0, 1]);
        match srh_extremes(&obj, &DenseVector::zeros(3), &pair) {
            Err(crate::Error::Internal(_)) => {}
            other => panic!("expected internal error, got {other:?}"),
        }
        // Singletons never trip the guard.
        assert!(srh_extremes(&obj, &DenseVector::zeros(3), &SupportSet::new(vec![2])).is_ok());
    }

    #[test]
    fn roundoff_scale_asymmetry_is_symmetrized_away() {
        let obj = LopsidedCurvature { skew: 1e-12 };
        let pair = SupportSet::new(vec![0, 1]);
        let (lo, hi) = srh_extremes(&obj, &DenseVector::zeros(3), &pair).unwrap();
        assert!(lo <= hi);
        assert_relative_eq!(lo, 1.0, epsilon = 1e-9);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn budget_and_k_are_validated() {
        let obj = spiked_quadratic(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(estimate_srh(&obj, 2, 0, &mut rng).is_err());
        assert!(estimate_srh(&obj, 0, 10, &mut rng).is_err());
        assert!(estimate_srh(&obj, 5, 10, &mut rng).is_err());
        assert!(estimate_srl(&obj, 2, 0, &mut rng).is_err());
    }

    #[test]
    fn h_tau_closed_forms() {
        assert_eq!(h_tau(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            h_tau(1.0).unwrap(),
            2.0 * std::f64::consts::LN_2 - 1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(h_tau(1.0).unwrap(), 0.386294, epsilon = 1e-6);
        assert_relative_eq!(
            h_tau(std::f64::consts::E - 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(h_tau(-1.0).is_err());
    }

    #[test]
    fn chernoff_bound_matches_hand_evaluation() {
        let params = ChernoffParams {
            r: 1.0,
            theta_bar: 1.0,
            theta_tilde: 1.0,
            tau: 1.0,
            eps: (-1.0f64).exp(),
        };
        // log 1 + 1 * (1 + log 1) + 1 = 2, so n = ceil(2 / h(1)) = 6.
        let raw = chernoff_sample_requirement(&params, 1, 1).unwrap();
        assert_relative_eq!(raw, 2.0 / h_tau(1.0).unwrap(), epsilon = 1e-12);
        assert_relative_eq!(raw, 5.177, epsilon = 1e-3);
        assert_eq!(chernoff_sample_bound(&params, 1, 1).unwrap(), 6);
    }

    #[test]
    fn chernoff_bound_monotonicities() {
        let base = ChernoffParams {
            r: 2.0,
            theta_bar: 3.0,
            theta_tilde: 1.5,
            tau: 0.5,
            eps: 0.1,
        };
        let raw = chernoff_sample_requirement(&base, 4, 64).unwrap();
        let doubled = ChernoffParams { r: 4.0, ..base };
        assert_relative_eq!(
            chernoff_sample_requirement(&doubled, 4, 64).unwrap(),
            2.0 * raw,
            epsilon = 1e-10
        );
        let lax = ChernoffParams { eps: 0.99, ..base };
        assert!(chernoff_sample_requirement(&lax, 4, 64).unwrap() < raw);
        let bad = ChernoffParams { eps: 1.5, ..base };
        assert!(chernoff_sample_bound(&bad, 4, 64).is_err());
    }

    #[test]
    fn chernoff_bound_tracks_k_log_p_over_k() {
        // With p/k fixed, bound / (k log(p/k)) stays within a constant factor.
        let params = ChernoffParams {
            r: 1.0,
            theta_bar: 1.0,
            theta_tilde: 1.0,
            tau: 1.0,
            eps: 0.05,
        };
        let mut normalized = Vec::new();
        for k in [2usize, 4, 8] {
            let p = 32 * k;
            let n = chernoff_sample_bound(&params, k, p).unwrap() as f64;
            normalized.push(n / (k as f64 * 32.0f64.ln()));
        }
        let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi / lo < 3.0, "normalized bounds {normalized:?}");
    }

    #[test]
    fn mu_bound_closed_forms() {
        assert_relative_eq!(srh_mu_bound(1.0, 0.0, 0.7).unwrap(), 1.0);
        assert_relative_eq!(srh_mu_bound(1e12, 5.0, 1.0).unwrap(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(srh_mu_bound(0.25, 1.0, 1.0).unwrap(), 3.0);
        assert!(srh_mu_bound(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn approx_error_bound_closed_forms() {
        assert_eq!(approx_error_bound(0.0, 0.0, 0.3, 5.0), 0.0);
        assert_relative_eq!(approx_error_bound(1.0, 4.0, 0.0, 2.0), 3.0);
        // Monotone in each argument.
        let base = approx_error_bound(0.1, 1.0, 0.5, 1.0);
        assert!(approx_error_bound(0.2, 1.0, 0.5, 1.0) >= base);
        assert!(approx_error_bound(0.1, 2.0, 0.5, 1.0) >= base);
        assert!(approx_error_bound(0.1, 1.0, 0.9, 1.0) >= base);
        assert!(approx_error_bound(0.1, 1.0, 0.5, 2.0) >= base);
    }

    #[test]
    fn gradient_at_truth_vanishes_on_noiseless_linear_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(30, 12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x_star = DenseVector::zeros(12);
        x_star[4] = 1.5;
        x_star[9] = -0.5;
        let y = &a * &x_star;
        let obj = SquaredError::new(a, y).unwrap();
        assert!(empirical_gradient_at_truth(&obj, &x_star, 2).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_at_truth_saturates_to_full_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = DMatrix::from_fn(15, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(15, |_, _| rng.sample::<f64, _>(StandardNormal));
        let obj = SquaredError::new(a, y).unwrap();
        let x = DenseVector::zeros(6);
        let full = obj.gradient(&x).unwrap().norm();
        // 3s >= p, so the restriction keeps everything.
        let got = empirical_gradient_at_truth(&obj, &x, 2).unwrap();
        assert_relative_eq!(got, full, epsilon = 1e-14);
    }

    #[test]
    fn theta_range_is_exact_for_identity_features() {
        let features = DMatrix::<f64>::identity(8, 8) * 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (lo, hi) = empirical_theta_range(&features, 2, 100, &mut rng).unwrap();
        // Second-moment matrix is 0.5 * I, every restricted top eigenvalue
        // equals 0.5.
        assert_relative_eq!(lo, 0.5, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.5, epsilon = 1e-12);
    }
}
