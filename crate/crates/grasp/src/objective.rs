//! Cost-function interface and the built-in objectives.
//!
//! Every objective exposes its value, exact gradient, and the restriction of
//! its Hessian to an index set; the solver and the conditioning estimators
//! are written against this trait only. The logistic losses are evaluated
//! with the overflow-safe branch `max(t,0) + log1p(exp(-|t|)) - y*t`, so
//! values and gradients stay finite for arbitrarily large margins.
//!
//! Normalization: the logistic loss carries a `1/n` factor and its gradient
//! and Hessian are the exact derivatives of that normalized loss. The
//! squared-error objective is the unnormalized `0.5 * ||y - Ax||^2`, which
//! makes its pursuit iterations coincide with CoSaMP literally.

use nalgebra::{DMatrix, DVector};

use crate::sparse::{DenseVector, SupportSet};
use crate::{Error, Result};

/// Feature matrix with one sample per row plus a label per sample.
///
/// Labels are `{0,1}` for the classification constructors; the
/// [`Dataset::regression`] constructor admits real-valued labels for use with
/// the squared-error objective. When `intercept` is set, objectives built
/// from this dataset append an implicit constant-one column at coordinate
/// index `p`; that coordinate is exempt from sparsity counts and is
/// force-included in every support the solver forms.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    intercept: bool,
}

impl Dataset {
    /// Classification dataset: labels must be exactly 0 or 1.
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, intercept: bool) -> Result<Self> {
        let ds = Self::regression(features, labels, intercept)?;
        ds.check_binary_labels()?;
        Ok(ds)
    }

    /// Dataset with real-valued labels, for the squared-error objective.
    pub fn regression(
        features: DMatrix<f64>,
        labels: DVector<f64>,
        intercept: bool,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n < 1 || p < 1 {
            return Err(Error::invalid(format!(
                "dataset must have n >= 1 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "label count {} does not match sample count {n}",
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) || labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Dataset {
            features,
            labels,
            intercept,
        })
    }

    fn check_binary_labels(&self) -> Result<()> {
        match self.labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            Some(i) => Err(Error::invalid(format!(
                "label at sample {i} is {}, expected 0 or 1",
                self.labels[i]
            ))),
            None => Ok(()),
        }
    }

    /// Same data with the intercept flag replaced.
    pub fn with_intercept(self, intercept: bool) -> Dataset {
        Dataset { intercept, ..self }
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    /// Number of raw feature columns, excluding any implicit intercept.
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    /// Dimension of the parameter space objectives built from this dataset
    /// operate in: `p`, or `p + 1` with the intercept coordinate appended.
    pub fn param_dim(&self) -> usize {
        self.features.ncols() + usize::from(self.intercept)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    /// Feature matrix as objectives see it, with the constant-one intercept
    /// column materialized when enabled.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        if !self.intercept {
            return self.features.clone();
        }
        let (n, p) = self.features.shape();
        let mut out = DMatrix::zeros(n, p + 1);
        out.view_mut((0, 0), (n, p)).copy_from(&self.features);
        out.column_mut(p).fill(1.0);
        out
    }
}

/// A twice-differentiable cost function over `R^dim`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DenseVector) -> Result<f64>;

    fn gradient(&self, x: &DenseVector) -> Result<DenseVector>;

    /// The `|S| x |S|` restriction of the Hessian at `x` to the coordinates
    /// in `support`, in the order the support lists them.
    fn restricted_hessian(&self, x: &DenseVector, support: &SupportSet) -> Result<DMatrix<f64>>;

    /// Index of the intercept coordinate, when the objective has one. The
    /// solver exempts it from sparsity counts and keeps it in every support.
    fn intercept_index(&self) -> Option<usize> {
        None
    }

    /// Bregman divergence `f(xp) - f(x) - <grad f(x), xp - x>`.
    fn bregman_divergence(&self, x: &DenseVector, xp: &DenseVector) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok(self.value(xp)? - self.value(x)? - g.dot(&(xp - x)))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!(
            "vector has dimension {got}, objective expects {expected}"
        )));
    }
    Ok(())
}

fn select_columns(m: &DMatrix<f64>, support: &SupportSet) -> Result<DMatrix<f64>> {
    if let Some(&worst) = support.indices().last() {
        if worst >= m.ncols() {
            return Err(Error::invalid(format!(
                "support index {worst} out of range for {} columns",
                m.ncols()
            )));
        }
    }
    Ok(m.select_columns(support.indices().iter()))
}

/// Unnormalized least squares `0.5 * ||y - Ax||^2`.
#[derive(Debug, Clone)]
pub struct SquaredError {
    matrix: DMatrix<f64>,
    targets: DVector<f64>,
    intercept: Option<usize>,
}

impl SquaredError {
    pub fn new(matrix: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != targets.len() {
            return Err(Error::invalid(format!(
                "matrix has {} rows but targets have length {}",
                matrix.nrows(),
                targets.len()
            )));
        }
        Ok(SquaredError {
            matrix,
            targets,
            intercept: None,
        })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let mut obj = Self::new(ds.design_matrix(), ds.labels().clone())?;
        obj.intercept = ds.intercept().then(|| ds.n_features());
        Ok(obj)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    fn residual(&self, x: &DenseVector) -> DVector<f64> {
        &self.matrix * x - &self.targets
    }
}

impl Objective for SquaredError {
    fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * self.residual(x).norm_squared())
    }

    fn gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), x.len())?;
        Ok(self.matrix.tr_mul(&self.residual(x)))
    }

    fn restricted_hessian(&self, x: &DenseVector, support: &SupportSet) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let a_s = select_columns(&self.matrix, support)?;
        Ok(a_s.tr_mul(&a_s))
    }

    fn intercept_index(&self) -> Option<usize> {
        self.intercept
    }
}

/// Sample-averaged logistic loss, optionally with an `eta/2 * ||x||^2` ridge
/// term. `eta = 0` is the plain logistic loss.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    design: DMatrix<f64>,
    labels: DVector<f64>,
    eta: f64,
    intercept: Option<usize>,
}

impl LogisticLoss {
    pub fn new(ds: &Dataset) -> Result<Self> {
        Self::build(ds, 0.0)
    }

    /// Ridge-regularized logistic loss; requires `eta > 0`.
    pub fn l2(ds: &Dataset, eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::invalid(format!(
                "l2 coefficient must be positive and finite, got {eta}"
            )));
        }
        Self::build(ds, eta)
    }

    fn build(ds: &Dataset, eta: f64) -> Result<Self> {
        ds.check_binary_labels()?;
        Ok(LogisticLoss {
            design: ds.design_matrix(),
            labels: ds.labels().clone(),
            eta,
            intercept: ds.intercept().then(|| ds.n_features()),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn margins(&self, x: &DenseVector) -> DVector<f64> {
        &self.design * x
    }
}

/// `log(1 + exp(t))` without overflow.
fn log1p_exp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Standard logistic sigmoid, evaluated on the stable branch.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Objective for LogisticLoss {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let t = self.margins(x);
        let n = self.labels.len() as f64;
        let mut total = 0.0;
        for i in 0..self.labels.len() {
            total += log1p_exp(t[i]) - self.labels[i] * t[i];
        }
        Ok(total / n + 0.5 * self.eta * x.norm_squared())
    }

    fn gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), x.len())?;
        let t = self.margins(x);
        let u = DVector::from_fn(t.len(), |i, _| sigmoid(t[i]) - self.labels[i]);
        let n = self.labels.len() as f64;
        Ok(self.design.tr_mul(&u) / n + self.eta * x)
    }

    fn restricted_hessian(&self, x: &DenseVector, support: &SupportSet) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let t = self.margins(x);
        let a_s = select_columns(&self.design, support)?;
        let n = self.labels.len() as f64;
        // sech^2(t/2) = 4 sigmoid(t) sigmoid(-t); scale rows by its sqrt so
        // the restricted Hessian is (1/4n) A_S' Lambda A_S by a single gemm.
        let mut scaled = a_s;
        for i in 0..t.len() {
            let w = (4.0 * sigmoid(t[i]) * sigmoid(-t[i])).sqrt();
            scaled.row_mut(i).scale_mut(w);
        }
        let mut h = scaled.tr_mul(&scaled) / (4.0 * n);
        for d in 0..support.len() {
            h[(d, d)] += self.eta;
        }
        Ok(h)
    }

    fn intercept_index(&self) -> Option<usize> {
        self.intercept
    }
}

/// General quadratic `0.5 * x'Qx - b'x` with symmetric `Q`. The matrix need
/// not be positive semidefinite, which makes this the objective of choice for
/// probing restricted-Hessian conditioning of non-convex costs.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticForm {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::invalid("quadratic form matrix must be square"));
        }
        if !q.is_empty() && (&q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
            return Err(Error::invalid("quadratic form matrix must be symmetric"));
        }
        if b.len() != q.nrows() {
            return Err(Error::invalid(format!(
                "linear term has length {} but matrix is {}x{}",
                b.len(),
                q.nrows(),
                q.ncols()
            )));
        }
        Ok(QuadraticForm { q, b })
    }

    /// Pure form `0.5 * x'Qx` with no linear term.
    pub fn homogeneous(q: DMatrix<f64>) -> Result<Self> {
        let b = DVector::zeros(q.nrows());
        Self::new(q, b)
    }
}

impl Objective for QuadraticForm {
    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * x.dot(&(&self.q * x)) - self.b.dot(x))
    }

    fn gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.q * x - &self.b)
    }

    fn restricted_hessian(&self, x: &DenseVector, support: &SupportSet) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let cols = select_columns(&self.q, support)?;
        Ok(cols.select_rows(support.indices().iter()))
    }
}
