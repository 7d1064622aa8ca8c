//! Synthetic data generation and dataset file formats.
//!
//! Features are drawn row-wise by a first-order autoregressive recursion
//! `a[j+1] = rho * a[j] + sqrt(1 - rho^2) * z[j]` with standard normal
//! `a[0]` and `z[j]`, so every coordinate has unit marginal variance for any
//! correlation `rho` in `[0, 1]`. Labels are Bernoulli draws from the
//! logistic model at a sparse parameter with uniformly random support.
//!
//! All randomness flows through seeded ChaCha streams (Gaussians via the
//! ziggurat sampler of `rand_distr`), with the draw order fixed and
//! documented per generator, so a configuration reproduces byte-identical
//! datasets across runs and platforms. Per-trial streams are derived from
//! one seed by hashing the trial index into the stream id.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::objective::{sigmoid, Dataset};
use crate::sparse::DenseVector;
use crate::{Error, Result};

/// Configuration for one synthetic problem instance.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    /// Ambient dimension of the sparse parameter.
    pub p: usize,
    /// Number of nonzeros in the parameter.
    pub s: usize,
    /// AR(1) correlation of adjacent feature coordinates, in `[0, 1]`.
    pub rho: f64,
    /// Number of samples.
    pub n: usize,
    pub seed: u64,
    /// Draw an intercept and add it to the label margins.
    pub intercept: bool,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.n < 1 {
            return Err(Error::invalid("p and n must be at least 1"));
        }
        if self.s > self.p {
            return Err(Error::invalid(format!(
                "sparsity {} exceeds dimension {}",
                self.s, self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent random stream for one trial of a seeded experiment. The
/// stream id is a hash of the trial index, so trials can run in any order or
/// in parallel without affecting each other's draws.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix64(trial));
    rng
}

/// Uniformly random size-`s` subset of `[0, p)` by partial Fisher-Yates.
fn sample_support(p: usize, s: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..p).collect();
    let mut picked = Vec::with_capacity(s);
    for i in 0..s {
        let j = rng.random_range(0..p - i);
        picked.push(pool[j]);
        pool.swap(j, p - i - 1);
    }
    picked.sort_unstable();
    picked
}

/// Draws the sparse target parameter and intercept. Draw order: support
/// subset, then the nonzeros in index order, then the intercept (skipped
/// entirely when disabled, in which case `c = 0`).
pub fn gen_sparse_parameter(cfg: &GenConfig, rng: &mut impl Rng) -> Result<(DenseVector, f64)> {
    cfg.validate()?;
    let support = sample_support(cfg.p, cfg.s, rng);
    let mut x = DenseVector::zeros(cfg.p);
    for &i in &support {
        x[i] = rng.sample::<f64, _>(StandardNormal);
    }
    let c = if cfg.intercept {
        rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    Ok((x, c))
}

/// Draws the feature matrix, row by row, each row by the AR(1) recursion.
pub fn gen_ar1_features(cfg: &GenConfig, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let innovation = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut buf = vec![0.0f64; cfg.n * cfg.p];
    for row in buf.chunks_exact_mut(cfg.p) {
        row[0] = rng.sample::<f64, _>(StandardNormal);
        for j in 1..cfg.p {
            let z: f64 = rng.sample(StandardNormal);
            row[j] = cfg.rho * row[j - 1] + innovation * z;
        }
    }
    Ok(DMatrix::from_row_slice(cfg.n, cfg.p, &buf))
}

/// Draws Bernoulli labels from the logistic model: `Pr{y = 1 | a}` is the
/// sigmoid of `<a, x*> + c`. One uniform draw per sample, in sample order.
pub fn gen_labels(
    features: &DMatrix<f64>,
    x_star: &DenseVector,
    c: f64,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    if features.ncols() != x_star.len() {
        return Err(Error::invalid(format!(
            "parameter has dimension {}, features have {} columns",
            x_star.len(),
            features.ncols()
        )));
    }
    let margins = features * x_star;
    Ok(DVector::from_fn(features.nrows(), |i, _| {
        let pr_one = sigmoid(margins[i] + c);
        f64::from(rng.random::<f64>() < pr_one)
    }))
}

/// Generates a full instance on the trial-0 stream of `cfg.seed`: parameter,
/// intercept, features, labels, in that order.
pub fn gen_dataset(cfg: &GenConfig) -> Result<(Dataset, DenseVector, f64)> {
    let mut rng = trial_rng(cfg.seed, 0);
    gen_dataset_with(cfg, &mut rng)
}

pub fn gen_dataset_with(
    cfg: &GenConfig,
    rng: &mut impl Rng,
) -> Result<(Dataset, DenseVector, f64)> {
    let (x_star, c) = gen_sparse_parameter(cfg, rng)?;
    let features = gen_ar1_features(cfg, rng)?;
    let labels = gen_labels(&features, &x_star, c, rng)?;
    let ds = Dataset::new(features, labels, cfg.intercept)?;
    Ok((ds, x_star, c))
}

/// Serializes a float with 17 significant digits, enough to round-trip any
/// f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Writes the dataset in the CSV schema `y,x1,...,xp` with binary labels,
/// LF line endings, and 17-significant-digit features.
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push('y');
    for j in 1..=ds.n_features() {
        write!(out, ",x{j}").expect("string write");
    }
    out.push('\n');
    for i in 0..ds.n_samples() {
        let y = ds.labels()[i];
        if y == 0.0 {
            out.push('0');
        } else if y == 1.0 {
            out.push('1');
        } else {
            return Err(Error::invalid(format!(
                "label at sample {i} is {y}; the dataset schema requires 0 or 1"
            )));
        }
        for j in 0..ds.n_features() {
            out.push(',');
            out.push_str(&fmt_f64(ds.features()[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn parse_rows(path: &Path, strict_binary: bool) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(path, 1, "empty file"));
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"y") || cols.len() < 2 {
        return Err(parse_err(path, 1, "header must be y,x1,...,xp"));
    }
    for (j, name) in cols.iter().enumerate().skip(1) {
        if *name != format!("x{j}") {
            return Err(parse_err(
                path,
                1,
                format!("unexpected header column {name:?}, expected x{j}"),
            ));
        }
    }
    let p = cols.len() - 1;

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {} fields, found {}", p + 1, fields.len()),
            ));
        }
        let label = match fields[0] {
            "0" => 0.0,
            "1" => 1.0,
            other if strict_binary => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("label {other:?} is not 0 or 1"),
                ));
            }
            other => other
                .parse::<f64>()
                .map_err(|e| parse_err(path, line_no, format!("bad label {other:?}: {e}")))?,
        };
        labels.push(label);
        for field in &fields[1..] {
            let v = field
                .parse::<f64>()
                .map_err(|e| parse_err(path, line_no, format!("bad value {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite value {v}")));
            }
            values.push(v);
        }
    }
    let n = labels.len();
    Ok((
        DMatrix::from_row_slice(n, p, &values),
        DVector::from_vec(labels),
    ))
}

/// Reads a classification dataset (labels exactly `0` or `1`). The intercept
/// flag of the result is off; callers enable it when the model wants one.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (features, labels) = parse_rows(path, true)?;
    Dataset::new(features, labels, false)
}

/// Reads a dataset whose label column holds arbitrary reals, for use with
/// the squared-error objective.
pub fn read_regression_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (features, labels) = parse_rows(path, false)?;
    Dataset::regression(features, labels, false)
}

/// Writes a sparse parameter as `index,value` rows plus a final `c,<value>`
/// intercept row.
pub fn write_parameter(path: impl AsRef<Path>, x: &DenseVector, c: f64) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("index,value\n");
    for i in 0..x.len() {
        if x[i] != 0.0 {
            writeln!(out, "{i},{}", fmt_f64(x[i])).expect("string write");
        }
    }
    writeln!(out, "c,{}", fmt_f64(c)).expect("string write");
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a parameter file back into a dense vector of dimension `p`.
pub fn read_parameter(path: impl AsRef<Path>, p: usize) -> Result<(DenseVector, f64)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "index,value")) => {}
        Some((_, other)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header index,value, found {other:?}"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut x = DenseVector::zeros(p);
    let mut c = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(',') else {
            return Err(parse_err(path, line_no, "expected two fields"));
        };
        let value: f64 = value
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad value {value:?}: {e}")))?;
        if key == "c" {
            if c.replace(value).is_some() {
                return Err(parse_err(path, line_no, "duplicate intercept row"));
            }
            continue;
        }
        let i: usize = key
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad index {key:?}: {e}")))?;
        if i >= p {
            return Err(parse_err(
                path,
                line_no,
                format!("index {i} out of range for dimension {p}"),
            ));
        }
        x[i] = value;
    }
    let c = c.ok_or_else(|| parse_err(path, 1, "missing intercept row"))?;
    Ok((x, c))
}
