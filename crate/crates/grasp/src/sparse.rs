//! Support-set algebra and best-k-term approximation primitives.
//!
//! Support detection uses exact-zero semantics: any entry that is not
//! literally `0.0` counts as part of the support, with no epsilon threshold.
//! The solver produces exact zeros by construction, so this is the right
//! notion here. Magnitude ties are broken toward the lowest index so that
//! seeded runs are reproducible.

use nalgebra::DVector;

use crate::{Error, Result};

/// Dense real vector of ambient dimension `p`. Entries are expected to be
/// finite at module boundaries; constructors that ingest external data
/// (datasets, CSV files) enforce this.
pub type DenseVector = DVector<f64>;

/// Sorted, duplicate-free set of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn empty() -> Self {
        SupportSet {
            indices: Vec::new(),
        }
    }

    /// Builds a set from arbitrary indices, sorting and deduplicating.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet { indices }
    }

    /// Like [`SupportSet::new`] but rejects indices outside `[0, dim)`.
    pub fn try_new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        let set = SupportSet::new(indices);
        if let Some(&worst) = set.indices.last() {
            if worst >= dim {
                return Err(Error::invalid(format!(
                    "support index {worst} out of range for dimension {dim}"
                )));
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        merged.extend_from_slice(&self.indices);
        merged.extend_from_slice(&other.indices);
        SupportSet::new(merged)
    }

    /// Inserts a single index, keeping the set sorted.
    pub fn insert(&mut self, index: usize) {
        if let Err(pos) = self.indices.binary_search(&index) {
            self.indices.insert(pos, index);
        }
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        SupportSet::new(iter.into_iter().collect())
    }
}

/// Indices of the nonzero entries of `v`.
pub fn support(v: &DenseVector) -> SupportSet {
    SupportSet {
        indices: (0..v.len()).filter(|&i| v[i] != 0.0).collect(),
    }
}

/// Indices of the `k` largest-magnitude entries of `v`, excluding exact
/// zeros. When `v` has fewer than `k` nonzeros only those are returned; the
/// set is never padded with zero entries. Ties keep the lowest index.
pub fn top_k_support(v: &DenseVector, k: usize) -> Result<SupportSet> {
    if k > v.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds vector length {}",
            v.len()
        )));
    }
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    Ok(SupportSet::new(order))
}

/// Best k-term approximation: keeps the `k` largest-magnitude entries of `v`
/// and zeros the rest. Among all k-sparse vectors this minimizes the
/// Euclidean distance to `v`.
pub fn best_k_term(v: &DenseVector, k: usize) -> Result<DenseVector> {
    let keep = top_k_support(v, k)?;
    restrict(v, &keep)
}

/// Zeroes every coordinate of `v` outside `s`.
pub fn restrict(v: &DenseVector, s: &SupportSet) -> Result<DenseVector> {
    if let Some(&worst) = s.indices.last() {
        if worst >= v.len() {
            return Err(Error::invalid(format!(
                "support index {worst} out of range for vector of length {}",
                v.len()
            )));
        }
    }
    let mut out = DenseVector::zeros(v.len());
    for i in s.iter() {
        out[i] = v[i];
    }
    Ok(out)
}
