//! Dense parameter vectors, support sets, and the hard-thresholding operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn support(&self) -> SupportSet {
        SupportSet {
            indices: (0..self.dim()).filter(|&i| self.values[i] != 0.0).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// self + scale * other
    pub fn axpy(&self, scale: f64, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn scale(&self, scale: f64) -> ParamVector {
        ParamVector::new(self.values.iter().map(|v| v * scale).collect())
    }
}

/// Sorted index set of nonzero coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Builds a support set from arbitrary indices; sorts and deduplicates.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn intersection_size(&self, other: &SupportSet) -> usize {
        let mut count = 0;
        let mut it = other.indices.iter().peekable();
        for &i in &self.indices {
            while let Some(&&j) = it.peek() {
                if j < i {
                    it.next();
                } else {
                    break;
                }
            }
            if it.peek() == Some(&&i) {
                count += 1;
            }
        }
        count
    }
}

/// Indices of the `s` largest-magnitude entries, ties broken toward the
/// lower index. Entries that are exactly zero are never selected.
fn top_s_indices(values: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .expect("non-finite entry in hard threshold")
    });
    order.truncate(s);
    order
}

/// Keeps the `s` largest-magnitude entries of `v`, zeroing the rest.
pub fn hard_threshold(v: &ParamVector, s: usize) -> Result<ParamVector> {
    let d = v.dim();
    if s > d {
        return Err(Error::invalid(format!(
            "sparsity level {s} exceeds dimension {d}"
        )));
    }
    let keep = top_s_indices(v.values(), s);
    let mut out = vec![0.0; d];
    for i in keep {
        out[i] = v.values()[i];
    }
    Ok(ParamVector::new(out))
}

/// Support of the hard-thresholded vector: the top `s` nonzero entries by
/// magnitude. Returns fewer than `s` indices when `v` has fewer nonzeros.
pub fn top_s_support(v: &ParamVector, s: usize) -> Result<SupportSet> {
    let d = v.dim();
    if s > d {
        return Err(Error::invalid(format!(
            "sparsity level {s} exceeds dimension {d}"
        )));
    }
    Ok(SupportSet::from_indices(top_s_indices(v.values(), s)))
}

/// ‖est − truth‖₂ / ‖truth‖₂.
pub fn relative_estimation_error(est: &ParamVector, truth: &ParamVector) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: est.dim(),
        });
    }
    let denom = truth.l2_norm();
    if denom == 0.0 {
        return Err(Error::invalid("truth vector has zero norm"));
    }
    Ok(est.sub(truth).l2_norm() / denom)
}

/// F1 = 2·|est∩truth| / (|est| + |truth|); 1 when both are empty.
pub fn support_f1(est: &SupportSet, truth: &SupportSet) -> f64 {
    if est.is_empty() && truth.is_empty() {
        return 1.0;
    }
    let inter = est.intersection_size(truth) as f64;
    2.0 * inter / (est.len() + truth.len()) as f64
}
