//! Example rows and datasets, dense or sparse.

use crate::error::{Error, Result};
use crate::vector::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Vec<f64>),
    /// Strictly ascending indices; values finite.
    Sparse(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRow {
    pub features: Features,
    pub label: f64,
}

impl ExampleRow {
    pub fn dense(values: Vec<f64>, label: f64) -> Self {
        ExampleRow {
            features: Features::Dense(values),
            label,
        }
    }

    pub fn sparse(entries: Vec<(usize, f64)>, label: f64) -> Result<Self> {
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("sparse indices must be strictly ascending"));
            }
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("sparse values must be finite"));
        }
        Ok(ExampleRow {
            features: Features::Sparse(entries),
            label,
        })
    }

    pub fn dot(&self, theta: &ParamVector) -> f64 {
        match &self.features {
            Features::Dense(v) => v.iter().zip(theta.values()).map(|(a, b)| a * b).sum(),
            Features::Sparse(e) => e.iter().map(|&(i, v)| v * theta.values()[i]).sum(),
        }
    }

    /// out += scale * x_i
    pub fn add_scaled_into(&self, scale: f64, out: &mut [f64]) {
        match &self.features {
            Features::Dense(v) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += scale * x;
                }
            }
            Features::Sparse(e) => {
                for &(i, v) in e {
                    out[i] += scale * v;
                }
            }
        }
    }

    pub fn linf_norm(&self) -> f64 {
        match &self.features {
            Features::Dense(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Features::Sparse(e) => e.iter().fold(0.0, |m, &(_, x)| m.max(x.abs())),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        match &self.features {
            Features::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Features::Sparse(e) => e.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        match &self.features {
            Features::Dense(v) => v.clone(),
            Features::Sparse(e) => {
                let mut out = vec![0.0; dim];
                for &(i, v) in e {
                    out[i] = v;
                }
                out
            }
        }
    }

    fn max_index_exclusive(&self) -> usize {
        match &self.features {
            Features::Dense(v) => v.len(),
            Features::Sparse(e) => e.last().map(|&(i, _)| i + 1).unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    rows: Vec<ExampleRow>,
    dim: usize,
    /// K = max over rows of ‖xᵢ‖∞, recomputed on construction.
    inf_norm_bound: f64,
}

impl Dataset {
    pub fn new(rows: Vec<ExampleRow>, dim: usize) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            let need = row.max_index_exclusive();
            if need > dim {
                return Err(Error::invalid(format!(
                    "row {k} has feature index beyond dimension {dim}"
                )));
            }
            if let Features::Dense(v) = &row.features {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
            }
        }
        let inf_norm_bound = rows.iter().fold(0.0f64, |m, r| m.max(r.linf_norm()));
        Ok(Dataset {
            rows,
            dim,
            inf_norm_bound,
        })
    }

    pub fn rows(&self) -> &[ExampleRow] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inf_norm_bound(&self) -> f64 {
        self.inf_norm_bound
    }

    pub fn max_row_l2(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |m, r| m.max(r.l2_norm()))
    }

    /// New dataset with row `i` replaced (adjacent dataset in the DP sense).
    pub fn with_replaced_row(&self, i: usize, row: ExampleRow) -> Result<Dataset> {
        if i >= self.n() {
            return Err(Error::invalid(format!("row index {i} out of range")));
        }
        let mut rows = self.rows.clone();
        rows[i] = row;
        Dataset::new(rows, self.dim)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Dataset::new(rows, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_rows_validate_order() {
        assert!(ExampleRow::sparse(vec![(0, 1.0), (2, 3.0)], 1.0).is_ok());
        assert!(ExampleRow::sparse(vec![(2, 1.0), (0, 3.0)], 1.0).is_err());
        assert!(ExampleRow::sparse(vec![(1, 1.0), (1, 3.0)], 1.0).is_err());
    }

    #[test]
    fn inf_norm_recomputed_on_load() {
        let ds = Dataset::new(
            vec![
                ExampleRow::dense(vec![1.0, -3.0], 0.0),
                ExampleRow::dense(vec![2.0, 0.5], 1.0),
            ],
            2,
        )
        .unwrap();
        assert_eq!(ds.inf_norm_bound(), 3.0);
    }

    #[test]
    fn sparse_dense_dot_agree() {
        let theta = ParamVector::new(vec![1.0, 2.0, 3.0]);
        let dense = ExampleRow::dense(vec![0.0, 4.0, -1.0], 0.0);
        let sparse = ExampleRow::sparse(vec![(1, 4.0), (2, -1.0)], 0.0).unwrap();
        assert_eq!(dense.dot(&theta), sparse.dot(&theta));
    }
}
