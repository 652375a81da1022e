//! Ridge-regularized least squares and logistic log-loss, with gradients and
//! the model constants consumed by the privacy calibration.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Linear,
    Logistic,
}

#[derive(Debug, Clone)]
pub struct LossModel {
    pub kind: LossKind,
    pub data: Dataset,
    pub ridge_weight: f64,
}

/// Model constants entering the privacy calibration.
#[derive(Debug, Clone, Copy)]
pub struct ModelBounds {
    /// Per-example gradient ℓ∞ bound at the constrained minimizer.
    pub gamma: f64,
    /// Smoothness of the ridge objective restricted to sparse directions.
    pub smoothness: f64,
    pub inf_norm_bound: f64,
}

/// log(1 + exp(z)) without overflow.
pub fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid exp(z)/(1+exp(z)).
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossModel {
    pub fn new(kind: LossKind, data: Dataset, ridge_weight: f64) -> Result<Self> {
        if ridge_weight < 0.0 {
            return Err(Error::invalid("ridge weight must be nonnegative"));
        }
        if data.n() == 0 {
            return Err(Error::invalid("dataset must be nonempty"));
        }
        Ok(LossModel {
            kind,
            data,
            ridge_weight,
        })
    }

    fn check_dim(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: theta.dim(),
            });
        }
        Ok(())
    }

    /// L_S(θ) + (λ/2)‖θ‖₂².
    pub fn loss_value(&self, theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        let n = self.data.n() as f64;
        let data_term = match self.kind {
            LossKind::Linear => {
                let sq: f64 = self
                    .data
                    .rows()
                    .iter()
                    .map(|r| {
                        let e = r.dot(theta) - r.label;
                        e * e
                    })
                    .sum();
                sq / (2.0 * n)
            }
            LossKind::Logistic => {
                let ll: f64 = self
                    .data
                    .rows()
                    .iter()
                    .map(|r| {
                        let z = r.dot(theta);
                        r.label * z - log1p_exp(z)
                    })
                    .sum();
                -ll / n
            }
        };
        let l2 = theta.l2_norm();
        Ok(data_term + 0.5 * self.ridge_weight * l2 * l2)
    }

    /// ∇L_S(θ) + λθ.
    pub fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.check_dim(theta)?;
        let n = self.data.n() as f64;
        let mut g = vec![0.0; theta.dim()];
        match self.kind {
            LossKind::Linear => {
                for r in self.data.rows() {
                    let resid = r.dot(theta) - r.label;
                    r.add_scaled_into(resid / n, &mut g);
                }
            }
            LossKind::Logistic => {
                for r in self.data.rows() {
                    let p = sigmoid(r.dot(theta));
                    r.add_scaled_into(-(r.label - p) / n, &mut g);
                }
            }
        }
        if self.ridge_weight > 0.0 {
            for (gi, ti) in g.iter_mut().zip(theta.values()) {
                *gi += self.ridge_weight * ti;
            }
        }
        Ok(ParamVector::new(g))
    }

    /// ∇ℓ(θ; xᵢ, yᵢ), excluding the ridge term.
    pub fn per_example_gradient(&self, theta: &ParamVector, i: usize) -> Result<ParamVector> {
        self.check_dim(theta)?;
        if i >= self.data.n() {
            return Err(Error::invalid(format!("example index {i} out of range")));
        }
        let r = &self.data.rows()[i];
        let scale = match self.kind {
            LossKind::Linear => r.dot(theta) - r.label,
            LossKind::Logistic => -(r.label - sigmoid(r.dot(theta))),
        };
        let mut g = vec![0.0; theta.dim()];
        r.add_scaled_into(scale, &mut g);
        Ok(ParamVector::new(g))
    }

    /// Analytic γ and restricted smoothness at sparsity `s`.
    ///
    /// Linear: γ = c_γ·√s·K², smoothness 3sK² + λ.
    /// Logistic: γ = K, smoothness 3sK + λ.
    pub fn model_bounds(&self, s: usize, c_gamma: f64) -> Result<ModelBounds> {
        if s == 0 {
            return Err(Error::invalid("sparsity level must be at least 1"));
        }
        let k = self.data.inf_norm_bound();
        if k == 0.0 {
            return Err(Error::invalid("all-zero dataset: K = 0"));
        }
        let s = s as f64;
        let (gamma, smoothness) = match self.kind {
            LossKind::Linear => (c_gamma * s.sqrt() * k * k, 3.0 * s * k * k + self.ridge_weight),
            LossKind::Logistic => (k, 3.0 * s * k + self.ridge_weight),
        };
        Ok(ModelBounds {
            gamma,
            smoothness,
            inf_norm_bound: k,
        })
    }

    /// Same model with a different ridge weight.
    pub fn with_ridge(&self, ridge_weight: f64) -> LossModel {
        LossModel {
            kind: self.kind,
            data: self.data.clone(),
            ridge_weight,
        }
    }
}
