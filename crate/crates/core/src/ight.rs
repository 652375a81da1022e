//! Iterative gradient hard thresholding: θ_t = H_s(θ_{t−1} − η∇L(θ_{t−1})).

use crate::error::{Error, Result};
use crate::losses::{LossModel, ModelBounds};
use crate::vector::{hard_threshold, ParamVector};

#[derive(Debug, Clone)]
pub struct IghtConfig {
    pub sparsity: usize,
    pub step_size: f64,
    pub max_iters: usize,
    /// Relative iterate-change stopping tolerance; None runs all iterations.
    pub stop_tol: Option<f64>,
    /// Starting point; zero vector when None.
    pub init: Option<ParamVector>,
}

impl IghtConfig {
    pub fn new(sparsity: usize, step_size: f64, max_iters: usize) -> Self {
        IghtConfig {
            sparsity,
            step_size,
            max_iters,
            stop_tol: Some(1e-10),
            init: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > dim {
            return Err(Error::invalid(format!(
                "sparsity {} must be in 1..={dim}",
                self.sparsity
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("iteration budget must be at least 1"));
        }
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(Error::invalid("stop tolerance must be positive"));
            }
        }
        if let Some(init) = &self.init {
            if init.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: init.dim(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iteration: usize,
    pub loss: f64,
    /// ‖θ_t − reference‖₂ when a reference vector was supplied.
    pub dist_to_reference: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitTrace {
    pub final_theta: ParamVector,
    pub iters_run: usize,
    pub per_iter: Vec<IterRecord>,
}

/// Runs IGHT on `model`. `reference` is a diagnostics-only comparison point
/// (e.g. the true parameter) recorded in the trace.
pub fn ight_fit_traced(
    model: &LossModel,
    cfg: &IghtConfig,
    reference: Option<&ParamVector>,
) -> Result<FitTrace> {
    cfg.validate(model.data.dim())?;
    let dim = model.data.dim();
    let mut theta = cfg
        .init
        .clone()
        .unwrap_or_else(|| ParamVector::zeros(dim));
    let mut per_iter = Vec::with_capacity(cfg.max_iters.min(4096));
    let mut iters_run = 0;

    for t in 1..=cfg.max_iters {
        let grad = model.gradient(&theta)?;
        let stepped = theta.axpy(-cfg.step_size, &grad);
        let next = hard_threshold(&stepped, cfg.sparsity)?;
        let loss = model.loss_value(&next)?;
        if !loss.is_finite() || !next.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        per_iter.push(IterRecord {
            iteration: t,
            loss,
            dist_to_reference: reference.map(|r| next.sub(r).l2_norm()),
        });
        let change = next.sub(&theta).l2_norm() / theta.l2_norm().max(1.0);
        theta = next;
        iters_run = t;
        if let Some(tol) = cfg.stop_tol {
            if change < tol {
                break;
            }
        }
    }

    Ok(FitTrace {
        final_theta: theta,
        iters_run,
        per_iter,
    })
}

pub fn ight_fit(model: &LossModel, cfg: &IghtConfig) -> Result<FitTrace> {
    ight_fit_traced(model, cfg, None)
}

/// Theory-prescribed step sizes: teacher η₁ = c₃λ/β̄² (or c₃/β̄ when λ = 0),
/// student η₂ = c₄/β̃.
pub fn default_step_sizes(
    bounds: &ModelBounds,
    lambda: f64,
    beta_tilde: f64,
    c3: f64,
    c4: f64,
) -> Result<(f64, f64)> {
    if !(bounds.smoothness > 0.0) {
        return Err(Error::invalid("smoothness bound must be positive"));
    }
    if !(beta_tilde > 0.0) {
        return Err(Error::invalid("beta_tilde must be positive"));
    }
    let eta_teacher = if lambda > 0.0 {
        c3 * lambda / (bounds.smoothness * bounds.smoothness)
    } else {
        c3 / bounds.smoothness
    };
    Ok((eta_teacher, c4 / beta_tilde))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, ExampleRow};
    use crate::losses::LossKind;
    use crate::rng::RngState;
    use approx::assert_relative_eq;

    fn identity_model(y: &[f64]) -> LossModel {
        let d = y.len();
        let rows = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                ExampleRow::dense(v, y[i])
            })
            .collect();
        LossModel::new(LossKind::Linear, Dataset::new(rows, d).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn one_step_on_identity_design() {
        let m = identity_model(&[3.0, -1.0]);
        let mut cfg = IghtConfig::new(1, 2.0, 1);
        cfg.stop_tol = None;
        let fit = ight_fit(&m, &cfg).unwrap();
        assert_eq!(fit.final_theta.values(), &[3.0, 0.0]);

        let mut cfg = IghtConfig::new(2, 2.0, 1);
        cfg.stop_tol = None;
        let fit = ight_fit(&m, &cfg).unwrap();
        assert_eq!(fit.final_theta.values(), &[3.0, -1.0]);
        assert_relative_eq!(fit.per_iter.last().unwrap().loss, 0.0);
    }

    /// Random noiseless instance: compare against least squares restricted to
    /// the true support, solved by normal equations (Gaussian elimination).
    #[test]
    fn exact_recovery_matches_restricted_least_squares() {
        let mut rng = RngState::new(11);
        let (n, d, s_star) = (200, 50, 5);
        let support: Vec<usize> = (0..s_star).map(|i| i * 9 + 2).collect();
        let mut theta_star = vec![0.0; d];
        for &j in &support {
            theta_star[j] = rng.uniform(0.5, 1.5) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        }
        let rows: Vec<ExampleRow> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let y: f64 = x.iter().zip(&theta_star).map(|(a, b)| a * b).sum();
                ExampleRow::dense(x, y)
            })
            .collect();
        let ds = Dataset::new(rows, d).unwrap();
        let model = LossModel::new(LossKind::Linear, ds.clone(), 0.0).unwrap();
        let mut cfg = IghtConfig::new(s_star, 1.5, 500);
        cfg.stop_tol = Some(1e-14);
        let fit = ight_fit(&model, &cfg).unwrap();

        // normal-equations oracle on the true support
        let k = support.len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for r in ds.rows() {
            let xs: Vec<f64> = support.iter().map(|&j| r.to_dense(d)[j]).collect();
            for p in 0..k {
                for q in 0..k {
                    a[p][q] += xs[p] * xs[q];
                }
                a[p][k] += xs[p] * r.label;
            }
        }
        for p in 0..k {
            let piv = a[p][p];
            for q in p..=k {
                a[p][q] /= piv;
            }
            for r2 in 0..k {
                if r2 != p {
                    let f = a[r2][p];
                    for q in p..=k {
                        a[r2][q] -= f * a[p][q];
                    }
                }
            }
        }
        let mut oracle = vec![0.0; d];
        for (p, &j) in support.iter().enumerate() {
            oracle[j] = a[p][k];
        }
        let oracle = ParamVector::new(oracle);

        let err = fit.final_theta.sub(&oracle).l2_norm() / oracle.l2_norm();
        assert!(err <= 1e-6, "relative error {err}");
        assert_eq!(
            fit.final_theta.support().indices(),
            support.as_slice(),
            "support mismatch"
        );
    }

    #[test]
    fn sparsity_invariant_holds_every_iteration() {
        let m = identity_model(&[3.0, -1.0, 0.5, 2.0]);
        let mut cfg = IghtConfig::new(2, 0.5, 50);
        cfg.stop_tol = None;
        let fit = ight_fit(&m, &cfg).unwrap();
        assert!(fit.final_theta.nnz() <= 2);
    }

    #[test]
    fn monotone_loss_with_safe_step() {
        // linear regression with η ≤ 1/β̄: loss non-increasing
        let mut rng = RngState::new(4);
        let d = 10;
        let rows: Vec<ExampleRow> = (0..40)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
                ExampleRow::dense(x, rng.uniform(-1.0, 1.0))
            })
            .collect();
        let model =
            LossModel::new(LossKind::Linear, Dataset::new(rows, d).unwrap(), 0.0).unwrap();
        let beta_bar = model.model_bounds(3, 1.0).unwrap().smoothness;
        let mut cfg = IghtConfig::new(3, 1.0 / beta_bar, 100);
        cfg.stop_tol = None;
        let fit = ight_fit(&model, &cfg).unwrap();
        for w in fit.per_iter.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-12);
        }
    }

    #[test]
    fn divergence_reported_with_iteration() {
        let m = identity_model(&[3.0, -1.0]);
        let mut cfg = IghtConfig::new(2, 1e12, 100);
        cfg.stop_tol = None;
        match ight_fit(&m, &cfg) {
            Err(Error::Diverged { iteration }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn default_step_size_examples() {
        let b = ModelBounds {
            gamma: 1.0,
            smoothness: 30.0,
            inf_norm_bound: 1.0,
        };
        let (e1, e2) = default_step_sizes(&b, 0.15, 1.0 / 3.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(e1, 0.15 / 900.0);
        assert_relative_eq!(e2, 3.0);
        let (e1, _) = default_step_sizes(&b, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(e1, 1.0 / 30.0);
    }
}
