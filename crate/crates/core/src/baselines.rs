//! Comparison methods: non-private IGHT and a gradient-perturbation DP-IGHT.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ight::{ight_fit, FitTrace, IghtConfig, IterRecord};
use crate::losses::LossModel;
use crate::privacy::{PrivacyParams, PrivacyReceipt};
use crate::rng::RngState;
use crate::vector::{hard_threshold, ParamVector};

/// Thin alias so method tables name the non-private baseline distinctly.
pub fn nonprivate_ight(model: &LossModel, cfg: &IghtConfig) -> Result<FitTrace> {
    ight_fit(model, cfg)
}

#[derive(Debug, Clone)]
pub struct DpIghtConfig {
    pub sparsity: usize,
    pub step_size: f64,
    pub max_iters: usize,
    pub privacy: PrivacyParams,
    /// Per-example gradient ℓ₂ clipping bound K̃.
    pub clip_l2: f64,
    pub seed: u64,
}

impl DpIghtConfig {
    pub fn new(
        sparsity: usize,
        step_size: f64,
        max_iters: usize,
        privacy: PrivacyParams,
        clip_l2: f64,
        seed: u64,
    ) -> Self {
        DpIghtConfig {
            sparsity,
            step_size,
            max_iters,
            privacy,
            clip_l2,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sparsity == 0 || self.max_iters == 0 {
            return Err(Error::invalid("sparsity and iteration count must be positive"));
        }
        if !(self.step_size > 0.0) || !(self.clip_l2 > 0.0) {
            return Err(Error::invalid("step size and clip bound must be positive"));
        }
        Ok(())
    }
}

/// Per-iteration noise scale under simple (ε/T, δ/T) composition:
/// σ_t = √(2·ln(1.25·T/δ)) · (2K̃/n) · (T/ε).
pub fn dp_ight_sigma_t(pp: &PrivacyParams, n: usize, clip_l2: f64, iters: usize) -> f64 {
    let t = iters as f64;
    (2.0 * (1.25 * t / pp.delta).ln()).sqrt() * (2.0 * clip_l2 / n as f64) * (t / pp.epsilon)
}

/// Gradient-perturbation baseline: per iteration the per-example gradients are
/// ℓ₂-clipped to K̃, averaged, perturbed with N(0, σ_t²·I), stepped and
/// hard-thresholded. Simple composition over T iterations gives (ε, δ)-DP.
pub fn dp_ight(model: &LossModel, cfg: &DpIghtConfig) -> Result<(FitTrace, PrivacyReceipt)> {
    cfg.validate()?;
    let dim = model.data.dim();
    let n = model.data.n();
    if cfg.sparsity > dim {
        return Err(Error::invalid(format!(
            "sparsity {} must be in 1..={dim}",
            cfg.sparsity
        )));
    }
    let sigma_t = dp_ight_sigma_t(&cfg.privacy, n, cfg.clip_l2, cfg.max_iters);
    let mut rng = RngState::new(cfg.seed).split_label("dp-ight-noise");

    let mut theta = ParamVector::zeros(dim);
    let mut per_iter = Vec::with_capacity(cfg.max_iters);
    // per-example gradients are coef·xᵢ for both losses, so clipping only
    // needs the coefficient and the (precomputed) row norm
    let row_norms: Vec<f64> = model.data.rows().iter().map(|r| r.l2_norm()).collect();
    for t in 1..=cfg.max_iters {
        let mut avg = vec![0.0; dim];
        for (row, &row_norm) in model.data.rows().iter().zip(&row_norms) {
            let coef = match model.kind {
                crate::losses::LossKind::Linear => row.dot(&theta) - row.label,
                crate::losses::LossKind::Logistic => {
                    crate::losses::sigmoid(row.dot(&theta)) - row.label
                }
            };
            let norm = coef.abs() * row_norm;
            let scale = if norm > cfg.clip_l2 {
                cfg.clip_l2 / norm
            } else {
                1.0
            };
            row.add_scaled_into(scale * coef / n as f64, &mut avg);
        }
        if model.ridge_weight > 0.0 {
            // data-independent term: added after clipping, outside the noise scale
            for (a, ti) in avg.iter_mut().zip(theta.values()) {
                *a += model.ridge_weight * ti;
            }
        }
        if sigma_t > 0.0 {
            for a in avg.iter_mut() {
                *a += rng.normal(0.0, sigma_t);
            }
        }
        let stepped = theta.axpy(-cfg.step_size, &ParamVector::new(avg));
        let next = hard_threshold(&stepped, cfg.sparsity)?;
        let loss = model.loss_value(&next)?;
        if !loss.is_finite() || !next.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        per_iter.push(IterRecord {
            iteration: t,
            loss,
            dist_to_reference: None,
        });
        theta = next;
    }

    let mut constants = BTreeMap::new();
    constants.insert("iterations".to_string(), cfg.max_iters as f64);
    constants.insert("clip_l2".to_string(), cfg.clip_l2);
    constants.insert("per_iter_epsilon".to_string(), cfg.privacy.epsilon / cfg.max_iters as f64);
    constants.insert("per_iter_delta".to_string(), cfg.privacy.delta / cfg.max_iters as f64);
    constants.insert("sigma_t".to_string(), sigma_t);
    constants.insert("step_size".to_string(), cfg.step_size);
    let receipt = PrivacyReceipt {
        epsilon: cfg.privacy.epsilon,
        delta: cfg.privacy.delta,
        m: 0, // no synthetic samples in this mechanism
        n,
        s: cfg.sparsity,
        beta_tilde: 0.0,
        gamma: cfg.clip_l2,
        mode: "dp-ight-simple-composition".to_string(),
        rho: 0.0,
        sensitivity_bound: 2.0 * cfg.clip_l2 / n as f64,
        sigma2: sigma_t * sigma_t,
        constants,
    };

    Ok((
        FitTrace {
            final_theta: theta,
            iters_run: cfg.max_iters,
            per_iter,
        },
        receipt,
    ))
}
