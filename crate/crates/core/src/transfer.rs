//! The teacher → synthetic data → student pipeline (DPSL-KT).

use std::collections::BTreeMap;

use serde_json::json;

use crate::data::{Dataset, ExampleRow};
use crate::error::{Error, Result};
use crate::ight::{ight_fit_traced, FitTrace, IghtConfig};
use crate::losses::{LossKind, LossModel};
use crate::privacy::{
    calibrate_sigma, gaussian_mechanism, lambda_rule, PrivacyParams, PrivacyReceipt,
    SensitivityInputs, StrongConvexity,
};
use crate::rng::RngState;
use crate::vector::ParamVector;

#[derive(Debug, Clone)]
pub enum SyntheticKind {
    /// Entries i.i.d. U(−1, 1); covariance spectral bound exactly 1/3.
    UniformPm1,
    /// Entries i.i.d. N(0, τ²).
    GaussianIso { tau2: f64 },
    /// Resample rows of a public pool; spectral bound estimated.
    Empirical { pool: Vec<ExampleRow> },
}

#[derive(Debug, Clone)]
pub struct SyntheticDistribution {
    pub kind: SyntheticKind,
    pub dim: usize,
}

impl SyntheticDistribution {
    pub fn uniform_pm1(dim: usize) -> Self {
        SyntheticDistribution {
            kind: SyntheticKind::UniformPm1,
            dim,
        }
    }

    pub fn gaussian_iso(dim: usize, tau2: f64) -> Self {
        SyntheticDistribution {
            kind: SyntheticKind::GaussianIso { tau2 },
            dim,
        }
    }

    pub fn empirical(pool: Vec<ExampleRow>, dim: usize) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::invalid("empirical pool must be nonempty"));
        }
        Ok(SyntheticDistribution {
            kind: SyntheticKind::Empirical { pool },
            dim,
        })
    }

    /// Spectral bound β̃ on the feature covariance: exact for named
    /// distributions, estimated from the pool for Empirical.
    pub fn beta_tilde(&self) -> Result<f64> {
        match &self.kind {
            SyntheticKind::UniformPm1 => Ok(1.0 / 3.0),
            SyntheticKind::GaussianIso { tau2 } => Ok(*tau2),
            SyntheticKind::Empirical { pool } => estimate_beta_tilde(pool, self.dim),
        }
    }
}

/// Draws `m` synthetic feature rows (labels zeroed).
pub fn sample_synthetic_features(
    synth: &SyntheticDistribution,
    m: usize,
    rng: &mut RngState,
) -> Result<Vec<ExampleRow>> {
    if m == 0 {
        return Err(Error::invalid("synthetic sample count must be at least 1"));
    }
    let d = synth.dim;
    let rows = match &synth.kind {
        SyntheticKind::UniformPm1 => (0..m)
            .map(|_| ExampleRow::dense((0..d).map(|_| rng.uniform(-1.0, 1.0)).collect(), 0.0))
            .collect(),
        SyntheticKind::GaussianIso { tau2 } => {
            let std = tau2.sqrt();
            (0..m)
                .map(|_| ExampleRow::dense((0..d).map(|_| rng.normal(0.0, std)).collect(), 0.0))
                .collect()
        }
        SyntheticKind::Empirical { pool } => (0..m)
            .map(|_| {
                let mut row = pool[rng.below(pool.len())].clone();
                row.label = 0.0;
                row
            })
            .collect(),
    };
    Ok(rows)
}

/// Largest eigenvalue of the sample covariance (1/m)Σ(xᵢ−x̄)(xᵢ−x̄)ᵀ,
/// by power iteration to relative tolerance 1e-6.
pub fn estimate_beta_tilde(rows: &[ExampleRow], dim: usize) -> Result<f64> {
    estimate_spectral(rows, dim, 1e-6, 2000)
}

/// Loose, cheap spectral estimate used only for step sizing (a few percent
/// of error in a step size is immaterial; calibration uses the tight one).
pub fn estimate_spectral_step(rows: &[ExampleRow], dim: usize) -> Result<f64> {
    estimate_spectral(rows, dim, 1e-3, 100)
}

fn estimate_spectral(rows: &[ExampleRow], dim: usize, tol: f64, max_iters: usize) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::invalid("need at least 2 rows to estimate covariance"));
    }
    let m = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        r.add_scaled_into(1.0 / m, &mut mean);
    }
    // matvec: v ↦ (1/m)[Σ xᵢ⟨xᵢ,v⟩ − m·x̄⟨x̄,v⟩]
    let matvec = |v: &[f64]| -> Vec<f64> {
        let vp = ParamVector::new(v.to_vec());
        let mut out = vec![0.0; dim];
        for r in rows {
            let ip = r.dot(&vp);
            r.add_scaled_into(ip / m, &mut out);
        }
        let mean_ip: f64 = mean.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, mi) in out.iter_mut().zip(&mean) {
            *o -= mean_ip * mi;
        }
        out
    };

    let mut init_rng = RngState::new(0x9e11_a7e0);
    let mut v: Vec<f64> = (0..dim).map(|_| init_rng.normal(0.0, 1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    let mut eig = 0.0;
    for _ in 0..max_iters {
        let w = matvec(&v);
        let new_eig: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let wnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wnorm < 1e-300 {
            return Ok(0.0); // zero covariance (all rows identical)
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wnorm;
        }
        if (new_eig - eig).abs() <= tol * new_eig.abs().max(1e-300) {
            return Ok(new_eig.max(0.0));
        }
        eig = new_eig;
    }
    Ok(eig.max(0.0))
}

/// yᵢᵖ = ⟨teacher, x̃ᵢ⟩ + ξᵢ with ξᵢ ~ N(0, σ²).
pub fn generate_private_responses(
    teacher: &ParamVector,
    rows: &[ExampleRow],
    sigma2: f64,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    let preds: Vec<f64> = rows.iter().map(|r| r.dot(teacher)).collect();
    gaussian_mechanism(&preds, sigma2, rng)
}

/// L̃(θ) = (1/2m)Σ(yᵢᵖ − ⟨θ, x̃ᵢ⟩)²; no ridge term.
pub fn build_student_loss(rows: &[ExampleRow], responses: &[f64], dim: usize) -> Result<LossModel> {
    if rows.len() != responses.len() {
        return Err(Error::invalid("row / response count mismatch"));
    }
    if rows.is_empty() {
        return Err(Error::invalid("student task needs at least one example"));
    }
    let labeled: Vec<ExampleRow> = rows
        .iter()
        .zip(responses)
        .map(|(r, &y)| {
            let mut row = r.clone();
            row.label = y;
            row
        })
        .collect();
    LossModel::new(LossKind::Linear, Dataset::new(labeled, dim)?, 0.0)
}

#[derive(Debug, Clone)]
pub enum LambdaMode {
    /// λ² = c·γ·√(s*·ln d·ln(1/δ))/(n·ε).
    Rule { c: f64 },
    Explicit(f64),
    /// λ = 0; sensitivity divides by the supplied RSC constant μ.
    Rsc { mu: f64 },
}

/// Step-size policy for the two IGHT runs.
#[derive(Debug, Clone, Copy)]
pub enum StepRule {
    /// Use the step sizes in the IghtConfigs as given.
    Fixed,
    /// η = c / (spectral norm of the sample feature covariance + λ),
    /// estimated by power iteration on the actual rows.
    CovarianceScaled { c: f64 },
}

#[derive(Debug, Clone)]
pub struct TransferConfig {
    pub teacher: IghtConfig,
    pub student: IghtConfig,
    pub synth: SyntheticDistribution,
    /// Synthetic sample count (the paper's default regime is m = n).
    pub m: usize,
    pub privacy: PrivacyParams,
    pub lambda_mode: LambdaMode,
    pub step_rule: StepRule,
    /// Constant in the linear-model γ bound c_γ·√s·K².
    pub c_gamma: f64,
    /// Enforced sample-size precondition m ≥ min_m_factor·s·ln d.
    pub min_m_factor: f64,
    /// Inflation applied to an estimated β̃ before calibration.
    pub beta_safety: f64,
    /// Testing hook: bypass calibration with a fixed σ².
    pub sigma2_override: Option<f64>,
    pub seed: u64,
}

impl TransferConfig {
    pub fn new(
        teacher: IghtConfig,
        student: IghtConfig,
        synth: SyntheticDistribution,
        m: usize,
        privacy: PrivacyParams,
        lambda_mode: LambdaMode,
        seed: u64,
    ) -> Self {
        TransferConfig {
            teacher,
            student,
            synth,
            m,
            privacy,
            lambda_mode,
            step_rule: StepRule::Fixed,
            c_gamma: 1.0,
            min_m_factor: 4.0,
            beta_safety: 1.1,
            sigma2_override: None,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    /// The private output θᵖ (safe to release together with the receipt).
    pub theta_p: ParamVector,
    /// NOT private: retained only for offline diagnostics.
    pub teacher_theta: ParamVector,
    pub receipt: PrivacyReceipt,
    pub teacher_trace: FitTrace,
    pub student_trace: FitTrace,
}

impl TransferResult {
    pub fn to_json(&self, private_only: bool) -> serde_json::Value {
        let mut doc = json!({
            "theta_p": self.theta_p.values(),
            "support": self.theta_p.support().indices(),
            "receipt": serde_json::to_value(&self.receipt).expect("receipt serializes"),
        });
        if !private_only {
            doc["teacher_theta"] = json!(self.teacher_theta.values());
            doc["traces"] = json!({
                "teacher": self.teacher_trace.per_iter.iter().map(|r| r.loss).collect::<Vec<_>>(),
                "student": self.student_trace.per_iter.iter().map(|r| r.loss).collect::<Vec<_>>(),
            });
        }
        doc
    }
}

/// Algorithm: teacher IGHT on the ridge loss, synthetic features from D̃,
/// Gaussian-mechanism responses, student IGHT on the synthetic task.
pub fn run_dpsl_kt(
    private_data: &Dataset,
    model_kind: LossKind,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    let d = private_data.dim();
    let n = private_data.n();
    let s = cfg.teacher.sparsity;
    if cfg.synth.dim != d {
        return Err(Error::Config(format!(
            "synthetic distribution dimension {} does not match data dimension {d}",
            cfg.synth.dim
        )));
    }
    let min_m = (cfg.min_m_factor * s as f64 * (d as f64).ln()).ceil() as usize;
    if cfg.m < min_m {
        return Err(Error::Config(format!(
            "m = {} violates the sample-size precondition m >= {min_m} (= {}·s·ln d)",
            cfg.m, cfg.min_m_factor
        )));
    }

    // gamma does not depend on lambda, so the rule can be evaluated first
    let probe = LossModel::new(model_kind, private_data.clone(), 0.0)?;
    let gamma = probe.model_bounds(s, cfg.c_gamma)?.gamma;
    let (lambda, convexity) = match &cfg.lambda_mode {
        LambdaMode::Rule { c } => {
            let l = lambda_rule(gamma, s, d, n, &cfg.privacy, *c)?;
            (l, StrongConvexity::Ridge(l))
        }
        LambdaMode::Explicit(l) => {
            if !(*l > 0.0) {
                return Err(Error::Config(
                    "explicit lambda must be positive in ridge mode".into(),
                ));
            }
            (*l, StrongConvexity::Ridge(*l))
        }
        LambdaMode::Rsc { mu } => {
            if !(*mu > 0.0) {
                return Err(Error::Config("rsc constant must be positive".into()));
            }
            (0.0, StrongConvexity::Rsc(*mu))
        }
    };

    let teacher_model = LossModel::new(model_kind, private_data.clone(), lambda)?;

    let mut teacher_cfg = cfg.teacher.clone();
    let root = RngState::new(cfg.seed);
    let mut synth_rng = root.split_label("synthetic-features");
    let mut noise_rng = root.split_label("response-noise");

    let synthetic_rows = sample_synthetic_features(&cfg.synth, cfg.m, &mut synth_rng)?;

    if let StepRule::CovarianceScaled { c } = cfg.step_rule {
        let data_spec = estimate_spectral_step(private_data.rows(), d)?;
        // logistic curvature is at most 1/4 of the quadratic case
        let curvature = match model_kind {
            LossKind::Linear => data_spec,
            LossKind::Logistic => 0.25 * data_spec,
        };
        teacher_cfg.step_size = c / (curvature + lambda).max(1e-12);
    }

    let teacher_trace = ight_fit_traced(&teacher_model, &teacher_cfg, None)?;
    let teacher_theta = teacher_trace.final_theta.clone();

    let beta_tilde = {
        let raw = cfg.synth.beta_tilde()?;
        match cfg.synth.kind {
            SyntheticKind::Empirical { .. } => raw * cfg.beta_safety,
            _ => raw,
        }
    };
    if !(beta_tilde > 0.0) {
        return Err(Error::Config("synthetic covariance bound is zero".into()));
    }

    let inputs = SensitivityInputs {
        m: cfg.m,
        n,
        s,
        beta_tilde,
        gamma,
        strong_convexity: convexity,
    };
    let sigma2 = match cfg.sigma2_override {
        Some(v) => v,
        None => calibrate_sigma(&cfg.privacy, &inputs)?,
    };

    let responses = generate_private_responses(&teacher_theta, &synthetic_rows, sigma2, &mut noise_rng)?;
    let student_model = build_student_loss(&synthetic_rows, &responses, d)?;

    let mut student_cfg = cfg.student.clone();
    if let StepRule::CovarianceScaled { c } = cfg.step_rule {
        let synth_spec = estimate_spectral_step(student_model.data.rows(), d)?;
        student_cfg.step_size = c / synth_spec.max(1e-12);
    }
    let student_trace = ight_fit_traced(&student_model, &student_cfg, None)?;
    let theta_p = student_trace.final_theta.clone();

    let mut constants = BTreeMap::new();
    constants.insert("c_gamma".to_string(), cfg.c_gamma);
    constants.insert("min_m_factor".to_string(), cfg.min_m_factor);
    constants.insert("beta_safety".to_string(), cfg.beta_safety);
    if let LambdaMode::Rule { c } = cfg.lambda_mode {
        constants.insert("lambda_c".to_string(), c);
    }
    constants.insert("teacher_step".to_string(), teacher_cfg.step_size);
    constants.insert("student_step".to_string(), student_cfg.step_size);
    if cfg.sigma2_override.is_some() {
        constants.insert("sigma2_override".to_string(), sigma2);
    }
    let mut receipt = PrivacyReceipt::build(&cfg.privacy, &inputs, constants)?;
    receipt.sigma2 = sigma2; // reflects the override when the testing hook is used

    Ok(TransferResult {
        theta_p,
        teacher_theta,
        receipt,
        teacher_trace,
        student_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_sample_moments() {
        let synth = SyntheticDistribution::uniform_pm1(1);
        let mut rng = RngState::new(21);
        let rows = sample_synthetic_features(&synth, 100_000, &mut rng).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.to_dense(1)[0]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((0.323..=0.343).contains(&var), "variance {var}");
        assert!(vals.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn gaussian_sample_moments() {
        let synth = SyntheticDistribution::gaussian_iso(1, 1.0);
        let mut rng = RngState::new(22);
        let rows = sample_synthetic_features(&synth, 100_000, &mut rng).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.to_dense(1)[0]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!((0.97..=1.03).contains(&var), "variance {var}");
    }

    #[test]
    fn empirical_sampling_is_closed_over_pool() {
        let pool = vec![
            ExampleRow::dense(vec![1.0, 0.0], 0.0),
            ExampleRow::dense(vec![0.0, 1.0], 0.0),
            ExampleRow::dense(vec![0.5, 0.5], 0.0),
        ];
        let synth = SyntheticDistribution::empirical(pool.clone(), 2).unwrap();
        let mut rng = RngState::new(23);
        let rows = sample_synthetic_features(&synth, 50, &mut rng).unwrap();
        for r in &rows {
            assert!(pool.iter().any(|p| p.features == r.features));
        }
        assert!(SyntheticDistribution::empirical(vec![], 2).is_err());
    }

    #[test]
    fn beta_tilde_rank_one() {
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push(ExampleRow::dense(vec![1.0, 0.0], 0.0));
            rows.push(ExampleRow::dense(vec![-1.0, 0.0], 0.0));
        }
        let b = estimate_beta_tilde(&rows, 2).unwrap();
        assert!((b - 1.0).abs() <= 1e-6, "beta {b}");
    }

    #[test]
    fn beta_tilde_identical_rows_is_zero() {
        let rows = vec![ExampleRow::dense(vec![0.7, -0.2], 0.0); 8];
        assert_eq!(estimate_beta_tilde(&rows, 2).unwrap(), 0.0);
    }

    #[test]
    fn beta_tilde_uniform_concentrates() {
        let synth = SyntheticDistribution::uniform_pm1(5);
        let mut rng = RngState::new(77);
        let rows = sample_synthetic_features(&synth, 100_000, &mut rng).unwrap();
        let b = estimate_beta_tilde(&rows, 5).unwrap();
        assert!((0.31..=0.36).contains(&b), "beta {b}");
    }

    #[test]
    fn responses_zero_noise_inner_product() {
        let teacher = ParamVector::new(vec![1.0, -1.0]);
        let rows = vec![ExampleRow::dense(vec![2.0, 3.0], 0.0)];
        let mut rng = RngState::new(1);
        let y = generate_private_responses(&teacher, &rows, 0.0, &mut rng).unwrap();
        assert_relative_eq!(y[0], -1.0);
    }

    #[test]
    fn responses_pure_noise_moments() {
        let teacher = ParamVector::zeros(2);
        let rows = vec![ExampleRow::dense(vec![1.0, 1.0], 0.0); 100_000];
        let mut rng = RngState::new(2);
        let y = generate_private_responses(&teacher, &rows, 4.0, &mut rng).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
        assert!(mean.abs() < 0.04, "mean {mean}");
        assert!((3.88..=4.12).contains(&var), "variance {var}");
    }

    #[test]
    fn responses_deterministic_under_seed() {
        let teacher = ParamVector::new(vec![0.5, 0.5]);
        let rows = vec![ExampleRow::dense(vec![1.0, 2.0], 0.0); 4];
        let a = generate_private_responses(&teacher, &rows, 1.0, &mut RngState::new(9)).unwrap();
        let b = generate_private_responses(&teacher, &rows, 1.0, &mut RngState::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn student_loss_interpolates_teacher_at_zero_noise() {
        let teacher = ParamVector::new(vec![1.0, -2.0, 0.0]);
        let synth = SyntheticDistribution::uniform_pm1(3);
        let mut rng = RngState::new(4);
        let rows = sample_synthetic_features(&synth, 30, &mut rng).unwrap();
        let y = generate_private_responses(&teacher, &rows, 0.0, &mut rng).unwrap();
        let model = build_student_loss(&rows, &y, 3).unwrap();
        let g = model.gradient(&teacher).unwrap();
        assert!(g.l2_norm() < 1e-12, "gradient norm {}", g.l2_norm());
        // loss at zero equals (1/2m)Σ(yᵖ)²
        let at_zero = model.loss_value(&ParamVector::zeros(3)).unwrap();
        let expected = y.iter().map(|v| v * v).sum::<f64>() / (2.0 * y.len() as f64);
        assert_relative_eq!(at_zero, expected, epsilon = 1e-12);
        assert!(build_student_loss(&rows, &y[..5], 3).is_err());
    }
}
