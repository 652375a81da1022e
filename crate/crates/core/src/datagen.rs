//! Synthetic benchmark generation: uniform design, sparse ground truth,
//! Gaussian-noise regression labels or Bernoulli classification labels.

use crate::data::{Dataset, ExampleRow};
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::rng::RngState;
use crate::vector::ParamVector;

/// Which way the logit enters the label probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSign {
    /// P(y = 1) = ψ(⟨x, θ*⟩) — matches the logistic model the losses fit.
    Standard,
    /// P(y = 1) = 1/(1 + exp(⟨x, θ*⟩)) = ψ(−⟨x, θ*⟩); the fitted
    /// parameter then targets −θ*.
    Flipped,
}

#[derive(Debug, Clone, Copy)]
pub enum TaskSpec {
    /// y = ⟨x, θ*⟩ + N(0, ν²).
    LinearNoise { noise_var: f64 },
    LogisticLabels { sign: LabelSign },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub s_star: usize,
    pub task: TaskSpec,
    /// Scale θ* to unit ℓ₂ norm. Off by default: raw U(−1,1) nonzeros give
    /// ‖θ*‖₂ ≈ √(s*/3), so the same label-noise level yields a smaller
    /// relative error floor for non-private recovery.
    pub normalize_theta: bool,
}

impl SynthSpec {
    pub fn linear(n: usize, d: usize, s_star: usize, noise_var: f64) -> Self {
        SynthSpec {
            n,
            d,
            s_star,
            task: TaskSpec::LinearNoise { noise_var },
            normalize_theta: false,
        }
    }

    pub fn logistic(n: usize, d: usize, s_star: usize) -> Self {
        SynthSpec {
            n,
            d,
            s_star,
            task: TaskSpec::LogisticLabels {
                sign: LabelSign::Standard,
            },
            normalize_theta: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.s_star == 0 {
            return Err(Error::invalid("n, d, s_star must be positive"));
        }
        if self.s_star > self.d {
            return Err(Error::invalid(format!(
                "s_star {} exceeds dimension {}",
                self.s_star, self.d
            )));
        }
        if let TaskSpec::LinearNoise { noise_var } = self.task {
            if noise_var < 0.0 || !noise_var.is_finite() {
                return Err(Error::invalid("noise variance must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Draws (X, y, θ*) from the spec. Design, support, values, and label noise
/// use disjoint streams of `rng`, so e.g. changing the noise variance leaves
/// the design matrix untouched.
pub fn generate(spec: &SynthSpec, rng: &RngState) -> Result<(Dataset, ParamVector)> {
    spec.validate()?;
    let mut design_rng = rng.split_label("design");
    let mut support_rng = rng.split_label("support");
    let mut values_rng = rng.split_label("values");
    let mut noise_rng = rng.split_label("noise");

    // uniformly random s*-subset by partial Fisher-Yates
    let mut indices: Vec<usize> = (0..spec.d).collect();
    for i in 0..spec.s_star {
        let j = i + support_rng.below(spec.d - i);
        indices.swap(i, j);
    }
    let mut theta = vec![0.0; spec.d];
    for &j in &indices[..spec.s_star] {
        let mut v = 0.0;
        while v == 0.0 {
            v = values_rng.uniform(-1.0, 1.0);
        }
        theta[j] = v;
    }
    if spec.normalize_theta {
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        for t in theta.iter_mut() {
            *t /= norm;
        }
    }
    let theta_star = ParamVector::new(theta);

    let rows: Vec<ExampleRow> = (0..spec.n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.d).map(|_| design_rng.uniform(-1.0, 1.0)).collect();
            let z: f64 = x.iter().zip(theta_star.values()).map(|(a, b)| a * b).sum();
            let label = match spec.task {
                TaskSpec::LinearNoise { noise_var } => {
                    if noise_var > 0.0 {
                        z + noise_rng.normal(0.0, noise_var.sqrt())
                    } else {
                        z
                    }
                }
                TaskSpec::LogisticLabels { sign } => {
                    let p = match sign {
                        LabelSign::Standard => sigmoid(z),
                        LabelSign::Flipped => sigmoid(-z),
                    };
                    if noise_rng.bernoulli(p) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            ExampleRow::dense(x, label)
        })
        .collect();

    Ok((Dataset::new(rows, spec.d)?, theta_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_linear_labels_are_exact_inner_products() {
        let spec = SynthSpec::linear(50, 20, 4, 0.0);
        let (ds, theta) = generate(&spec, &RngState::new(1)).unwrap();
        for r in ds.rows() {
            assert_eq!(r.label, r.dot(&theta));
        }
    }

    #[test]
    fn setting_i_shape_and_sparsity() {
        let spec = SynthSpec::linear(800, 1000, 10, 0.1);
        let (ds, theta) = generate(&spec, &RngState::new(2)).unwrap();
        assert_eq!(ds.n(), 800);
        assert_eq!(ds.dim(), 1000);
        assert!(ds.inf_norm_bound() <= 1.0);
        assert_eq!(theta.nnz(), 10);
    }

    #[test]
    fn unit_norm_when_normalization_requested() {
        let mut spec = SynthSpec::linear(10, 100, 7, 0.1);
        spec.normalize_theta = true;
        let (_, theta) = generate(&spec, &RngState::new(3)).unwrap();
        assert!((theta.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(theta.nnz(), 7);
    }

    #[test]
    fn logistic_zero_theta_label_fraction_near_half() {
        // θ* has nonzeros by construction, so emulate θ*≈0 via the flipped
        // and standard conventions agreeing only at z = 0: instead check the
        // symmetric-design marginal — with θ* entries U(−1,1), the label
        // fraction over a large sample stays near 1/2 by symmetry of x.
        let spec = SynthSpec::logistic(100_000, 5, 2);
        let (ds, _) = generate(&spec, &RngState::new(4)).unwrap();
        let frac = ds.rows().iter().map(|r| r.label).sum::<f64>() / ds.n() as f64;
        assert!((0.49..=0.51).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn design_column_variance_near_third() {
        let spec = SynthSpec::linear(10_000, 3, 1, 0.0);
        let (ds, _) = generate(&spec, &RngState::new(5)).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = ds.rows().iter().map(|r| r.to_dense(3)[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            assert!((var - 1.0 / 3.0).abs() <= 0.02, "column {j} variance {var}");
        }
    }

    #[test]
    fn noise_variance_does_not_change_design() {
        let (a, ta) = generate(&SynthSpec::linear(20, 10, 3, 0.0), &RngState::new(6)).unwrap();
        let (b, tb) = generate(&SynthSpec::linear(20, 10, 3, 0.5), &RngState::new(6)).unwrap();
        assert_eq!(ta.values(), tb.values());
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            assert_eq!(ra.features, rb.features);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec::linear(20, 10, 3, 0.1);
        let (a, _) = generate(&spec, &RngState::new(7)).unwrap();
        let (b, _) = generate(&spec, &RngState::new(7)).unwrap();
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&SynthSpec::linear(10, 5, 6, 0.1), &RngState::new(0)).is_err());
        assert!(generate(&SynthSpec::linear(10, 5, 2, -0.1), &RngState::new(0)).is_err());
        assert!(generate(&SynthSpec::linear(0, 5, 2, 0.1), &RngState::new(0)).is_err());
    }
}
