//! Differentially private sparse learning via knowledge transfer.
//!
//! The core pipeline trains a non-released teacher with iterative gradient
//! hard thresholding (IGHT) on the private data, labels synthetic features
//! with Gaussian-mechanism-noised teacher predictions, and trains a student
//! on the synthetic task. Only the student (and its privacy receipt) is
//! released.

pub mod baselines;
pub mod data;
pub mod datagen;
pub mod error;
pub mod ight;
pub mod io;
pub mod losses;
pub mod plan;
pub mod privacy;
pub mod rng;
pub mod transfer;
pub mod vector;

pub use baselines::{dp_ight, dp_ight_sigma_t, nonprivate_ight, DpIghtConfig};
pub use data::{Dataset, ExampleRow, Features};
pub use datagen::{generate, LabelSign, SynthSpec, TaskSpec};
pub use io::{emit_csv, parse_libsvm, parse_libsvm_str, read_csv, write_libsvm};
pub use error::{Error, Result};
pub use ight::{ight_fit, ight_fit_traced, FitTrace, IghtConfig, IterRecord};
pub use losses::{LossKind, LossModel, ModelBounds};
pub use plan::{
    mean_metric, parse_plan, run_plan, DataSource, ExperimentPlan, Method, PlanOutcome, ResultRow,
    SynthChoice,
};
pub use privacy::{
    calibrate_sigma, gaussian_mechanism, lambda_rule, sensitivity_bound, PrivacyParams,
    PrivacyReceipt, SensitivityInputs, StrongConvexity,
};
pub use rng::RngState;
pub use transfer::{
    run_dpsl_kt, LambdaMode, StepRule, SyntheticDistribution, SyntheticKind, TransferConfig,
    TransferResult,
};
pub use vector::{hard_threshold, ParamVector, SupportSet};
