//! Experiment orchestration: ε-sweeps across methods with repeated trials,
//! deterministic seeding, cross-validated hyperparameters, CSV emission.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{dp_ight, nonprivate_ight, DpIghtConfig};
use crate::data::Dataset;
use crate::datagen::{generate, SynthSpec};
use crate::error::{Error, Result};
use crate::ight::IghtConfig;
use crate::io::parse_libsvm;
use crate::losses::{LossKind, LossModel};
use crate::privacy::PrivacyParams;
use crate::rng::RngState;
use crate::transfer::{
    estimate_spectral_step, run_dpsl_kt, LambdaMode, StepRule, SyntheticDistribution,
    TransferConfig,
};
use crate::vector::{relative_estimation_error, support_f1, ParamVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric_name: String,
    pub value: f64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NonPrivateIght,
    DpIght,
    DpslKt,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::NonPrivateIght => "ight",
            Method::DpIght => "dp_ight",
            Method::DpslKt => "dpsl_kt",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.trim() {
            "ight" => Ok(Method::NonPrivateIght),
            "dp_ight" => Ok(Method::DpIght),
            "dpsl_kt" => Ok(Method::DpslKt),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected ight, dp_ight, dpsl_kt)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SynthSpec),
    File(PathBuf),
}

/// Synthetic feature source for the DPSL-KT student task.
#[derive(Debug, Clone, Copy)]
pub enum SynthChoice {
    Uniform,
    Gaussian { tau2: f64 },
    /// Resample training rows (used for real-shaped sparse data).
    Empirical,
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub task: LossKind,
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    /// Sparsity level s used by every method; defaults to s* for synthetic
    /// data and must be set explicitly for file data.
    pub sparsity: Option<usize>,
    pub iters: usize,
    /// Synthetic sample count m; when unset, max(n, ⌈4·s·ln d⌉).
    pub m: Option<usize>,
    pub synth: SynthChoice,
    pub c_gamma: f64,
    /// λ-rule constant c₁ when the grid search is off.
    pub lambda_c: f64,
    /// Cross-validate λ (DPSL-KT) and the step size (DP-IGHT) on an 80/20
    /// held-out split, then refit on all data.
    pub grid: bool,
    /// Record wall-clock times; off by default so re-runs are byte-identical.
    pub record_wall_time: bool,
}

pub const LAMBDA_C_GRID: [f64; 8] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
pub const DP_IGHT_STEP_GRID: [f64; 7] = [
    1.0,
    0.5,
    0.25,
    0.125,
    0.0625,
    0.03125,
    0.015625,
];

impl ExperimentPlan {
    pub fn new(task: LossKind, data: DataSource) -> Self {
        let synth = if data_is_file(&data) {
            SynthChoice::Empirical
        } else {
            SynthChoice::Uniform
        };
        ExperimentPlan {
            task,
            data,
            methods: vec![Method::NonPrivateIght, Method::DpIght, Method::DpslKt],
            epsilons: match task {
                LossKind::Linear => vec![0.8, 1.5, 2.5, 3.5, 5.0],
                LossKind::Logistic => vec![2.0, 4.0, 6.0, 8.0, 10.0],
            },
            delta: 0.01,
            trials: 10,
            master_seed: 1,
            output_path: None,
            sparsity: None,
            iters: 60,
            m: None,
            synth,
            c_gamma: 0.1,
            lambda_c: 1.0,
            grid: true,
            record_wall_time: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilons must be nonempty and positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method required".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        PrivacyParams::new(1.0, self.delta)?;
        if let DataSource::File(_) = self.data {
            if self.sparsity.is_none() {
                return Err(Error::Config("sparsity must be set for file data".into()));
            }
        }
        Ok(())
    }

    fn sparsity_level(&self) -> usize {
        match (&self.data, self.sparsity) {
            (_, Some(s)) => s,
            (DataSource::Synthetic(spec), None) => spec.s_star,
            (DataSource::File(_), None) => unreachable!("checked in validate"),
        }
    }
}

fn data_is_file(data: &DataSource) -> bool {
    matches!(data, DataSource::File(_))
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub rows: Vec<ResultRow>,
    /// Human-readable reasons for failed cells (sweep continues past them).
    pub failures: Vec<String>,
}

struct TrialData {
    train: Dataset,
    /// Held-out split for file data (synthetic trials score against θ*).
    test: Option<Dataset>,
    theta_star: Option<ParamVector>,
}

fn trial_data(
    plan: &ExperimentPlan,
    trial: usize,
    file_data: &Option<Arc<Dataset>>,
) -> Result<TrialData> {
    let data_rng = RngState::new(plan.master_seed)
        .split_label("data")
        .split(trial as u64);
    match &plan.data {
        DataSource::Synthetic(spec) => {
            let (ds, theta) = generate(spec, &data_rng)?;
            Ok(TrialData {
                train: ds,
                test: None,
                theta_star: Some(theta),
            })
        }
        DataSource::File(_) => {
            let ds = file_data.as_ref().expect("loaded before sweep");
            let mut idx: Vec<usize> = (0..ds.n()).collect();
            let mut split_rng = data_rng.split_label("split");
            for i in (1..idx.len()).rev() {
                idx.swap(i, split_rng.below(i + 1));
            }
            let cut = (ds.n() * 4) / 5;
            Ok(TrialData {
                train: ds.subset(&idx[..cut])?,
                test: Some(ds.subset(&idx[cut..])?),
                theta_star: None,
            })
        }
    }
}

/// Gradient-descent step 1/(L + λ) with L the spectral norm of the sample
/// feature covariance (quartered for the logistic Hessian bound).
fn covariance_step(task: LossKind, data: &Dataset, lambda: f64) -> Result<f64> {
    let spec = estimate_spectral_step(data.rows(), data.dim())?;
    let curvature = match task {
        LossKind::Linear => spec,
        LossKind::Logistic => 0.25 * spec,
    };
    Ok(1.0 / (curvature + lambda).max(1e-12))
}

/// Mean held-out prediction loss used by the grid searches.
fn holdout_score(task: LossKind, theta: &ParamVector, test: &Dataset) -> Result<f64> {
    let model = LossModel::new(task, test.clone(), 0.0)?;
    model.loss_value(theta)
}

fn split_for_cv(data: &Dataset, rng: &RngState) -> Result<(Dataset, Dataset)> {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    let mut r = rng.split_label("cv-split");
    for i in (1..idx.len()).rev() {
        idx.swap(i, r.below(i + 1));
    }
    let cut = (data.n() * 4) / 5;
    Ok((data.subset(&idx[..cut])?, data.subset(&idx[cut..])?))
}

fn default_m(plan: &ExperimentPlan, n: usize, s: usize, d: usize) -> usize {
    plan.m
        .unwrap_or_else(|| n.max((4.0 * s as f64 * (d as f64).ln()).ceil() as usize))
}

fn dpsl_kt_config(
    plan: &ExperimentPlan,
    data: &Dataset,
    lambda_mode: LambdaMode,
    epsilon: f64,
    seed: u64,
) -> Result<TransferConfig> {
    let s = plan.sparsity_level();
    let d = data.dim();
    let synth = match plan.synth {
        SynthChoice::Uniform => SyntheticDistribution::uniform_pm1(d),
        SynthChoice::Gaussian { tau2 } => SyntheticDistribution::gaussian_iso(d, tau2),
        SynthChoice::Empirical => {
            SyntheticDistribution::empirical(data.rows().to_vec(), d)?
        }
    };
    let mut cfg = TransferConfig::new(
        IghtConfig::new(s, 1.0, plan.iters),
        IghtConfig::new(s, 1.0, plan.iters),
        synth,
        default_m(plan, data.n(), s, d),
        PrivacyParams::new(epsilon, plan.delta)?,
        lambda_mode,
        seed,
    );
    cfg.step_rule = StepRule::CovarianceScaled { c: 1.0 };
    cfg.c_gamma = plan.c_gamma;
    Ok(cfg)
}

fn fit_dpsl_kt(
    plan: &ExperimentPlan,
    data: &Dataset,
    epsilon: f64,
    cell_rng: &RngState,
) -> Result<ParamVector> {
    let lambda_mode = if plan.grid {
        let (cv_train, cv_test) = split_for_cv(data, cell_rng)?;
        let cv_seed = cell_rng.split_label("cv").seed();
        let mut best: Option<(f64, f64)> = None; // (score, c)
        for &c in &LAMBDA_C_GRID {
            let cfg = dpsl_kt_config(plan, &cv_train, LambdaMode::Rule { c }, epsilon, cv_seed)?;
            let theta = match run_dpsl_kt(&cv_train, plan.task, &cfg) {
                Ok(r) => r.theta_p,
                Err(_) => continue, // e.g. divergence at an aggressive candidate
            };
            let score = holdout_score(plan.task, &theta, &cv_test)?;
            if score.is_finite() && best.map_or(true, |(b, _)| score < b) {
                best = Some((score, c));
            }
        }
        let (_, c) = best.ok_or_else(|| Error::Config("every λ candidate failed".into()))?;
        LambdaMode::Rule { c }
    } else {
        LambdaMode::Rule { c: plan.lambda_c }
    };
    let final_seed = cell_rng.split_label("final").seed();
    let cfg = dpsl_kt_config(plan, data, lambda_mode, epsilon, final_seed)?;
    Ok(run_dpsl_kt(data, plan.task, &cfg)?.theta_p)
}

fn fit_dp_ight(
    plan: &ExperimentPlan,
    data: &Dataset,
    epsilon: f64,
    cell_rng: &RngState,
) -> Result<ParamVector> {
    let s = plan.sparsity_level();
    let pp = PrivacyParams::new(epsilon, plan.delta)?;
    let fit_at = |train: &Dataset, step: f64, seed: u64| -> Result<ParamVector> {
        let model = LossModel::new(plan.task, train.clone(), 0.0)?;
        let cfg = DpIghtConfig::new(s, step, plan.iters, pp, train.max_row_l2(), seed);
        Ok(dp_ight(&model, &cfg)?.0.final_theta)
    };
    let step = if plan.grid {
        let (cv_train, cv_test) = split_for_cv(data, cell_rng)?;
        let cv_seed = cell_rng.split_label("cv").seed();
        let mut best: Option<(f64, f64)> = None;
        for &step in &DP_IGHT_STEP_GRID {
            let theta = match fit_at(&cv_train, step, cv_seed) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let score = holdout_score(plan.task, &theta, &cv_test)?;
            if score.is_finite() && best.map_or(true, |(b, _)| score < b) {
                best = Some((score, step));
            }
        }
        best.ok_or_else(|| Error::Config("every step candidate failed".into()))?
            .1
    } else {
        DP_IGHT_STEP_GRID[3]
    };
    fit_at(data, step, cell_rng.split_label("final").seed())
}

fn fit_nonprivate(plan: &ExperimentPlan, data: &Dataset) -> Result<ParamVector> {
    let s = plan.sparsity_level();
    let model = LossModel::new(plan.task, data.clone(), 0.0)?;
    let base = covariance_step(plan.task, data, 0.0)?;
    // Aggressive steps escape spurious hard-thresholding fixed points that
    // 1/L gets stuck in; back off on divergence.
    let mut last_err = None;
    for scale in [2.5, 1.0, 0.5] {
        let cfg = IghtConfig::new(s, scale * base, plan.iters);
        match nonprivate_ight(&model, &cfg) {
            Ok(t) => return Ok(t.final_theta),
            Err(e @ Error::Diverged { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran"))
}

fn run_cell(
    plan: &ExperimentPlan,
    method: Method,
    epsilon: f64,
    trial: usize,
    file_data: &Option<Arc<Dataset>>,
) -> Result<Vec<ResultRow>> {
    let td = trial_data(plan, trial, file_data)?;
    let cell_rng = RngState::new(plan.master_seed)
        .split_label("cell")
        .split_label(method.name())
        .split(epsilon.to_bits())
        .split(trial as u64);
    let start = Instant::now();
    let theta = match method {
        Method::NonPrivateIght => fit_nonprivate(plan, &td.train)?,
        Method::DpIght => fit_dp_ight(plan, &td.train, epsilon, &cell_rng)?,
        Method::DpslKt => fit_dpsl_kt(plan, &td.train, epsilon, &cell_rng)?,
    };
    let wall = if plan.record_wall_time {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let mut metrics: Vec<(String, f64)> = Vec::new();
    if let Some(ts) = &td.theta_star {
        metrics.push(("rel_err".into(), relative_estimation_error(&theta, ts)?));
        let diff = theta.sub(ts).l2_norm();
        metrics.push(("sq_err".into(), diff * diff));
        metrics.push((
            "support_f1".into(),
            support_f1(&theta.support(), &ts.support()),
        ));
    }
    if let Some(test) = &td.test {
        let name = match plan.task {
            LossKind::Linear => "test_mse",
            LossKind::Logistic => "test_error",
        };
        let value = match plan.task {
            LossKind::Linear => {
                let se: f64 = test
                    .rows()
                    .iter()
                    .map(|r| {
                        let e = r.dot(&theta) - r.label;
                        e * e
                    })
                    .sum();
                se / test.n() as f64
            }
            LossKind::Logistic => {
                let wrong = test
                    .rows()
                    .iter()
                    .filter(|r| {
                        let pred = if r.dot(&theta) >= 0.0 { 1.0 } else { 0.0 };
                        pred != r.label
                    })
                    .count();
                wrong as f64 / test.n() as f64
            }
        };
        metrics.push((name.into(), value));
    }
    Ok(metrics
        .into_iter()
        .map(|(metric_name, value)| ResultRow {
            method: method.name().to_string(),
            epsilon,
            delta: plan.delta,
            trial,
            seed: cell_rng.seed(),
            metric_name,
            value,
            wall_time_ms: wall,
        })
        .collect())
}

/// Runs every (method, ε, trial) cell in parallel. Failed cells become a
/// `failed` row plus a reason in `failures`; the sweep always completes.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    let file_data = match &plan.data {
        DataSource::File(p) => Some(Arc::new(parse_libsvm(p)?)),
        DataSource::Synthetic(_) => None,
    };
    let cells: Vec<(Method, f64, usize)> = plan
        .methods
        .iter()
        .flat_map(|&m| {
            plan.epsilons
                .iter()
                .flat_map(move |&e| (0..plan.trials).map(move |t| (m, e, t)))
        })
        .collect();

    let outcomes: Vec<(Vec<ResultRow>, Option<String>)> = cells
        .par_iter()
        .map(|&(method, epsilon, trial)| {
            match run_cell(plan, method, epsilon, trial, &file_data) {
                Ok(rows) => (rows, None),
                Err(e) => {
                    let reason =
                        format!("{} eps={epsilon} trial={trial}: {e}", method.name());
                    let row = ResultRow {
                        method: method.name().to_string(),
                        epsilon,
                        delta: plan.delta,
                        trial,
                        seed: 0,
                        metric_name: "failed".to_string(),
                        value: 0.0,
                        wall_time_ms: 0,
                    };
                    (vec![row], Some(reason))
                }
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outcomes {
        rows.extend(r);
        failures.extend(f);
    }
    Ok(PlanOutcome { rows, failures })
}

/// Mean of a metric over trials for one (method, ε) point.
pub fn mean_metric(rows: &[ResultRow], method: &str, epsilon: f64, metric: &str) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.epsilon == epsilon && r.metric_name == metric)
        .map(|r| r.value)
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Parses a flat `key=value` plan document; `overrides` are applied on top
/// (the CLI's `--key=value` flags). Lines starting with `#` are comments.
pub fn parse_plan(text: &str, overrides: &[(String, String)]) -> Result<ExperimentPlan> {
    let mut kv: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        kv.push((k.trim().to_string(), v.trim().to_string()));
    }
    kv.extend(overrides.iter().cloned());

    let get = |key: &str| -> Option<&str> {
        kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    };
    let parse_f = |key: &str, v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::Config(format!("bad float for {key}: {v:?}")))
    };
    let parse_u = |key: &str, v: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| Error::Config(format!("bad integer for {key}: {v:?}")))
    };
    let parse_b = |key: &str, v: &str| -> Result<bool> {
        match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::Config(format!("bad boolean for {key}: {v:?}"))),
        }
    };

    let task = match get("task").unwrap_or("linear") {
        "linear" => LossKind::Linear,
        "logistic" => LossKind::Logistic,
        other => return Err(Error::Config(format!("unknown task {other:?}"))),
    };

    let data = match get("data").unwrap_or("synthetic") {
        "synthetic" => {
            let n = parse_u("n", get("n").unwrap_or("800"))?;
            let d = parse_u("d", get("d").unwrap_or("1000"))?;
            let s_star = parse_u("s_star", get("s_star").unwrap_or("10"))?;
            let mut spec = match task {
                LossKind::Linear => {
                    let nv = parse_f("noise_var", get("noise_var").unwrap_or("0.1"))?;
                    SynthSpec::linear(n, d, s_star, nv)
                }
                LossKind::Logistic => SynthSpec::logistic(n, d, s_star),
            };
            if let Some(v) = get("normalize_theta") {
                spec.normalize_theta = parse_b("normalize_theta", v)?;
            }
            DataSource::Synthetic(spec)
        }
        "file" => {
            let path = get("file")
                .ok_or_else(|| Error::Config("data=file requires file=<path>".into()))?;
            DataSource::File(PathBuf::from(path))
        }
        other => return Err(Error::Config(format!("unknown data source {other:?}"))),
    };

    let mut plan = ExperimentPlan::new(task, data);
    if let Some(v) = get("methods") {
        plan.methods = v
            .split(',')
            .map(Method::parse)
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(v) = get("epsilons") {
        plan.epsilons = v
            .split(',')
            .map(|e| parse_f("epsilons", e.trim()))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(v) = get("delta") {
        plan.delta = parse_f("delta", v)?;
    }
    if let Some(v) = get("trials") {
        plan.trials = parse_u("trials", v)?;
    }
    if let Some(v) = get("master_seed") {
        plan.master_seed = v
            .parse()
            .map_err(|_| Error::Config(format!("bad master_seed {v:?}")))?;
    }
    if let Some(v) = get("output") {
        plan.output_path = Some(PathBuf::from(v));
    }
    if let Some(v) = get("sparsity") {
        plan.sparsity = Some(parse_u("sparsity", v)?);
    }
    if let Some(v) = get("iters") {
        plan.iters = parse_u("iters", v)?;
    }
    if let Some(v) = get("m") {
        plan.m = Some(parse_u("m", v)?);
    }
    if let Some(v) = get("synth") {
        plan.synth = match v.split_once(':') {
            None if v == "uniform" => SynthChoice::Uniform,
            None if v == "empirical" => SynthChoice::Empirical,
            Some(("gaussian", t)) => SynthChoice::Gaussian {
                tau2: parse_f("synth", t)?,
            },
            _ => return Err(Error::Config(format!("unknown synth choice {v:?}"))),
        };
    }
    if let Some(v) = get("c_gamma") {
        plan.c_gamma = parse_f("c_gamma", v)?;
    }
    if let Some(v) = get("lambda_c") {
        plan.lambda_c = parse_f("lambda_c", v)?;
    }
    if let Some(v) = get("grid") {
        plan.grid = parse_b("grid", v)?;
    }
    if let Some(v) = get("record_wall_time") {
        plan.record_wall_time = parse_b("record_wall_time", v)?;
    }
    Ok(plan)
}
