//! `dpsl` command-line interface: dataset generation, single runs, ε-sweeps,
//! and a self-check suite.
//!
//! Exit codes: 0 on success, 2 when any sweep cell failed, 1 on
//! configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpsl::{
    dp_ight, emit_csv, generate, mean_metric, nonprivate_ight, parse_libsvm, parse_plan,
    read_csv, run_dpsl_kt, run_plan, Dataset, DpIghtConfig, IghtConfig, LambdaMode, LossKind,
    LossModel, Method, PrivacyParams, RngState, StepRule, SynthSpec, SyntheticDistribution,
    TransferConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dpsl", about = "Differentially private sparse learning via knowledge transfer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (libsvm file + ground-truth JSON).
    Datagen(DatagenArgs),
    /// Fit one method at one privacy level and emit a JSON result.
    Run(RunArgs),
    /// Run a full experiment plan from a config file and emit a CSV.
    Sweep(SweepArgs),
    /// Run built-in invariant self-tests.
    Check,
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long, default_value = "linear", value_parser = parse_task)]
    task: LossKind,
    #[arg(long, default_value_t = 800)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    #[arg(long = "s-star", default_value_t = 10)]
    s_star: usize,
    /// Label noise variance ν² (linear task only).
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    /// Scale θ* to unit ℓ₂ norm.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output libsvm path.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth θ* JSON path (defaults to <out>.theta.json).
    #[arg(long = "theta-out")]
    theta_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// libsvm dataset path; omit to generate synthetic data in-process.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "linear", value_parser = parse_task)]
    task: LossKind,
    #[arg(long, default_value_t = 800)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    #[arg(long = "s-star", default_value_t = 10)]
    s_star: usize,
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long, default_value = "dpsl_kt")]
    method: String,
    #[arg(long, default_value_t = 2.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Sparsity level s (defaults to s-star).
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long, default_value_t = 60)]
    iters: usize,
    /// Synthetic sample count m (defaults to max(n, 4·s·ln d)).
    #[arg(long)]
    m: Option<usize>,
    /// Synthetic feature source: uniform, empirical, or gaussian:<tau2>.
    #[arg(long, default_value = "uniform")]
    synth: String,
    #[arg(long = "c-gamma", default_value_t = 0.1)]
    c_gamma: f64,
    /// λ-rule constant c₁.
    #[arg(long = "lambda-c", default_value_t = 1.0)]
    lambda_c: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit only the privately-releasable fields (θᵖ, support, receipt).
    #[arg(long = "private-only")]
    private_only: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Plan config file (flat key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path (overrides the plan's `output` key).
    #[arg(long)]
    output: Option<PathBuf>,
    /// key=value overrides applied on top of the config file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_task(s: &str) -> Result<LossKind, String> {
    match s {
        "linear" => Ok(LossKind::Linear),
        "logistic" => Ok(LossKind::Logistic),
        _ => Err(format!("unknown task {s:?} (expected linear or logistic)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Datagen(a) => cmd_datagen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check => cmd_check(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_datagen(a: DatagenArgs) -> anyhow::Result<ExitCode> {
    let mut spec = match a.task {
        LossKind::Linear => SynthSpec::linear(a.n, a.d, a.s_star, a.noise_var),
        LossKind::Logistic => SynthSpec::logistic(a.n, a.d, a.s_star),
    };
    spec.normalize_theta = a.normalize;
    let (ds, theta) = generate(&spec, &RngState::new(a.seed))?;
    dpsl::write_libsvm(&ds, &a.out)?;
    let theta_path = a
        .theta_out
        .unwrap_or_else(|| PathBuf::from(format!("{}.theta.json", a.out.display())));
    let doc = json!({
        "theta_star": theta.values(),
        "support": theta.support().indices(),
        "n": ds.n(),
        "d": ds.dim(),
        "seed": a.seed,
    });
    std::fs::write(&theta_path, serde_json::to_string_pretty(&doc)?)?;
    eprintln!(
        "wrote {} ({} rows, d={}) and {}",
        a.out.display(),
        ds.n(),
        ds.dim(),
        theta_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_run_data(a: &RunArgs) -> anyhow::Result<Dataset> {
    match &a.data {
        Some(p) => Ok(parse_libsvm(p)?),
        None => {
            let spec = match a.task {
                LossKind::Linear => SynthSpec::linear(a.n, a.d, a.s_star, a.noise_var),
                LossKind::Logistic => SynthSpec::logistic(a.n, a.d, a.s_star),
            };
            Ok(generate(&spec, &RngState::new(a.seed).split_label("data"))?.0)
        }
    }
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let data = load_run_data(&a)?;
    let s = a.sparsity.unwrap_or(a.s_star);
    let method = Method::parse(&a.method)?;
    let pp = PrivacyParams::new(a.epsilon, a.delta)?;

    let doc = match method {
        Method::DpslKt => {
            let d = data.dim();
            let synth = match a.synth.split_once(':') {
                None if a.synth == "uniform" => SyntheticDistribution::uniform_pm1(d),
                None if a.synth == "empirical" => {
                    SyntheticDistribution::empirical(data.rows().to_vec(), d)?
                }
                Some(("gaussian", t)) => SyntheticDistribution::gaussian_iso(d, t.parse()?),
                _ => anyhow::bail!("unknown synth choice {:?}", a.synth),
            };
            let m = a
                .m
                .unwrap_or_else(|| data.n().max((4.0 * s as f64 * (d as f64).ln()).ceil() as usize));
            let mut cfg = TransferConfig::new(
                IghtConfig::new(s, 1.0, a.iters),
                IghtConfig::new(s, 1.0, a.iters),
                synth,
                m,
                pp,
                LambdaMode::Rule { c: a.lambda_c },
                a.seed,
            );
            cfg.step_rule = StepRule::CovarianceScaled { c: 1.0 };
            cfg.c_gamma = a.c_gamma;
            let result = run_dpsl_kt(&data, a.task, &cfg)?;
            result.to_json(a.private_only)
        }
        Method::DpIght => {
            let model = LossModel::new(a.task, data.clone(), 0.0)?;
            let step = 0.125;
            let cfg = DpIghtConfig::new(s, step, a.iters, pp, data.max_row_l2(), a.seed);
            let (trace, receipt) = dp_ight(&model, &cfg)?;
            json!({
                "theta": trace.final_theta.values(),
                "support": trace.final_theta.support().indices(),
                "receipt": receipt,
            })
        }
        Method::NonPrivateIght => {
            let model = LossModel::new(a.task, data.clone(), 0.0)?;
            let spec = dpsl::transfer::estimate_spectral_step(data.rows(), data.dim())?;
            let curvature = match a.task {
                LossKind::Linear => spec,
                LossKind::Logistic => 0.25 * spec,
            };
            let cfg = IghtConfig::new(s, 1.0 / curvature.max(1e-12), a.iters);
            let trace = nonprivate_ight(&model, &cfg)?;
            json!({
                "theta": trace.final_theta.values(),
                "support": trace.final_theta.support().indices(),
                "iters_run": trace.iters_run,
            })
        }
    };

    let text = serde_json::to_string_pretty(&doc)?;
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<ExitCode> {
    let text = match &a.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let overrides: Vec<(String, String)> = a
        .overrides
        .iter()
        .map(|o| {
            let stripped = o.trim_start_matches('-');
            stripped
                .split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| anyhow::anyhow!("override {o:?} is not key=value"))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut plan = parse_plan(&text, &overrides)?;
    if let Some(out) = &a.output {
        plan.output_path = Some(out.clone());
    }
    let out_path = plan
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("results.csv"));

    let outcome = run_plan(&plan)?;
    emit_csv(&outcome.rows, &out_path)?;
    eprintln!("wrote {} rows to {}", outcome.rows.len(), out_path.display());
    for m in &plan.methods {
        for &eps in &plan.epsilons {
            for metric in ["rel_err", "test_mse", "test_error"] {
                if let Some(v) = mean_metric(&outcome.rows, m.name(), eps, metric) {
                    eprintln!("  {} eps={eps}: mean {metric} = {v:.6}", m.name());
                }
            }
        }
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &outcome.failures {
            eprintln!("failed cell: {f}");
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_check() -> anyhow::Result<ExitCode> {
    let mut ok = true;
    let mut report = |name: &str, pass: bool| {
        println!("{} {name}", if pass { "ok  " } else { "FAIL" });
        ok &= pass;
    };

    // σ² identity against the Δ₂ bound
    {
        let mut rng = RngState::new(101);
        let mut pass = true;
        for _ in 0..50 {
            let inp = dpsl::SensitivityInputs {
                m: 1 + rng.below(2000),
                n: 1 + rng.below(2000),
                s: 1 + rng.below(50),
                beta_tilde: rng.uniform(0.01, 5.0),
                gamma: rng.uniform(0.01, 5.0),
                strong_convexity: dpsl::StrongConvexity::Ridge(rng.uniform(0.01, 5.0)),
            };
            let pp = PrivacyParams::new(rng.uniform(0.1, 5.0), rng.uniform(1e-6, 0.1))?;
            let s2 = dpsl::calibrate_sigma(&pp, &inp)?;
            let d2 = dpsl::sensitivity_bound(&inp)?;
            let expect = 2.0 * (2.5 / pp.delta).ln() * d2 * d2 / (pp.epsilon * pp.epsilon);
            pass &= (s2 - expect).abs() <= 1e-12 * expect;
        }
        report("gaussian-calibration-identity", pass);
    }

    // hard threshold equals best s-term approximation (small dims)
    {
        let mut rng = RngState::new(102);
        let mut pass = true;
        for _ in 0..200 {
            let d = 1 + rng.below(6);
            let s = 1 + rng.below(d);
            let v = dpsl::ParamVector::new((0..d).map(|_| rng.uniform(-2.0, 2.0)).collect());
            let h = dpsl::hard_threshold(&v, s)?;
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << d) {
                if mask.count_ones() as usize > s {
                    continue;
                }
                let err: f64 = (0..d)
                    .filter(|&j| mask & (1 << j) == 0)
                    .map(|j| v.values()[j] * v.values()[j])
                    .sum();
                best = best.min(err);
            }
            let got = v.sub(&h).l2_norm().powi(2);
            pass &= (got - best).abs() <= 1e-12;
        }
        report("hard-threshold-oracle", pass);
    }

    // libsvm round trip
    {
        let ds = dpsl::parse_libsvm_str("1 3:2.5 7:-1\n0\n-1 2:3\n")?;
        let path = std::env::temp_dir().join("dpsl-check.libsvm");
        dpsl::write_libsvm(&ds, &path)?;
        let back = parse_libsvm(&path)?;
        report(
            "libsvm-round-trip",
            back.n() == ds.n() && back.rows() == ds.rows(),
        );
    }

    // seeded determinism of the full pipeline
    {
        let spec = SynthSpec::linear(100, 40, 3, 0.05);
        let (data, _) = generate(&spec, &RngState::new(7))?;
        let cfg = TransferConfig::new(
            IghtConfig::new(3, 1.0, 30),
            IghtConfig::new(3, 1.0, 30),
            SyntheticDistribution::uniform_pm1(40),
            100,
            PrivacyParams::new(2.0, 0.01)?,
            LambdaMode::Rule { c: 0.01 },
            9,
        );
        let mut cfg = cfg;
        cfg.step_rule = StepRule::CovarianceScaled { c: 1.0 };
        let a = run_dpsl_kt(&data, LossKind::Linear, &cfg)?;
        let b = run_dpsl_kt(&data, LossKind::Linear, &cfg)?;
        report(
            "pipeline-determinism",
            a.theta_p.values() == b.theta_p.values(),
        );
    }

    // CSV canonical order on a shuffled input
    {
        let mut rng = RngState::new(103);
        let rows: Vec<dpsl::ResultRow> = (0..50)
            .map(|_| dpsl::ResultRow {
                method: ["ight", "dpsl_kt"][rng.below(2)].to_string(),
                epsilon: [0.8, 2.0][rng.below(2)],
                delta: 0.01,
                trial: rng.below(5),
                seed: 1,
                metric_name: "rel_err".to_string(),
                value: rng.uniform(0.0, 1.0),
                wall_time_ms: 0,
            })
            .collect();
        let path = std::env::temp_dir().join("dpsl-check.csv");
        emit_csv(&rows, &path)?;
        let back = read_csv(&path)?;
        let sorted = back.windows(2).all(|w| {
            (w[0].method.clone(), w[0].epsilon.to_bits(), w[0].trial)
                <= (w[1].method.clone(), w[1].epsilon.to_bits(), w[1].trial)
        });
        report("csv-canonical-order", sorted && back.len() == rows.len());
    }

    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
