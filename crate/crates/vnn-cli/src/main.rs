//! Batch CLI for Volterra neural network experiments.
//!
//! Every subcommand prints a single JSON document to stdout so scripts can
//! parse results without scraping logs. Exit codes are uniform: 0 success,
//! 1 a check failed, 2 configuration error, 3 runtime error.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{NetworkConfig, RunConfig};
use vnn_core::cascade::{order_report_for_depth, param_count, CascadeNetwork, OrderReport};
use vnn_core::error::{Result, VnnError};
use vnn_core::fusion::TwoStreamNetwork;
use vnn_core::io::{gen_synthetic, load_dataset, load_model, save_cascade, save_two_stream, LoadedModel};
use vnn_core::model::{Model, Sample};
use vnn_core::oracle::{oracle_direct, oracle_nested, VolterraWeights};
use vnn_core::tensor::Tensor;
use vnn_core::trainer::{evaluate, grad_check, train, TrainReport};

#[derive(Parser)]
#[command(name = "vnn", about = "Volterra neural network experiment runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motion dataset.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network and write the model plus a line-JSON report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Held-out manifest evaluated every `eval_every` epochs.
        #[arg(long)]
        eval_data: Option<PathBuf>,
        /// Continue from a saved model instead of a fresh initialization.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Train the network on the flow stream instead of rgb.
        #[arg(long)]
        use_flow: bool,
    },
    /// Evaluate a saved model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Parameter counts for a cascade configuration.
    CountParams {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-layer L1 norms and the chained BIBO bound.
    CheckStability {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        bound: f64,
    },
    /// Analytic gradients vs central finite differences on a fresh network.
    GradCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Cross-oracle equivalence suite over random 1-D Volterra systems.
    Oracle {
        #[arg(long, default_value_t = 100)]
        systems: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Nominal order and reachable polynomial degree of a cascade.
    Order {
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("VNN_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(check_passed) => {
            if check_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &VnnError) -> u8 {
    match err {
        VnnError::Config(_)
        | VnnError::Json(_)
        | VnnError::Shape(_)
        | VnnError::Geometry(_)
        | VnnError::Domain(_) => 2,
        VnnError::Bounds(_)
        | VnnError::Numeric(_)
        | VnnError::Format { .. }
        | VnnError::Data { .. }
        | VnnError::Divergence { .. }
        | VnnError::Io(_) => 3,
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn u128_json(v: u128) -> serde_json::Value {
    if v <= u64::MAX as u128 {
        json!(v as u64)
    } else {
        json!(v.to_string())
    }
}

fn order_json(report: &OrderReport) -> serde_json::Value {
    json!({
        "layers": report.layers,
        "nominal_order": u128_json(report.nominal_order),
        "degree_bound": u128_json(report.degree_bound),
    })
}

/// Returns whether the command's check passed (true for non-check commands).
fn run(command: Command) -> Result<bool> {
    match command {
        Command::GenData { config, out } => {
            let run_config = RunConfig::load(&config)?;
            let manifest = gen_synthetic(run_config.dataset()?, &out)?;
            let dataset = load_dataset(&manifest)?;
            print_json(&json!({
                "manifest": manifest,
                "clips": dataset.len(),
                "classes": dataset.classes,
            }));
            Ok(true)
        }
        Command::Train {
            config,
            data,
            out,
            report,
            eval_data,
            resume,
            use_flow,
        } => {
            let run_config = RunConfig::load(&config)?;
            let training = run_config.training()?;
            let mut dataset = load_dataset(&data)?;
            if use_flow {
                dataset = dataset.with_flow_as_primary()?;
            }
            let mut eval_set = match &eval_data {
                Some(path) => Some(load_dataset(path)?),
                None => None,
            };
            if use_flow {
                eval_set = eval_set.map(|d| d.with_flow_as_primary()).transpose()?;
            }

            let model = match resume {
                Some(path) => load_model(&path)?,
                None => match run_config.network()? {
                    NetworkConfig::Cascade(cascade) => LoadedModel::Cascade(
                        CascadeNetwork::build(cascade.to_config()?, training.seed)?,
                    ),
                    NetworkConfig::TwoStream(two_stream) => LoadedModel::TwoStream(
                        TwoStreamNetwork::build(two_stream.to_config()?, training.seed)?,
                    ),
                },
            };
            let (train_report, kind) = match model {
                LoadedModel::Cascade(mut net) => {
                    let report = train(&mut net, &dataset, eval_set.as_ref(), &training)?;
                    save_cascade(&out, &net)?;
                    (report, "cascade")
                }
                LoadedModel::TwoStream(mut net) => {
                    let report = train(&mut net, &dataset, eval_set.as_ref(), &training)?;
                    save_two_stream(&out, &net)?;
                    (report, "two-stream")
                }
            };
            train_report.write_jsonl(&report)?;
            print_json(&train_summary_json(&train_report, kind, &out, &report));
            Ok(true)
        }
        Command::Eval { model, data } => {
            let dataset = load_dataset(&data)?;
            let report = match load_model(&model)? {
                LoadedModel::Cascade(net) => evaluate(&net, &dataset)?,
                LoadedModel::TwoStream(net) => evaluate(&net, &dataset)?,
            };
            print_json(&serde_json::to_value(&report)?);
            Ok(true)
        }
        Command::CountParams { config } => {
            let run_config = RunConfig::load(&config)?;
            let NetworkConfig::Cascade(cascade) = run_config.network()? else {
                return Err(VnnError::Config(
                    "count-params expects a cascade network section".into(),
                ));
            };
            let cascade_config = cascade.to_config()?;
            let report = param_count(&cascade_config)?;
            print_json(&json!({
                "per_layer": report.per_layer,
                "layer_total": report.layer_total,
                "classifier": report.classifier,
                "total": report.layer_total + report.classifier,
                "full_kth_equiv": u128_json(report.full_kth_equiv),
                "order": order_json(&order_report_for_depth(cascade_config.layers.len())),
            }));
            Ok(true)
        }
        Command::CheckStability {
            config,
            model,
            seed,
            bound,
        } => {
            let net = match (model, config) {
                (Some(path), _) => match load_model(&path)? {
                    LoadedModel::Cascade(net) => net,
                    LoadedModel::TwoStream(_) => {
                        return Err(VnnError::Config(
                            "check-stability expects a cascade model".into(),
                        ))
                    }
                },
                (None, Some(path)) => {
                    let run_config = RunConfig::load(&path)?;
                    let NetworkConfig::Cascade(cascade) = run_config.network()? else {
                        return Err(VnnError::Config(
                            "check-stability expects a cascade network section".into(),
                        ));
                    };
                    CascadeNetwork::build(cascade.to_config()?, seed)?
                }
                (None, None) => {
                    return Err(VnnError::Config(
                        "check-stability needs --model or --config".into(),
                    ))
                }
            };
            let report = net.stability_report(bound)?;
            let finite = report.end_to_end.is_finite()
                && report.layers.iter().all(|l| l.bound.is_finite());
            print_json(&json!({
                "input_bound": report.input_bound,
                "layers": report.layers.iter().map(|l| json!({
                    "linear_l1": l.linear_l1,
                    "quad_l1": l.quad_l1,
                    "bound": l.bound,
                })).collect::<Vec<_>>(),
                "end_to_end": report.end_to_end,
                "finite": finite,
            }));
            Ok(finite)
        }
        Command::GradCheck {
            config,
            seed,
            tolerance,
        } => {
            let run_config = RunConfig::load(&config)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let report = match run_config.network()? {
                NetworkConfig::Cascade(cascade) => {
                    let cascade_config = cascade.to_config()?;
                    let net = CascadeNetwork::build(cascade_config.clone(), seed)?;
                    let sample = random_sample(&cascade_config.input_shape, None, net.classes(), &mut rng)?;
                    grad_check(&net, &sample, tolerance, seed)?
                }
                NetworkConfig::TwoStream(two_stream) => {
                    let ts_config = two_stream.to_config()?;
                    let net = TwoStreamNetwork::build(ts_config.clone(), seed)?;
                    let sample = random_sample(
                        &ts_config.rgb.input_shape,
                        Some(&ts_config.flow.input_shape),
                        net.classes(),
                        &mut rng,
                    )?;
                    grad_check(&net, &sample, tolerance, seed)?
                }
            };
            let pass = report.pass;
            print_json(&serde_json::to_value(&report)?);
            Ok(pass)
        }
        Command::Oracle { systems, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut max_abs_diff = 0.0f64;
            for _ in 0..systems {
                let order = rng.random_range(1..=3usize);
                let len = rng.random_range(1..=3usize);
                let kernels = (1..=order)
                    .map(|k| {
                        (0..len.pow(k as u32))
                            .map(|_| rng.random_range(-1.0..1.0))
                            .collect()
                    })
                    .collect();
                let weights = VolterraWeights::from_kernels(len, kernels)?;
                let n = rng.random_range(2..=10usize);
                let series: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let direct = oracle_direct(&weights, &series)?;
                let nested = oracle_nested(&weights, &series)?;
                for (d, m) in direct.iter().zip(&nested) {
                    max_abs_diff = max_abs_diff.max((d - m).abs());
                }
            }
            let pass = max_abs_diff <= 1e-12;
            print_json(&json!({
                "systems": systems,
                "max_abs_diff": max_abs_diff,
                "tolerance": 1e-12,
                "pass": pass,
            }));
            Ok(pass)
        }
        Command::Order { layers, config } => {
            let depth = match (layers, config) {
                (Some(z), _) => z,
                (None, Some(path)) => {
                    let run_config = RunConfig::load(&path)?;
                    match run_config.network()? {
                        NetworkConfig::Cascade(cascade) => cascade.to_config()?.layers.len(),
                        NetworkConfig::TwoStream(two_stream) => {
                            two_stream.to_config()?.rgb.layers.len()
                        }
                    }
                }
                (None, None) => {
                    return Err(VnnError::Config("order needs --layers or --config".into()))
                }
            };
            if depth == 0 {
                return Err(VnnError::Config("order needs at least one layer".into()));
            }
            print_json(&order_json(&order_report_for_depth(depth)));
            Ok(true)
        }
    }
}

fn train_summary_json(
    report: &TrainReport,
    kind: &str,
    model_path: &std::path::Path,
    report_path: &std::path::Path,
) -> serde_json::Value {
    json!({
        "kind": kind,
        "epochs_run": report.summary.epochs_run,
        "final_train_acc": report.final_train_acc(),
        "final_eval_acc": report.final_eval_acc(),
        "initial_objective": report.summary.initial_objective,
        "final_objective": report.summary.final_objective,
        "param_census": report.summary.param_census,
        "seed": report.summary.seed,
        "model": model_path,
        "report": report_path,
    })
}

fn random_clip(shape: &[usize; 4], rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let len = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

fn random_sample(
    rgb_shape: &[usize; 4],
    flow_shape: Option<&[usize; 4]>,
    classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Sample> {
    Ok(Sample {
        id: "grad-check".into(),
        label: rng.random_range(0..classes),
        rgb: random_clip(rgb_shape, rng)?,
        flow: flow_shape.map(|s| random_clip(s, rng)).transpose()?,
    })
}
