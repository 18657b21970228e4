use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use daqff::checks::{gradient_suite, TOLERANCE};
use daqff::data::{load_series_csv, synth_table, write_series_csv, SynthKind};
use daqff::eval::{evaluate_model, forecast_from_table, prepare_data, render_plot_data, train_model, RunConfig, RunMeta};
use daqff::model::{load_checkpoint, save_checkpoint, ModelGraph};
use daqff::nn::init_rng;
use daqff::parallel::Execution;

#[derive(Parser)]
#[command(name = "daqff", version, about = "Hybrid CNN + Bi-LSTM PM2.5 forecaster")]
struct Cli {
    /// Run all chunked work on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write its checkpoint and training log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint (or the persistence baseline) on the test split.
    Evaluate {
        /// Not needed when the configured model is `persistence`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "plot-data")]
        plot_data: PathBuf,
    },
    /// Forecast from the last rows of a CSV file; prints one value per line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        horizon: usize,
    },
    /// Finite-difference gradient checks of every layer and model.
    Gradcheck {
        /// Twenty random instances per kind instead of one.
        #[arg(long)]
        full: bool,
    },
    /// Write a deterministic synthetic dataset.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        stations: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn banner(command: &str, cfg: &RunConfig) -> Result<()> {
    eprintln!("daqff {command} | seed {} | config {}", cfg.seed(), &cfg.digest()?[..16]);
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn train(config: &Path, out: &Path, exec: Execution) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    banner("train", &cfg)?;
    let data = prepare_data(&cfg)?;
    let (model, log) = train_model(&cfg, &data, exec)?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&ckpt, &model, &RunMeta::new(&cfg, &data)?.to_value()?)?;
    write_file(&out.join("train_log.jsonl"), &log.to_jsonl()?)?;
    if let Some(last) = log.epochs.last() {
        info!("final train loss {:.6e}", last.train_loss);
    }
    println!("{}", ckpt.display());
    Ok(())
}

fn evaluate(model: Option<&Path>, config: &Path, report: &Path, plot: &Path, exec: Execution) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    banner("evaluate", &cfg)?;
    let graph = match model {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.model.spec() != &cfg.model {
                bail!("checkpoint {} was trained with a different model config", path.display());
            }
            ckpt.model
        }
        None if !cfg.model.is_trainable() => ModelGraph::build(cfg.model.clone(), &mut init_rng(cfg.seed()))?,
        None => bail!("--model is required for trainable model `{}`", cfg.model.name()),
    };
    let data = prepare_data(&cfg)?;
    let eval = evaluate_model(&graph, &cfg, &data, exec)?;
    write_file(report, &eval.report.to_json()?)?;
    write_file(plot, &render_plot_data(&eval.plot)?)?;
    for b in &eval.report.buckets {
        println!("{} {}: rmse {:.4} mae {:.4}", eval.report.model, b.bucket, b.rmse, b.mae);
    }
    Ok(())
}

fn predict(model: &Path, input: &Path, horizon: usize) -> Result<()> {
    let mut ckpt = load_checkpoint(model)?;
    let meta = RunMeta::from_value(&ckpt.meta).context("checkpoint carries no run metadata")?;
    eprintln!("daqff predict | seed {} | config {}", meta.seed, &meta.config_digest[..16.min(meta.config_digest.len())]);
    let available = ckpt.model.horizon();
    if horizon == 0 || horizon > available {
        bail!("horizon must be between 1 and {available} for this model");
    }
    let table = load_series_csv(input, &meta.schema)?;
    let values = forecast_from_table(&mut ckpt.model, &meta, &table)?;
    for v in &values[..horizon] {
        println!("{v}");
    }
    Ok(())
}

fn gradcheck(full: bool) -> Result<bool> {
    let instances = if full { 20 } else { 1 };
    eprintln!("daqff gradcheck | {instances} instance(s) per kind | tolerance {TOLERANCE:e}");
    let entries = gradient_suite(instances)?;
    let mut ok = true;
    let mut i = 0;
    while i < entries.len() {
        let kind = entries[i].kind;
        let group: Vec<_> = entries[i..].iter().take_while(|e| e.kind == kind).collect();
        let worst = group.iter().map(|e| e.report.max_error()).fold(0.0, f64::max);
        let passed = group.iter().all(|e| e.report.passed());
        ok &= passed;
        println!("{} {:<26} max rel error {worst:.3e}", if passed { "PASS" } else { "FAIL" }, kind.name());
        i += group.len();
    }
    Ok(ok)
}

fn synth(kind: SynthKind, rows: usize, stations: usize, out: &Path, seed: u64) -> Result<()> {
    eprintln!("daqff synth | seed {seed} | {kind} {rows} rows");
    let table = synth_table(kind, rows, stations, seed)?;
    write_series_csv(&table, out, &kind.schema(stations))?;
    println!("{}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Train { config, out } => train(&config, &out, exec)?,
        Command::Evaluate {
            model,
            config,
            report,
            plot_data,
        } => evaluate(model.as_deref(), &config, &report, &plot_data, exec)?,
        Command::Predict { model, input, horizon } => predict(&model, &input, horizon)?,
        Command::Gradcheck { full } => return gradcheck(full),
        Command::Synth {
            kind,
            rows,
            stations,
            out,
            seed,
        } => synth(kind, rows, stations, &out, seed)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
