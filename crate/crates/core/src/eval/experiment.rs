use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    encode_categoricals, impute_column_mean, latest_window, load_series_csv, make_windows_in, minmax_apply,
    minmax_fit, minmax_invert, split_chronological, CsvSchema, ScaleParams, SeriesTable, SplitRanges,
    SupervisedWindows,
};
use crate::error::{Error, Result, StageExt};
use crate::eval::{horizon_metrics, rmse, MetricsReport, Provenance, RunConfig};
use crate::model::{save_checkpoint, ModelGraph, ModelSpec};
use crate::optim::{fit_with, predict_batched, TrainLog};
use crate::parallel::Execution;
use crate::tensor::Tensor;

/// SHA-256 of a file's bytes, hex encoded.
pub fn data_digest(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Preprocessed data ready for training and evaluation.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// Imputed, encoded and scaled.
    pub table: SeriesTable,
    pub ranges: SplitRanges,
    pub scale: ScaleParams,
    pub train: SupervisedWindows,
    pub val: SupervisedWindows,
    pub test: SupervisedWindows,
    pub data_digest: String,
}

fn clean(table: &SeriesTable, schema: &CsvSchema) -> Result<SeriesTable> {
    let table = impute_column_mean(table);
    encode_categoricals(&table, &schema.categoricals, schema.one_hot).stage("encode")
}

fn check_layout(spec: &ModelSpec, w: &SupervisedWindows) -> Result<()> {
    let (n, d) = spec.input_layout();
    let shape = w.inputs.shape();
    if shape[1] != n || shape[3] != d {
        return Err(Error::config(
            "model",
            format!("expects {n} branch(es) of {d} channel(s), data provides {} of {}", shape[1], shape[3]),
        ));
    }
    if let ModelSpec::Baseline(c) = spec {
        if c.target != w.target_position {
            return Err(Error::config(
                "model.target",
                format!("target sits at {:?} in the data, config says {:?}", w.target_position, c.target),
            ));
        }
    }
    Ok(())
}

/// `load → impute → encode → split → fit scale on train rows → apply → window`.
pub fn prepare_data(cfg: &RunConfig) -> Result<Prepared> {
    let schema = &cfg.data.schema;
    let raw = load_series_csv(&cfg.data.path, schema).stage("load")?;
    let digest = data_digest(&cfg.data.path).stage("load")?;
    let table = clean(&raw, schema)?;
    let ranges = split_chronological(&table, &cfg.split).stage("split")?;
    let scale = minmax_fit(&table, ranges.train.clone()).stage("scale")?;
    let table = minmax_apply(&table, &scale).stage("scale")?;
    let (l, h) = (cfg.model.lookup(), cfg.model.horizon());
    let train = make_windows_in(&table, l, h, ranges.train.clone()).stage("window")?;
    let val = make_windows_in(&table, l, h, ranges.val.clone()).stage("window")?;
    let test = make_windows_in(&table, l, h, ranges.test.clone()).stage("window")?;
    check_layout(&cfg.model, &train).stage("window")?;
    info!(
        "data: {} rows, split {:?}, windows train/val/test = {}/{}/{}",
        table.len(),
        ranges.sizes(),
        train.len(),
        val.len(),
        test.len()
    );
    Ok(Prepared {
        table,
        ranges,
        scale,
        train,
        val,
        test,
        data_digest: digest,
    })
}

/// Predictions and truths of `windows` in original target units.
fn predict_units(
    model: &ModelGraph,
    windows: &SupervisedWindows,
    scale: &ScaleParams,
    target: &str,
    chunk: usize,
    exec: Execution,
) -> Result<(Tensor, Tensor)> {
    let pred = predict_batched(model, &windows.inputs, chunk, exec)?;
    let shape = pred.shape().to_vec();
    let p = minmax_invert(pred.data(), scale, target)?;
    let t = minmax_invert(windows.targets.data(), scale, target)?;
    Ok((Tensor::from_vec(&shape, p)?, Tensor::from_vec(&shape, t)?))
}

/// Builds the model from the run seed and fits it on the training windows,
/// logging validation RMSE (original units) after every epoch.
pub fn train_model(cfg: &RunConfig, data: &Prepared, exec: Execution) -> Result<(ModelGraph, TrainLog)> {
    let mut init = crate::nn::init_rng(cfg.seed());
    let mut model = ModelGraph::build(cfg.model.clone(), &mut init).stage("build")?;
    if !cfg.model.is_trainable() {
        return Ok((model, TrainLog::default()));
    }
    let target = data.table.target.clone();
    let log = fit_with(
        &mut model,
        &data.train.inputs,
        &data.train.targets,
        &cfg.train,
        exec,
        |m, _| {
            let (p, t) = predict_units(m, &data.val, &data.scale, &target, cfg.eval_chunk, exec)?;
            Ok(Some(rmse(p.data(), t.data())?))
        },
    )
    .stage("train")?;
    Ok((model, log))
}

/// One plot-data record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub timestamp: String,
    pub horizon: usize,
    pub truth: f64,
    pub prediction: f64,
    pub model: String,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// N×H, original units.
    pub predictions: Tensor,
    pub truths: Tensor,
    pub plot: Vec<PlotRow>,
}

pub fn evaluate_model(model: &ModelGraph, cfg: &RunConfig, data: &Prepared, exec: Execution) -> Result<Evaluation> {
    let target = &data.table.target;
    let (pred, truth) =
        predict_units(model, &data.test, &data.scale, target, cfg.eval_chunk, exec).stage("evaluate")?;
    let mut report = horizon_metrics(&pred, &truth, &cfg.buckets()).stage("evaluate")?;
    report.model = model.name();
    report.provenance = Provenance {
        seed: cfg.seed(),
        config_digest: cfg.digest()?,
        data_digest: data.data_digest.clone(),
    };
    let h = pred.dim(1);
    let mut plot = Vec::with_capacity(pred.len());
    for (i, &row) in data.test.target_rows.iter().enumerate() {
        for j in 0..h {
            plot.push(PlotRow {
                timestamp: data.table.timestamps[row + j].format("%Y-%m-%d %H:%M").to_string(),
                horizon: j + 1,
                truth: truth.data()[i * h + j],
                prediction: pred.data()[i * h + j],
                model: report.model.clone(),
            });
        }
    }
    Ok(Evaluation {
        report,
        predictions: pred,
        truths: truth,
        plot,
    })
}

/// `timestamp,horizon,truth,prediction,model` CSV.
pub fn render_plot_data(rows: &[PlotRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Checkpoint(e.to_string()))
}

/// Metadata stored in checkpoints so a model can be applied to new files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema: CsvSchema,
    pub scale: ScaleParams,
    pub seed: u64,
    pub config_digest: String,
    pub data_digest: String,
}

impl RunMeta {
    pub fn new(cfg: &RunConfig, data: &Prepared) -> Result<Self> {
        Ok(Self {
            schema: cfg.data.schema.clone(),
            scale: data.scale.clone(),
            seed: cfg.seed(),
            config_digest: cfg.digest()?,
            data_digest: data.data_digest.clone(),
        })
    }

    pub fn to_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(v.clone())?)
    }
}

/// Preprocesses a raw table with a trained model's schema and scaling, then
/// forecasts from its last `lookup` rows. Returns original-unit values.
pub fn forecast_from_table(model: &mut ModelGraph, meta: &RunMeta, raw: &SeriesTable) -> Result<Vec<f64>> {
    let table = clean(raw, &meta.schema)?;
    let table = minmax_apply(&table, &meta.scale).stage("scale")?;
    let x = latest_window(&table, model.spec().lookup()).stage("window")?;
    let y = model.predict(&x)?;
    minmax_invert(y.data(), &meta.scale, &table.target)
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub model: ModelGraph,
    pub log: TrainLog,
    pub evaluation: Evaluation,
    pub report_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub plot_path: PathBuf,
}

/// Full pipeline; writes `report.json`, `model.ckpt`, `train_log.jsonl` and
/// `plot_data.csv` into the configured output directory.
pub fn run_experiment(cfg: &RunConfig, exec: Execution) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let (model, log) = train_model(cfg, &data, exec)?;
    let evaluation = evaluate_model(&model, cfg, &data, exec)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).stage("write")?;
    let meta = RunMeta::new(cfg, &data)?;
    let out = ExperimentOutput {
        report_path: dir.join("report.json"),
        checkpoint_path: dir.join("model.ckpt"),
        log_path: dir.join("train_log.jsonl"),
        plot_path: dir.join("plot_data.csv"),
        model,
        log,
        evaluation,
    };
    fs::write(&out.report_path, out.evaluation.report.to_json()?).stage("write")?;
    save_checkpoint(&out.checkpoint_path, &out.model, &meta.to_value()?).stage("write")?;
    fs::write(&out.log_path, out.log.to_jsonl()?).stage("write")?;
    fs::write(&out.plot_path, render_plot_data(&out.evaluation.plot)?).stage("write")?;
    Ok(out)
}
