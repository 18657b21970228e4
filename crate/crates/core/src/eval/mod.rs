//! Error metrics, horizon buckets, and the end-to-end experiment harness.

mod config;
mod experiment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use config::{default_buckets, DataConfig, RunConfig};
pub use experiment::{
    data_digest, evaluate_model, forecast_from_table, prepare_data, render_plot_data, run_experiment, train_model,
    Evaluation, ExperimentOutput, PlotRow, Prepared, RunMeta,
};

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape("metric inputs", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::Empty("metric inputs".into()));
    }
    Ok(())
}

/// `√(mean((y − ŷ)²))`.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

/// `mean(|y − ŷ|)`.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let abs: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).abs()).sum();
    Ok(abs / pred.len() as f64)
}

/// Inclusive 1-based horizon range, written `h{from}~h{to}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub from: usize,
    pub to: usize,
}

impl Bucket {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }

    pub fn label(&self) -> String {
        format!("h{}~h{}", self.from, self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketMetric {
    pub bucket: String,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
    pub data_digest: String,
}

/// Test-set errors in original units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub horizon: usize,
    pub n_eval: usize,
    /// Index `h − 1` holds horizon `h`.
    pub rmse: Vec<f64>,
    pub mae: Vec<f64>,
    pub buckets: Vec<BucketMetric>,
    pub provenance: Provenance,
}

impl MetricsReport {
    pub fn bucket(&self, label: &str) -> Option<&BucketMetric> {
        self.buckets.iter().find(|b| b.bucket == label)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Column-wise metrics of N×H predictions; bucket values average the
/// per-horizon metrics of their members.
pub fn horizon_metrics(preds: &Tensor, truths: &Tensor, buckets: &[Bucket]) -> Result<MetricsReport> {
    truths.expect_shape("horizon_metrics", preds.shape())?;
    preds.expect_rank("horizon_metrics", 2)?;
    let (n, h) = (preds.dim(0), preds.dim(1));
    if n == 0 {
        return Err(Error::Empty("evaluation set".into()));
    }
    let column = |t: &Tensor, j: usize| -> Vec<f64> { (0..n).map(|i| t.data()[i * h + j]).collect() };
    let mut r = Vec::with_capacity(h);
    let mut m = Vec::with_capacity(h);
    for j in 0..h {
        let (p, t) = (column(preds, j), column(truths, j));
        r.push(rmse(&p, &t)?);
        m.push(mae(&p, &t)?);
    }
    let mut out = Vec::with_capacity(buckets.len());
    for b in buckets {
        if b.from == 0 || b.from > b.to || b.to > h {
            return Err(Error::config("buckets", format!("{} does not fit horizon {h}", b.label())));
        }
        let k = (b.to - b.from + 1) as f64;
        out.push(BucketMetric {
            bucket: b.label(),
            rmse: r[b.from - 1..b.to].iter().sum::<f64>() / k,
            mae: m[b.from - 1..b.to].iter().sum::<f64>() / k,
        });
    }
    Ok(MetricsReport {
        model: String::new(),
        horizon: h,
        n_eval: n,
        rmse: r,
        mae: m,
        buckets: out,
        provenance: Provenance::default(),
    })
}
