use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GradBuffer, Layer, Mode, SeededRng};
use crate::optim::{adam_step, mse_loss_scaled, AdamState};
use crate::parallel::{chunk_ranges, Execution};
use crate::tensor::Tensor;

fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    100
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_chunk() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// Required: there is no wall-clock fallback.
    pub seed: u64,
    /// Global gradient-norm clip; off when absent.
    #[serde(default)]
    pub clip_norm: Option<f64>,
    /// Samples per gradient work unit. Fixed independently of the thread
    /// count so that parallel and sequential runs agree bit for bit.
    #[serde(default = "default_chunk")]
    pub grad_chunk: usize,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            batch_size: default_batch(),
            epochs: default_epochs(),
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            seed,
            clip_norm: None,
            grad_chunk: default_chunk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be a positive number"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta1/beta2", "must lie in [0, 1)"));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if self.clip_norm.is_some_and(|c| !c.is_finite() || c <= 0.0) {
            return Err(Error::config("clip_norm", "must be positive"));
        }
        if self.grad_chunk == 0 {
            return Err(Error::config("grad_chunk", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Trains without a validation hook.
pub fn fit<L>(model: &mut L, inputs: &Tensor, targets: &Tensor, cfg: &TrainConfig, exec: Execution) -> Result<TrainLog>
where
    L: Layer + Clone + Sync,
{
    fit_with(model, inputs, targets, cfg, exec, |_, _| Ok(None))
}

/// Mini-batch Adam on the mean squared error.
///
/// Each epoch reshuffles the sample order from the seeded generator; the
/// last partial batch is kept. After every epoch `on_epoch(model, epoch)`
/// may return a validation score to log; it never alters training.
pub fn fit_with<L, F>(
    model: &mut L,
    inputs: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
    exec: Execution,
    mut on_epoch: F,
) -> Result<TrainLog>
where
    L: Layer + Clone + Sync,
    F: FnMut(&mut L, usize) -> Result<Option<f64>>,
{
    cfg.validate()?;
    let n = inputs.shape().first().copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::Empty("training set".into()));
    }
    if targets.rank() != 2 || targets.dim(0) != n {
        return Err(Error::shape(
            "fit targets",
            format!("[{n}, H]"),
            format!("{:?}", targets.shape()),
        ));
    }

    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let batches = chunk_ranges(n, cfg.batch_size);
        for (bi, batch) in batches.iter().enumerate() {
            let idx = &order[batch.clone()];
            let chunks: Vec<(std::ops::Range<usize>, u64)> = chunk_ranges(idx.len(), cfg.grad_chunk)
                .into_iter()
                .map(|r| (r, rng.random::<u64>()))
                .collect();
            let denom = idx.len() * targets.dim(1);
            let shared: &L = model;
            let results = exec.map(&chunks, |_, (range, seed)| -> Result<(f64, GradBuffer)> {
                let rows = &idx[range.clone()];
                let mut worker = shared.clone();
                worker.zero_grad();
                let mut chunk_rng = SeededRng::seed_from_u64(*seed);
                let pred = worker.forward(&inputs.gather_rows(rows), Mode::Train, &mut chunk_rng)?;
                let (loss, grad) = mse_loss_scaled(&pred, &targets.gather_rows(rows), denom)?;
                worker.backward(&grad)?;
                Ok((loss, GradBuffer::take(&worker)))
            });

            let mut total: Option<GradBuffer> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                match &mut total {
                    None => total = Some(grads),
                    Some(t) => t.accumulate(&grads)?,
                }
            }
            let mut total = total.ok_or_else(|| Error::Empty("batch".into()))?;
            if !batch_loss.is_finite() || !total.all_finite() {
                return Err(Error::Diverged { epoch, batch: bi + 1 });
            }
            if let Some(c) = cfg.clip_norm {
                clip(&mut total, c);
            }
            total.store_into(model)?;
            adam_step(model.params_mut(), &mut adam, cfg)?;
            loss_sum += batch_loss * idx.len() as f64;
        }
        let train_loss = loss_sum / n as f64;
        let val_rmse = on_epoch(model, epoch)?;
        match val_rmse {
            Some(v) => info!("epoch {epoch}: train_loss={train_loss:.6e} val_rmse={v:.4}"),
            None => info!("epoch {epoch}: train_loss={train_loss:.6e}"),
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_rmse,
        });
    }
    Ok(log)
}

fn clip(buf: &mut GradBuffer, max_norm: f64) {
    let norm = buf.l2_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in buf.grads_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Eval-mode predictions for every row of `inputs`, computed in fixed chunks
/// and concatenated in order.
pub fn predict_batched<L>(model: &L, inputs: &Tensor, chunk: usize, exec: Execution) -> Result<Tensor>
where
    L: Layer + Clone + Sync,
{
    let n = inputs.shape().first().copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::Empty("prediction inputs".into()));
    }
    let ranges = chunk_ranges(n, chunk);
    let parts = exec.map(&ranges, |_, r| {
        let mut worker = model.clone();
        // eval mode never draws from the generator
        let mut rng = SeededRng::seed_from_u64(0);
        worker.forward(&inputs.slice_rows(r.start, r.end), Mode::Eval, &mut rng)
    });
    Tensor::concat_rows(&parts.into_iter().collect::<Result<Vec<_>>>()?)
}
