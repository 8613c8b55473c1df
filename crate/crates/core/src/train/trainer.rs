use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::config::TrainConfig;
use super::dataset::{derive_seed, Sample};
use crate::autodiff::{AdamConfig, AdamState, Graph, Var};
use crate::error::{dim_err, Error, Result};
use crate::mri::EncodingOperator;
use crate::nets::{bind_params, net_forward, reconstruct, NetParams};

const SHUFFLE_STREAM: u64 = 3;

/// `(1/N) Σ ‖m̂(f_i) − m_ref,i‖²` over the batch, as a graph node. Each
/// sample runs through its own encoding operator.
pub fn batch_loss(g: &mut Graph, params: &NetParams, vars: &[Var], batch: &[&Sample]) -> Result<Var> {
    if batch.is_empty() {
        return dim_err("batch_loss needs a nonempty batch");
    }
    let mut losses = Vec::with_capacity(batch.len());
    for s in batch {
        s.f.check_same_dims(s.m_ref.dims(), "k-space and reference")?;
        let op = Arc::new(EncodingOperator::new(s.mask.clone())?);
        let f = g.constant(s.f.to_tensor());
        let out = net_forward(g, params, vars, f, op)?;
        let target = g.constant(s.m_ref.to_tensor());
        losses.push(g.mse_loss(out, target)?);
    }
    g.mean(&losses)
}

/// `‖m̂(f) − m_ref‖²` without building gradients.
pub fn sample_loss(params: &NetParams, s: &Sample) -> Result<f64> {
    let out = reconstruct(params, &s.f, &s.mask)?;
    Ok(out.lin_comb(1.0, &s.m_ref, -1.0).norm_sqr())
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_time_s: f64,
}

/// Two records are equal when their losses agree bit for bit; wall time is
/// not part of the comparison.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.val_loss.to_bits() == other.val_loss.to_bits()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// One JSON object per epoch.
    pub fn write_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct Best {
    val_loss: f64,
    train_loss: f64,
    epoch: usize,
    params: NetParams,
}

/// Epoch-by-epoch ADAM training over `data[..train_count]`, validating on
/// the following `val_count` samples after each epoch.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: &'a [Sample],
    params: NetParams,
    adam: AdamState,
    shuffle: ChaCha8Rng,
    order: Vec<usize>,
    epoch: usize,
    step: usize,
    history: TrainHistory,
    best: Option<Best>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, data: &'a [Sample]) -> Result<Self> {
        cfg.validate(data.len())?;
        let params = NetParams::init(cfg.variant, cfg.seed);
        let adam = AdamState::new(params.tensors().iter().map(|t| t.data.len()), AdamConfig::default());
        let shuffle = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_STREAM, 0));
        let order = (0..cfg.train_count).collect();
        Ok(Trainer { cfg, data, params, adam, shuffle, order, epoch: 0, step: 0, history: TrainHistory::default(), best: None })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// ADAM steps taken so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    /// Loss of the batch `indices` before the update, then one ADAM step.
    pub fn train_step(&mut self, indices: &[usize]) -> Result<f64> {
        let ctx = |epoch, step, msg: String| Error::Training { epoch, step, msg };
        let batch: Vec<&Sample> = indices.iter().map(|&i| &self.data[i]).collect();
        let mut g = Graph::new();
        let vars = bind_params(&mut g, &self.params)?;
        let loss = batch_loss(&mut g, &self.params, &vars, &batch)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(ctx(self.epoch + 1, self.step + 1, format!("non-finite loss {value}")));
        }
        g.backward(loss)?;
        let grads: Vec<Vec<f64>> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();
        drop(g);
        let names: Vec<String> = self.params.tensors().iter().map(|t| t.name.clone()).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let mut param_refs: Vec<&mut [f64]> = self.params.tensors_mut().iter_mut().map(|t| t.data.as_mut_slice()).collect();
        self.adam
            .step(&mut param_refs, &grad_refs, &names, self.cfg.learning_rate)
            .map_err(|e| ctx(self.epoch + 1, self.step + 1, e.to_string()))?;
        self.step += 1;
        Ok(value)
    }

    /// Mean per-sample loss on the validation split.
    pub fn validation_loss(&self) -> Result<f64> {
        let val = &self.data[self.cfg.train_count..self.cfg.train_count + self.cfg.val_count];
        let mut total = 0.0;
        for s in val {
            total += sample_loss(&self.params, s)?;
        }
        Ok(total / val.len() as f64)
    }

    /// One shuffled pass over the training split followed by validation.
    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let start = Instant::now();
        self.order.shuffle(&mut self.shuffle);
        let order = self.order.clone();
        let mut weighted = 0.0;
        for chunk in order.chunks(self.cfg.batch_size) {
            weighted += self.train_step(chunk)? * chunk.len() as f64;
        }
        self.epoch += 1;
        let train_loss = weighted / order.len() as f64;
        let val_loss = self.validation_loss()?;
        if !val_loss.is_finite() {
            return Err(Error::Training { epoch: self.epoch, step: self.step, msg: format!("non-finite validation loss {val_loss}") });
        }
        if self.best.as_ref().is_none_or(|b| val_loss < b.val_loss) {
            self.best = Some(Best { val_loss, train_loss, epoch: self.epoch, params: self.params.clone() });
        }
        self.history.records.push(EpochRecord { epoch: self.epoch, train_loss, val_loss, wall_time_s: start.elapsed().as_secs_f64() });
        Ok(self.history.records.last().expect("just pushed"))
    }

    /// Best-validation checkpoint, or the current parameters when no epoch
    /// has completed.
    pub fn checkpoint(&self) -> Checkpoint {
        let config = Some(self.cfg.clone());
        match &self.best {
            Some(b) => Checkpoint::new(
                b.params.clone(),
                CheckpointMeta { epoch: b.epoch, train_loss: Some(b.train_loss), val_loss: Some(b.val_loss), seed: self.cfg.seed, config },
            ),
            None => Checkpoint::new(self.params.clone(), CheckpointMeta { seed: self.cfg.seed, config, ..Default::default() }),
        }
    }

    pub fn finish(self) -> (Checkpoint, TrainHistory) {
        (self.checkpoint(), self.history)
    }
}

/// `cfg.epochs` epochs of [`Trainer::run_epoch`].
pub fn train(cfg: &TrainConfig, data: &[Sample]) -> Result<(Checkpoint, TrainHistory)> {
    let mut t = Trainer::new(cfg.clone(), data)?;
    for _ in 0..cfg.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}
