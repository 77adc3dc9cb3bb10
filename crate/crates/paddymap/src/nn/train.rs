//! Mini-batch training with Adam, streaming metrics, and seeded patch
//! augmentation.
//!
//! Every stochastic draw (shuffle order, augmentation, dropout masks) is
//! derived from (seed, purpose, counters), so a run is bit-reproducible for
//! any thread count and training can resume from a checkpoint exactly.

use serde::Serialize;

use super::model::{AdamState, Network};
use super::ops::{cross_entropy_loss, softmax_ce_backward};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::par;
use crate::stratify::records::{RecordSet, SampleRecord};
use crate::stratify::CLASS_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub augment_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // Adam at its framework-default settings.
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            augment_prob: 0.8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec("epochs and batch size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.augment_prob) {
            return Err(Error::InvalidSpec(format!(
                "augment probability {} outside [0,1]",
                self.augment_prob
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet {
    pub loss: f64,
    pub categorical_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricSet {
    pub fn zeros() -> MetricSet {
        MetricSet { loss: 0.0, categorical_accuracy: 0.0, precision: 0.0, recall: 0.0, f1: 0.0 }
    }
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * (recall * precision) / (recall + precision)
    }
}

/// Streaming confusion/loss accumulator over probability tensors with
/// one-hot labels. Precision and recall are micro-averaged over all class
/// channels at a 0.5 probability threshold; categorical accuracy compares
/// argmaxes (ties to the lowest class index).
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricAccumulator {
    loss_sum: f64,
    records: u64,
    pixels: u64,
    correct: u64,
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl MetricAccumulator {
    pub fn add(&mut self, probs: &Tensor, labels: &Tensor) -> Result<()> {
        if !probs.same_shape(labels) {
            return Err(Error::ShapeMismatch(format!(
                "metrics: {:?} vs {:?}",
                probs.shape(),
                labels.shape()
            )));
        }
        self.loss_sum += cross_entropy_loss(probs, labels)?;
        self.records += 1;
        let p = probs.plane_len();
        for ni in 0..probs.n {
            let base = ni * probs.c * p;
            for px in 0..p {
                let mut pred = 0usize;
                let mut pred_v = f32::NEG_INFINITY;
                let mut truth = 0usize;
                for c in 0..probs.c {
                    let q = probs.data[base + c * p + px];
                    if q > pred_v {
                        pred_v = q;
                        pred = c;
                    }
                    let y = labels.data[base + c * p + px];
                    if y > 0.5 {
                        truth = c;
                    }
                    let positive = q > 0.5;
                    match (positive, y > 0.5) {
                        (true, true) => self.tp += 1,
                        (true, false) => self.fp += 1,
                        (false, true) => self.fn_ += 1,
                        (false, false) => {}
                    }
                }
                if pred == truth {
                    self.correct += 1;
                }
                self.pixels += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.loss_sum += other.loss_sum;
        self.records += other.records;
        self.pixels += other.pixels;
        self.correct += other.correct;
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn finish(&self) -> MetricSet {
        if self.records == 0 {
            return MetricSet::zeros();
        }
        let precision = if self.tp + self.fp == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fp) as f64 };
        let recall = if self.tp + self.fn_ == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fn_) as f64 };
        MetricSet {
            loss: self.loss_sum / self.records as f64,
            categorical_accuracy: self.correct as f64 / self.pixels as f64,
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

/// One-shot metric evaluation for a prediction/label tensor pair.
pub fn metrics(predictions: &Tensor, labels: &Tensor) -> Result<MetricSet> {
    let mut acc = MetricAccumulator::default();
    acc.add(predictions, labels)?;
    Ok(acc.finish())
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

/// Seeded augmentation of a patch record: with probability `prob`, applies
/// flips (p=0.5 each), a rotation drawn from {90, 180, 270} degrees, a
/// brightness shift U(-0.1, 0.1) and a contrast scale U(0.9, 1.1) about the
/// patch mean. Spatial ops hit features and labels alike; photometric ops
/// touch features only, clamped back to [0, 1]. No-op for 1x1 records.
pub fn augment(record: &SampleRecord, channels: usize, size: usize, prob: f64, seed: u64) -> SampleRecord {
    let mut out = record.clone();
    if size <= 1 {
        return out;
    }
    let mut rng = crate::rng::stream(seed, "augment", &[record.point_id]);
    if rand::Rng::gen::<f64>(&mut rng) >= prob {
        return out;
    }
    let hflip = rand::Rng::gen_bool(&mut rng, 0.5);
    let vflip = rand::Rng::gen_bool(&mut rng, 0.5);
    let quarter_turns = rand::Rng::gen_range(&mut rng, 1u8..=3);
    let brightness: f32 = rand::Rng::gen_range(&mut rng, -0.1..0.1);
    let contrast: f32 = rand::Rng::gen_range(&mut rng, 0.9..1.1);

    let spatial = |data: &mut [f32], planes: usize| {
        for p in 0..planes {
            let plane = &mut data[p * size * size..(p + 1) * size * size];
            if hflip {
                flip_horizontal(plane, size);
            }
            if vflip {
                flip_vertical(plane, size);
            }
            rotate_quarters(plane, size, quarter_turns);
        }
    };
    spatial(&mut out.features, channels);
    spatial(&mut out.labels, CLASS_COUNT);

    let mean = out.features.iter().map(|&v| v as f64).sum::<f64>() / out.features.len() as f64;
    let mean = mean as f32;
    for v in out.features.iter_mut() {
        let contrasted = mean + contrast * (*v - mean);
        *v = (contrasted + brightness).clamp(0.0, 1.0);
    }
    out
}

pub(crate) fn flip_horizontal(plane: &mut [f32], size: usize) {
    for row in 0..size {
        plane[row * size..(row + 1) * size].reverse();
    }
}

pub(crate) fn flip_vertical(plane: &mut [f32], size: usize) {
    for row in 0..size / 2 {
        let (top, rest) = plane.split_at_mut((size - 1 - row) * size);
        let top_row = &mut top[row * size..(row + 1) * size];
        top_row.swap_with_slice(&mut rest[..size]);
    }
}

/// Rotate by `quarters` * 90 degrees clockwise.
pub(crate) fn rotate_quarters(plane: &mut [f32], size: usize, quarters: u8) {
    for _ in 0..quarters % 4 {
        let src = plane.to_vec();
        for r in 0..size {
            for c in 0..size {
                plane[r * size + c] = src[(size - 1 - c) * size + r];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: MetricSet,
    pub val: MetricSet,
}

/// Per-epoch metrics CSV matching the reported table columns.
pub fn epoch_metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,split,loss,categorical_accuracy,precision,recall,f1\n");
    for e in history {
        for (split, m) in [("train", &e.train), ("val", &e.val)] {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                e.epoch, split, m.loss, m.categorical_accuracy, m.precision, m.recall, m.f1
            ));
        }
    }
    out
}

fn record_tensors(record: &SampleRecord, channels: usize, size: usize) -> (Tensor, Tensor) {
    let x = Tensor { n: 1, c: channels, h: size, w: size, data: record.features.clone() };
    let y = Tensor { n: 1, c: CLASS_COUNT, h: size, w: size, data: record.labels.clone() };
    (x, y)
}

/// Mean prediction metrics over a record set in inference mode.
pub fn evaluate(net: &Network, set: &RecordSet) -> Result<MetricSet> {
    if set.records.is_empty() {
        return Ok(MetricSet::zeros());
    }
    let chunk = 8usize;
    let n_chunks = set.records.len().div_ceil(chunk);
    let partials: Vec<Result<MetricAccumulator>> = par::map_range(n_chunks, |ci| {
        let lo = ci * chunk;
        let hi = (lo + chunk).min(set.records.len());
        let mut acc = MetricAccumulator::default();
        for r in &set.records[lo..hi] {
            let (x, y) = record_tensors(r, set.channels, set.patch_size);
            let probs = net.predict(&x)?;
            acc.add(&probs, &y)?;
        }
        Ok(acc)
    });
    let mut total = MetricAccumulator::default();
    for p in partials {
        total.merge(&p?);
    }
    Ok(total.finish())
}

/// Train with mini-batch Adam. Returns per-epoch train/val metrics.
pub fn train(
    net: &mut Network,
    adam: &mut AdamState,
    train_set: &RecordSet,
    val_set: &RecordSet,
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if train_set.records.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    if train_set.channels != net.spec().input_channels {
        return Err(Error::ChannelMismatch {
            expected: net.spec().input_channels,
            found: train_set.channels,
        });
    }
    let size = train_set.patch_size;
    let channels = train_set.channels;

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.records.len()).collect();
        let mut rng = crate::rng::stream(cfg.seed, "shuffle", &[epoch as u64]);
        for i in 0..order.len().saturating_sub(1) {
            let j = i + rand::Rng::gen_range(&mut rng, 0..order.len() - i);
            order.swap(i, j);
        }

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let per_sample: Vec<Result<(f64, Vec<Tensor>)>> = par::map_range(batch.len(), |slot| {
                let record_idx = batch[slot];
                let record = &train_set.records[record_idx];
                let augmented = augment(
                    record,
                    channels,
                    size,
                    cfg.augment_prob,
                    crate::rng::derive(cfg.seed, "augment-epoch", &[epoch as u64]),
                );
                let (x, y) = record_tensors(&augmented, channels, size);
                let mut drop_rng = crate::rng::stream(
                    cfg.seed,
                    "dropout",
                    &[epoch as u64, batch_idx as u64, slot as u64],
                );
                let (probs, cache) = net.forward_train(&x, &mut drop_rng)?;
                let loss = cross_entropy_loss(&probs, &y)?;
                let dlogits = softmax_ce_backward(&probs, &y);
                let grads = net.backward(&cache, &dlogits);
                Ok((loss, grads))
            });

            // fixed-order reduction
            let mut grads_sum: Option<Vec<Tensor>> = None;
            for item in per_sample {
                let (_, grads) = item?;
                match grads_sum.as_mut() {
                    None => grads_sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (av, &gv) in a.data.iter_mut().zip(&g.data) {
                                *av += gv;
                            }
                        }
                    }
                }
            }
            let mut grads = grads_sum.expect("non-empty batch");
            let inv = 1.0 / batch.len() as f32;
            for g in grads.iter_mut() {
                for v in g.data.iter_mut() {
                    *v *= inv;
                }
            }
            adam_step(net, adam, &grads, cfg);
        }

        history.push(EpochMetrics {
            epoch: epoch + 1,
            train: evaluate(net, train_set)?,
            val: evaluate(net, val_set)?,
        });
    }
    Ok(history)
}

/// One Adam update in the framework-default formulation:
/// theta -= lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(net: &mut Network, adam: &mut AdamState, grads: &[Tensor], cfg: &TrainConfig) {
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
    for (i, (_, p)) in net.params_mut().into_iter().enumerate() {
        let g = &grads[i].data;
        let m = &mut adam.m[i].data;
        let v = &mut adam.v[i].data;
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] as f64 / bc1;
            let v_hat = v[j] as f64 / bc2;
            p.data[j] -= (cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon)) as f32;
        }
    }
}
