//! Training-stream construction and mini-batch training.
//!
//! In frame-definition mode every instance contributes one frame-template
//! example. With element-definition augmentation on, each gold argument also
//! contributes an example built from its element's own definition. Question
//! mode instead produces one question example per element of the frame.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Model, ModelConfig};
use crate::encoding::{assemble, gold_labels, EncodedPair, SlotLabel, Vocabulary};
use crate::error::{Error, Result};
use crate::framenet::{AnnotatedInstance, FrameStore};
use crate::metrics::{evaluate, Metrics};
use crate::neural::{init_parameters, EncoderConfig, ParameterGradients, ParameterSet};
use crate::pointer::{accumulate_example_gradients, LossBreakdown};
use crate::predict::predict_all;
use crate::template::{
    build_fe_template, build_frame_template, build_question_template, MarkerOptions, TemplateMode,
};
use crate::tensor::{DType, Scalar};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub augment_fe_defs: bool,
    pub markers: MarkerOptions,
    pub template_mode: TemplateMode,
    pub checkpoint_path: Option<PathBuf>,
    /// Dev evaluation period in epochs; 0 disables it.
    pub eval_every: usize,
    pub workers: usize,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 7,
            augment_fe_defs: false,
            markers: MarkerOptions::default(),
            template_mode: TemplateMode::FrameDef,
            checkpoint_path: None,
            eval_every: 0,
            workers: 1,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be a non-negative number",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Encoder shape, everything except the vocabulary size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            d_model: 32,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            max_len: 256,
            dropout: 0.0,
        }
    }
}

impl ModelSettings {
    pub fn encoder_config(&self, vocab_size: usize, seed: u64, dtype: DType) -> EncoderConfig {
        EncoderConfig {
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_len: self.max_len,
            vocab_size,
            seed,
            dtype,
            dropout: self.dropout,
        }
    }
}

/// A freshly initialized model over `vocab`.
pub fn fresh_model<T: Scalar>(
    vocab: Vocabulary,
    settings: &ModelSettings,
    config: &TrainConfig,
) -> Result<Model<T>> {
    let encoder = settings.encoder_config(vocab.len(), config.seed, T::DTYPE);
    Ok(Model {
        params: init_parameters(&encoder)?,
        config: ModelConfig {
            encoder,
            markers: config.markers,
            template_mode: config.template_mode,
        },
        vocab,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FromFrameDef,
    FromFeDef(String),
    FromQuestion(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub pair: EncodedPair,
    pub labels: Vec<SlotLabel>,
    pub provenance: Provenance,
}

impl TrainingExample {
    pub fn frame(&self) -> &str {
        &self.pair.frame
    }
}

pub fn build_training_stream(
    instances: &[AnnotatedInstance],
    store: &FrameStore,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Vec<TrainingExample>> {
    let markers = config.markers;
    let mut stream = Vec::new();
    for instance in instances {
        let frame = store.get(&instance.frame)?;
        let mut push = |template, provenance| -> Result<()> {
            stream.push(TrainingExample {
                pair: assemble(instance, &template, vocab, markers)?,
                labels: gold_labels(instance, &template),
                provenance,
            });
            Ok(())
        };
        match config.template_mode {
            TemplateMode::FrameDef => {
                push(
                    build_frame_template(frame, markers),
                    Provenance::FromFrameDef,
                )?;
                if config.augment_fe_defs {
                    for fe in frame
                        .fe_order
                        .iter()
                        .filter(|fe| instance.argument(fe).is_some())
                    {
                        push(
                            build_fe_template(frame, fe, markers)?,
                            Provenance::FromFeDef(fe.clone()),
                        )?;
                    }
                }
            }
            TemplateMode::Question => {
                for fe in &frame.fe_order {
                    push(
                        build_question_template(frame, fe, markers)?,
                        Provenance::FromQuestion(fe.clone()),
                    )?;
                }
            }
            TemplateMode::FeDef => {
                for fe in &frame.fe_order {
                    push(
                        build_fe_template(frame, fe, markers)?,
                        Provenance::FromFeDef(fe.clone()),
                    )?;
                }
            }
        }
    }
    Ok(stream)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_loss_start: f64,
    pub mean_loss_end: f64,
    pub dev: Option<Metrics>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub examples: usize,
    pub steps: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_dev_f1: Option<f64>,
    pub best_epoch: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub best_checkpoint: Option<PathBuf>,
}

impl TrainingReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// `dir/stem.<suffix>` next to `path`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

struct Adam<T> {
    m: ParameterSet<T>,
    v: ParameterSet<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(params: &ParameterSet<T>) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ParameterSet<T>, grads: &ParameterGradients<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let (lr, eps) = (T::of(lr), T::of(ADAM_EPS));
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Instances and store used for periodic dev evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DevSet<'a> {
    pub instances: &'a [AnnotatedInstance],
    pub store: &'a FrameStore,
}

fn dropout_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd5a6_1f0e_9b3c_2247);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Runs seeded mini-batch training. Each epoch shuffles the stream once with
/// an RNG keyed by `(seed, epoch)`. Per-example gradients may be computed in
/// parallel but are always summed in batch order, so the result does not
/// depend on `workers`.
pub fn train<T: Scalar>(
    stream: &[TrainingExample],
    mut model: Model<T>,
    config: &TrainConfig,
    dev: Option<DevSet<'_>>,
) -> Result<(Model<T>, TrainingReport)> {
    config.validate()?;
    if stream.is_empty() {
        return Err(Error::InvalidConfig("training stream is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
    let encoder = model.config.encoder.clone();
    let use_dropout = encoder.dropout > 0.0;
    let mut adam = Adam::new(&model.params);
    let mut report = TrainingReport {
        examples: stream.len(),
        ..TrainingReport::default()
    };
    let best_path = config
        .checkpoint_path
        .as_deref()
        .map(|p| sibling_path(p, "best.json"));

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..stream.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let (mut sum_start, mut sum_end) = (0.0, 0.0);
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let params = &model.params;
            let results: Vec<Result<(LossBreakdown, ParameterGradients<T>)>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let example = &stream[i];
                        let mut rng = use_dropout.then(|| dropout_rng(config.seed, epoch, i));
                        let mut grads = params.zeros_like();
                        let loss = accumulate_example_gradients(
                            params,
                            &encoder,
                            &example.pair,
                            &example.labels,
                            rng.as_mut(),
                            &mut grads,
                        )?;
                        Ok((loss, grads))
                    })
                    .collect()
            });
            let mut total: Option<ParameterGradients<T>> = None;
            let (mut batch_start, mut batch_end) = (0.0, 0.0);
            for result in results {
                let (loss, grads) = result?;
                batch_start += loss.loss_start;
                batch_end += loss.loss_end;
                match total.as_mut() {
                    Some(t) => t.add_assign(&grads),
                    None => total = Some(grads),
                }
            }
            let mut grads = total.expect("batches are non-empty");
            let batch_loss = LossBreakdown::new(batch_start, batch_end);
            if !batch_loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            grads.scale(T::of(1.0 / batch.len() as f64));
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            if norm > config.clip_norm {
                grads.scale(T::of(config.clip_norm / norm));
            }
            adam.update(&mut model.params, &grads, config.learning_rate);
            report.steps += 1;
            sum_start += batch_start;
            sum_end += batch_end;
        }

        let count = stream.len() as f64;
        let mean = LossBreakdown::new(sum_start / count, sum_end / count);
        let mut record = EpochRecord {
            epoch: epoch + 1,
            mean_loss: mean.total,
            mean_loss_start: mean.loss_start,
            mean_loss_end: mean.loss_end,
            dev: None,
        };
        if let Some(dev) = dev {
            if config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 {
                let preds = predict_all(dev.instances, dev.store, &model, config.workers)?;
                let metrics = evaluate(&preds, dev.instances)?;
                if report.best_dev_f1.is_none_or(|best| metrics.f1 > best) {
                    report.best_dev_f1 = Some(metrics.f1);
                    report.best_epoch = Some(epoch + 1);
                    if let Some(path) = &best_path {
                        model.save(path)?;
                        report.best_checkpoint = Some(path.clone());
                    }
                }
                record.dev = Some(metrics);
            }
        }
        log::info!(
            "epoch {} loss {:.5}{}",
            epoch + 1,
            record.mean_loss,
            record
                .dev
                .map(|m| format!(" dev f1 {:.4}", m.f1))
                .unwrap_or_default()
        );
        report.epochs.push(record);
    }

    if let Some(path) = &config.checkpoint_path {
        model.save(path)?;
        report.checkpoint = Some(path.clone());
        let report_path = sibling_path(path, "report.json");
        std::fs::write(&report_path, serde_json::to_vec_pretty(&report)?)
            .map_err(|e| Error::io(&report_path, e))?;
    }
    Ok((model, report))
}
