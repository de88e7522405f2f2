//! Held-out-frame experiments: zero-shot (`k = 0`) and few-shot.
//!
//! The listed frames are capped at `k` training instances each, a model is
//! trained on the rest, and the full test set is scored overall, per frame,
//! and on the held-out frames alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Model;
use crate::encoding::build_vocabulary;
use crate::error::{Error, Result};
use crate::framenet::{filter_by_frames, sample_k_shot, AnnotatedInstance, FilterMode, FrameStore};
use crate::metrics::{evaluate, evaluate_by_frame, Metrics};
use crate::predict::predict_all;
use crate::tensor::Scalar;
use crate::trainer::{
    build_training_stream, fresh_model, train, ModelSettings, TrainConfig, TrainingReport,
};

/// Training instances kept per held-out frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KShot {
    Count(usize),
    Full,
}

impl fmt::Display for KShot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KShot::Count(k) => write!(f, "{k}"),
            KShot::Full => f.write_str("full"),
        }
    }
}

impl FromStr for KShot {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(KShot::Full);
        }
        s.parse()
            .map(KShot::Count)
            .map_err(|_| format!("expected a non-negative integer or 'full', got '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub k: KShot,
    pub held_out_frames: Vec<String>,
    /// Training instances per held-out frame after sampling.
    pub train_occurrences: BTreeMap<String, usize>,
    pub train_instances: usize,
    pub stream_examples: usize,
    pub overall: Metrics,
    pub held_out: Metrics,
    pub per_frame: BTreeMap<String, Metrics>,
    pub training: TrainingReport,
}

/// Applies the `k`-shot cap to the held-out frames of `train`.
pub fn restrict_training_set(
    train: &[AnnotatedInstance],
    frames: &BTreeSet<String>,
    k: KShot,
    seed: u64,
) -> Vec<AnnotatedInstance> {
    match k {
        KShot::Full => train.to_vec(),
        KShot::Count(0) => filter_by_frames(train, frames, FilterMode::Drop),
        KShot::Count(k) => sample_k_shot(train, frames, k, seed),
    }
}

pub fn run_holdout_experiment<T: Scalar>(
    train_set: &[AnnotatedInstance],
    test_set: &[AnnotatedInstance],
    store: &FrameStore,
    frames: &BTreeSet<String>,
    k: KShot,
    settings: &ModelSettings,
    config: &TrainConfig,
) -> Result<ExperimentReport> {
    for frame in frames {
        store.get(frame)?;
    }
    let restricted = restrict_training_set(train_set, frames, k, config.seed);
    let mut train_occurrences = BTreeMap::new();
    for frame in frames {
        let available = train_set.iter().filter(|i| &i.frame == frame).count();
        let kept = restricted.iter().filter(|i| &i.frame == frame).count();
        let expected = match k {
            KShot::Full => available,
            KShot::Count(k) => k.min(available),
        };
        if kept != expected {
            return Err(Error::Experiment(format!(
                "frame '{frame}' kept {kept} training instances, expected {expected}"
            )));
        }
        train_occurrences.insert(frame.clone(), kept);
    }

    let vocab = build_vocabulary(&restricted, store);
    let stream = build_training_stream(&restricted, store, &vocab, config)?;
    if k == KShot::Count(0) && stream.iter().any(|e| frames.contains(e.frame())) {
        return Err(Error::Experiment(
            "held-out frame leaked into the zero-shot stream".into(),
        ));
    }
    let model: Model<T> = fresh_model(vocab, settings, config)?;
    let (model, training) = train(&stream, model, config, None)?;

    let predictions = predict_all(test_set, store, &model, config.workers)?;
    for (i, (pred, inst)) in predictions.iter().zip(test_set).enumerate() {
        let expected = store.get(&inst.frame)?.fes.len();
        if pred.predictions.len() != expected {
            return Err(Error::Misaligned {
                index: i + 1,
                message: format!(
                    "{} predictions for {expected} frame elements",
                    pred.predictions.len()
                ),
            });
        }
    }
    let overall = evaluate(&predictions, test_set)?;
    let per_frame = evaluate_by_frame(&predictions, test_set)?;
    let (held_preds, held_gold): (Vec<_>, Vec<_>) = predictions
        .into_iter()
        .zip(test_set.iter().cloned())
        .filter(|(_, g)| frames.contains(&g.frame))
        .unzip();
    let held_out = evaluate(&held_preds, &held_gold)?;

    Ok(ExperimentReport {
        k,
        held_out_frames: frames.iter().cloned().collect(),
        train_occurrences,
        train_instances: restricted.len(),
        stream_examples: stream.len(),
        overall,
        held_out,
        per_frame,
        training,
    })
}
