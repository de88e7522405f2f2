//! Micro-averaged exact-match precision, recall and F1.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::decode::SpanPrediction;
use crate::error::{Error, Result};
use crate::framenet::AnnotatedInstance;

/// Predictions for one instance, as written by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub frame: String,
    pub predictions: Vec<SpanPrediction>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "pred")]
    pub predicted_count: usize,
    #[serde(rename = "gold")]
    pub gold_count: usize,
}

impl Metrics {
    pub fn from_counts(true_positives: usize, predicted_count: usize, gold_count: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(true_positives, predicted_count);
        let recall = ratio(true_positives, gold_count);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            true_positives,
            predicted_count,
            gold_count,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: usize,
    pred: usize,
    gold: usize,
}

impl Counts {
    fn metrics(self) -> Metrics {
        Metrics::from_counts(self.tp, self.pred, self.gold)
    }
}

fn instance_counts(pred: &InstancePrediction, gold: &AnnotatedInstance) -> Counts {
    let gold_set: HashSet<(&str, usize, usize)> = gold
        .arguments
        .iter()
        .map(|a| (a.fe.as_str(), a.start, a.end))
        .collect();
    let emitted: HashSet<(&str, usize, usize)> = pred
        .predictions
        .iter()
        .filter_map(|p| p.span.map(|(s, e)| (p.fe.as_str(), s, e)))
        .collect();
    Counts {
        tp: emitted.intersection(&gold_set).count(),
        pred: emitted.len(),
        gold: gold_set.len(),
    }
}

fn check_alignment(predictions: &[InstancePrediction], gold: &[AnnotatedInstance]) -> Result<()> {
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.frame != g.frame {
            return Err(Error::Misaligned {
                index: i + 1,
                message: format!("predicted frame '{}' vs gold frame '{}'", p.frame, g.frame),
            });
        }
    }
    if predictions.len() != gold.len() {
        return Err(Error::Misaligned {
            index: predictions.len().min(gold.len()) + 1,
            message: format!(
                "{} predictions for {} gold instances",
                predictions.len(),
                gold.len()
            ),
        });
    }
    Ok(())
}

/// Scores aligned predictions against gold. A true positive needs the same
/// frame element, start and end; no-argument predictions are not counted.
pub fn evaluate(predictions: &[InstancePrediction], gold: &[AnnotatedInstance]) -> Result<Metrics> {
    check_alignment(predictions, gold)?;
    let total = predictions
        .iter()
        .zip(gold)
        .map(|(p, g)| instance_counts(p, g))
        .fold(Counts::default(), |acc, c| Counts {
            tp: acc.tp + c.tp,
            pred: acc.pred + c.pred,
            gold: acc.gold + c.gold,
        });
    Ok(total.metrics())
}

/// Same scoring, broken down by gold frame.
pub fn evaluate_by_frame(
    predictions: &[InstancePrediction],
    gold: &[AnnotatedInstance],
) -> Result<BTreeMap<String, Metrics>> {
    check_alignment(predictions, gold)?;
    let mut counts: BTreeMap<String, Counts> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(gold) {
        let c = instance_counts(p, g);
        let entry = counts.entry(g.frame.clone()).or_default();
        entry.tp += c.tp;
        entry.pred += c.pred;
        entry.gold += c.gold;
    }
    Ok(counts.into_iter().map(|(k, c)| (k, c.metrics())).collect())
}
