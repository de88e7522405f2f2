//! Greedy span decoding from start/end pointer distributions.

use serde::{Deserialize, Serialize};

use crate::pointer::PointerDistribution;
use crate::tensor::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub fe: String,
    /// `[start, end]` in 1-based sentence indices, or `null` for no argument.
    pub span: Option<(usize, usize)>,
    /// `P(start) · P(end)` of the emitted decision.
    pub score: f64,
}

impl SpanPrediction {
    pub fn is_argument(&self) -> bool {
        self.span.is_some()
    }
}

/// Best `(s, e)` with `1 ≤ s ≤ e ≤ n` by `start[s] · end[e]`, found in one
/// sweep that tracks the best start seen so far. Returns `None` when `n = 0`.
pub fn best_valid_span(start_probs: &[f64], end_probs: &[f64]) -> Option<((usize, usize), f64)> {
    let n = start_probs.len().min(end_probs.len()).saturating_sub(1);
    let mut best: Option<((usize, usize), f64)> = None;
    let mut best_start = 0usize;
    for e in 1..=n {
        if best_start == 0 || start_probs[e] > start_probs[best_start] {
            best_start = e;
        }
        let score = start_probs[best_start] * end_probs[e];
        if best.is_none_or(|(_, s)| score > s) {
            best = Some(((best_start, e), score));
        }
    }
    best
}

/// Emits the best valid span when its score strictly beats the no-argument
/// score `start[0] · end[0]`; ties go to no argument.
pub fn decode_slot(fe: &str, start_probs: &[f64], end_probs: &[f64]) -> SpanPrediction {
    let null_score = start_probs[0] * end_probs[0];
    match best_valid_span(start_probs, end_probs) {
        Some((span, score)) if score > null_score => SpanPrediction {
            fe: fe.to_string(),
            span: Some(span),
            score,
        },
        _ => SpanPrediction {
            fe: fe.to_string(),
            span: None,
            score: null_score,
        },
    }
}

pub fn decode<T: Scalar>(distributions: &[PointerDistribution<T>]) -> Vec<SpanPrediction> {
    distributions
        .iter()
        .map(|dist| {
            let start: Vec<f64> = dist.start_probs.iter().map(|p| p.f64()).collect();
            let end: Vec<f64> = dist.end_probs.iter().map(|p| p.f64()).collect();
            decode_slot(&dist.fe, &start, &end)
        })
        .collect()
}
