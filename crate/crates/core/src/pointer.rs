//! Slot queries and start/end pointer heads.
//!
//! Each slot's query is the elementwise max over the encoder rows of its
//! mention tokens. The start head scores candidate `k` as `(W_s q) · h_k` over
//! `[CLS]` and the `n` sentence words, then softmaxes; the end head uses `W_e`.
//! Training minimizes `0.5 · L_start + 0.5 · L_end`, each summed over slots.

use rand_chacha::ChaCha8Rng;

use crate::encoding::{EncodedPair, SlotLabel};
use crate::error::{Error, Result};
use crate::neural::{
    backward_with_cache, forward_with_cache, ContextualEncoding, EncoderConfig, ParameterGradients,
    ParameterSet,
};
use crate::tensor::{dot, log_softmax, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector<T> {
    pub fe: String,
    pub q: Vec<T>,
    /// Assembled row that supplied each component of `q`.
    pub source_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerDistribution<T> {
    pub fe: String,
    /// Over positions `0..=n`; position 0 is `[CLS]` (no argument).
    pub start_probs: Vec<T>,
    pub end_probs: Vec<T>,
    pub start_log_probs: Vec<T>,
    pub end_log_probs: Vec<T>,
}

impl<T: Scalar> PointerDistribution<T> {
    /// Builds a distribution from probabilities alone (log-probabilities are
    /// derived), mainly for decoding tests.
    pub fn from_probs(fe: impl Into<String>, start_probs: Vec<T>, end_probs: Vec<T>) -> Self {
        let ln = |v: &[T]| v.iter().map(|p| p.ln()).collect();
        PointerDistribution {
            fe: fe.into(),
            start_log_probs: ln(&start_probs),
            end_log_probs: ln(&end_probs),
            start_probs,
            end_probs,
        }
    }

    /// Sentence length `n`.
    pub fn n(&self) -> usize {
        self.start_probs.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub loss_start: f64,
    pub loss_end: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(loss_start: f64, loss_end: f64) -> Self {
        LossBreakdown {
            loss_start,
            loss_end,
            total: 0.5 * loss_start + 0.5 * loss_end,
        }
    }
}

pub fn make_queries<T: Scalar>(
    encoding: &ContextualEncoding<T>,
    pair: &EncodedPair,
) -> Vec<QueryVector<T>> {
    let d = encoding.reps.cols();
    pair.slot_pos
        .iter()
        .zip(&pair.slot_fes)
        .map(|(&(start, end), fe)| {
            let mut q = encoding.row(start).to_vec();
            let mut source_rows = vec![start; d];
            for row in start + 1..=end {
                for (c, &v) in encoding.row(row).iter().enumerate() {
                    if v > q[c] {
                        q[c] = v;
                        source_rows[c] = row;
                    }
                }
            }
            QueryVector {
                fe: fe.clone(),
                q,
                source_rows,
            }
        })
        .collect()
}

/// `W q` for a `d×d` matrix stored row-major.
fn project<T: Scalar>(w: &Tensor<T>, q: &[T]) -> Vec<T> {
    (0..w.rows()).map(|i| dot(w.row(i), q)).collect()
}

fn head_logits<T: Scalar>(
    u: &[T],
    encoding: &ContextualEncoding<T>,
    candidates: &[usize],
) -> Vec<T> {
    candidates
        .iter()
        .map(|&k| dot(u, encoding.row(k)))
        .collect()
}

pub fn pointer_distributions<T: Scalar>(
    params: &ParameterSet<T>,
    encoding: &ContextualEncoding<T>,
    pair: &EncodedPair,
    queries: &[QueryVector<T>],
) -> Vec<PointerDistribution<T>> {
    let candidates = pair.candidates();
    queries
        .iter()
        .map(|query| {
            let us = project(&params.w_start, &query.q);
            let ue = project(&params.w_end, &query.q);
            let start_log_probs = log_softmax(&head_logits(&us, encoding, &candidates));
            let end_log_probs = log_softmax(&head_logits(&ue, encoding, &candidates));
            PointerDistribution {
                fe: query.fe.clone(),
                start_probs: start_log_probs.iter().map(|x| x.exp()).collect(),
                end_probs: end_log_probs.iter().map(|x| x.exp()).collect(),
                start_log_probs,
                end_log_probs,
            }
        })
        .collect()
}

fn check_labels<T>(distributions: &[PointerDistribution<T>], labels: &[SlotLabel]) -> Result<()> {
    if distributions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} distributions for {} labels",
            distributions.len(),
            labels.len()
        )));
    }
    for (slot, (dist, label)) in distributions.iter().zip(labels).enumerate() {
        let n = dist.start_probs.len() - 1;
        for value in [label.start, label.end] {
            if value > n {
                return Err(Error::LabelOutOfRange {
                    slot,
                    label: value,
                    n,
                });
            }
        }
    }
    Ok(())
}

/// Negative log-likelihood of the gold start/end positions, summed over slots.
pub fn slot_loss<T: Scalar>(
    distributions: &[PointerDistribution<T>],
    labels: &[SlotLabel],
) -> Result<LossBreakdown> {
    check_labels(distributions, labels)?;
    let mut ls = 0.0;
    let mut le = 0.0;
    for (dist, label) in distributions.iter().zip(labels) {
        ls -= dist.start_log_probs[label.start].f64();
        le -= dist.end_log_probs[label.end].f64();
    }
    Ok(LossBreakdown::new(ls, le))
}

/// Loss of one example and its gradient with respect to every parameter,
/// pointer matrices and encoder alike.
pub fn example_gradients<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
    labels: &[SlotLabel],
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(LossBreakdown, ParameterGradients<T>)> {
    let mut grads = params.zeros_like();
    let loss = accumulate_example_gradients(params, config, pair, labels, rng, &mut grads)?;
    Ok((loss, grads))
}

pub fn accumulate_example_gradients<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
    labels: &[SlotLabel],
    rng: Option<&mut ChaCha8Rng>,
    grads: &mut ParameterGradients<T>,
) -> Result<LossBreakdown> {
    let (encoding, cache) = forward_with_cache(params, config, pair, rng)?;
    let queries = make_queries(&encoding, pair);
    let dists = pointer_distributions(params, &encoding, pair, &queries);
    let loss = slot_loss(&dists, labels)?;

    let d = config.d_model;
    let half = T::of(0.5);
    let candidates = pair.candidates();
    let mut d_reps = Tensor::<T>::zeros(&[encoding.len(), d]);
    for ((query, dist), label) in queries.iter().zip(&dists).zip(labels) {
        let mut dq = vec![T::zero(); d];
        for (w, dw, probs, gold) in [
            (
                &params.w_start,
                &mut grads.w_start,
                &dist.start_probs,
                label.start,
            ),
            (&params.w_end, &mut grads.w_end, &dist.end_probs, label.end),
        ] {
            let u = project(w, &query.q);
            let mut du = vec![T::zero(); d];
            for (k, (&row, &p)) in candidates.iter().zip(probs).enumerate() {
                let indicator = if k == gold { T::one() } else { T::zero() };
                let g = half * (p - indicator);
                if g == T::zero() {
                    continue;
                }
                let h = encoding.row(row);
                for c in 0..d {
                    du[c] = du[c] + g * h[c];
                }
                for (dst, &uc) in d_reps.row_mut(row).iter_mut().zip(&u) {
                    *dst = *dst + g * uc;
                }
            }
            // u = W q  ⇒  dW += du qᵀ, dq += Wᵀ du
            for i in 0..d {
                let wi = w.row(i);
                let dwi = dw.row_mut(i);
                for j in 0..d {
                    dwi[j] = dwi[j] + du[i] * query.q[j];
                    dq[j] = dq[j] + wi[j] * du[i];
                }
            }
        }
        for (c, (&row, &g)) in query.source_rows.iter().zip(&dq).enumerate() {
            let cell = &mut d_reps.row_mut(row)[c];
            *cell = *cell + g;
        }
    }
    backward_with_cache(params, config, &cache, &d_reps, grads)?;
    Ok(loss)
}

/// Total loss of one example without gradients.
pub fn example_loss<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
    labels: &[SlotLabel],
) -> Result<LossBreakdown> {
    let (encoding, _) = forward_with_cache(params, config, pair, None)?;
    let queries = make_queries(&encoding, pair);
    let dists = pointer_distributions(params, &encoding, pair, &queries);
    slot_loss(&dists, labels)
}
