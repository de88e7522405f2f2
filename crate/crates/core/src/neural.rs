//! A small pre-norm transformer encoder with hand-written reverse-mode gradients.
//!
//! Layout per layer:
//!
//! ```text
//! x = x + Attention(LayerNorm(x))
//! x = x + FeedForward(LayerNorm(x))      FeedForward = W2 · gelu(W1 · x + b1) + b2
//! ```
//!
//! followed by a final LayerNorm. Inputs are the sum of token, learned absolute
//! position and segment (text / definition) embeddings. Attention is fully
//! bidirectional across both segments.
//!
//! The parameter set also owns the two pointer matrices used by
//! [`crate::pointer`] so that one structure covers everything that is trained
//! and checkpointed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::EncodedPair;
use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_at_acc, matmul_bt, softmax_in_place, DType, Scalar, Tensor};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub dtype: DType,
    /// Residual-branch dropout rate, applied only when a training RNG is supplied.
    #[serde(default)]
    pub dropout: f64,
}

impl EncoderConfig {
    /// A config with `d_ff = 4 · d_model`, `max_len = 256` and no dropout.
    pub fn new(
        vocab_size: usize,
        d_model: usize,
        n_layers: usize,
        n_heads: usize,
        seed: u64,
    ) -> Self {
        EncoderConfig {
            d_model,
            n_layers,
            n_heads,
            d_ff: 4 * d_model,
            max_len: 256,
            vocab_size,
            seed,
            dtype: DType::F32,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
            ("vocab_size", self.vocab_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub ln1_gain: Tensor<T>,
    pub ln1_bias: Tensor<T>,
    pub wq: Tensor<T>,
    pub bq: Tensor<T>,
    pub wk: Tensor<T>,
    pub bk: Tensor<T>,
    pub wv: Tensor<T>,
    pub bv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub ln2_gain: Tensor<T>,
    pub ln2_bias: Tensor<T>,
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

const LAYER_FIELDS: [&str; 16] = [
    "ln1.gain", "ln1.bias", "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv",
    "attn.wo", "attn.bo", "ln2.gain", "ln2.bias", "ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2",
];

impl<T: Scalar> LayerParams<T> {
    fn zeros(d: usize, ff: usize) -> Self {
        LayerParams {
            ln1_gain: Tensor::zeros(&[d]),
            ln1_bias: Tensor::zeros(&[d]),
            wq: Tensor::zeros(&[d, d]),
            bq: Tensor::zeros(&[d]),
            wk: Tensor::zeros(&[d, d]),
            bk: Tensor::zeros(&[d]),
            wv: Tensor::zeros(&[d, d]),
            bv: Tensor::zeros(&[d]),
            wo: Tensor::zeros(&[d, d]),
            bo: Tensor::zeros(&[d]),
            ln2_gain: Tensor::zeros(&[d]),
            ln2_bias: Tensor::zeros(&[d]),
            w1: Tensor::zeros(&[d, ff]),
            b1: Tensor::zeros(&[ff]),
            w2: Tensor::zeros(&[ff, d]),
            b2: Tensor::zeros(&[d]),
        }
    }

    fn fields(&self) -> [&Tensor<T>; 16] {
        [
            &self.ln1_gain,
            &self.ln1_bias,
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Tensor<T>; 16] {
        let LayerParams {
            ln1_gain,
            ln1_bias,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln2_gain,
            ln2_bias,
            w1,
            b1,
            w2,
            b2,
        } = self;
        [
            ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2, b2,
        ]
    }
}

/// Every trainable tensor: encoder weights plus the start/end pointer matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    pub token_emb: Tensor<T>,
    pub position_emb: Tensor<T>,
    pub segment_emb: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_gain: Tensor<T>,
    pub final_bias: Tensor<T>,
    /// Start pointer, `d×d`, no bias.
    pub w_start: Tensor<T>,
    /// End pointer, `d×d`, no bias.
    pub w_end: Tensor<T>,
}

/// Gradients share the parameter layout.
pub type ParameterGradients<T> = ParameterSet<T>;

impl<T: Scalar> ParameterSet<T> {
    pub fn zeros(config: &EncoderConfig) -> Self {
        let d = config.d_model;
        ParameterSet {
            token_emb: Tensor::zeros(&[config.vocab_size, d]),
            position_emb: Tensor::zeros(&[config.max_len, d]),
            segment_emb: Tensor::zeros(&[2, d]),
            layers: (0..config.n_layers)
                .map(|_| LayerParams::zeros(d, config.d_ff))
                .collect(),
            final_gain: Tensor::zeros(&[d]),
            final_bias: Tensor::zeros(&[d]),
            w_start: Tensor::zeros(&[d, d]),
            w_end: Tensor::zeros(&[d, d]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor<T>| Tensor::zeros(t.shape());
        ParameterSet {
            token_emb: z(&self.token_emb),
            position_emb: z(&self.position_emb),
            segment_emb: z(&self.segment_emb),
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let mut out = l.clone();
                    out.fields_mut().into_iter().for_each(Tensor::fill_zero);
                    out
                })
                .collect(),
            final_gain: z(&self.final_gain),
            final_bias: z(&self.final_bias),
            w_start: z(&self.w_start),
            w_end: z(&self.w_end),
        }
    }

    /// Tensors with their stable names, in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("embeddings.token".to_string(), &self.token_emb),
            ("embeddings.position".to_string(), &self.position_emb),
            ("embeddings.segment".to_string(), &self.segment_emb),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(layer.fields()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_norm.gain".to_string(), &self.final_gain));
        out.push(("final_norm.bias".to_string(), &self.final_bias));
        out.push(("pointer.w_start".to_string(), &self.w_start));
        out.push(("pointer.w_end".to_string(), &self.w_end));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let ParameterSet {
            token_emb,
            position_emb,
            segment_emb,
            layers,
            final_gain,
            final_bias,
            w_start,
            w_end,
        } = self;
        let mut out = vec![
            ("embeddings.token".to_string(), token_emb),
            ("embeddings.position".to_string(), position_emb),
            ("embeddings.segment".to_string(), segment_emb),
        ];
        for (i, layer) in layers.iter_mut().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(layer.fields_mut()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_norm.gain".to_string(), final_gain));
        out.push(("final_norm.bias".to_string(), final_bias));
        out.push(("pointer.w_start".to_string(), w_start));
        out.push(("pointer.w_end".to_string(), w_end));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.named_mut().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(factor));
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        let mut out = ParameterSet::<U> {
            token_emb: self.token_emb.cast(),
            position_emb: self.position_emb.cast(),
            segment_emb: self.segment_emb.cast(),
            layers: Vec::new(),
            final_gain: self.final_gain.cast(),
            final_bias: self.final_bias.cast(),
            w_start: self.w_start.cast(),
            w_end: self.w_end.cast(),
        };
        for layer in &self.layers {
            let f = layer.fields();
            out.layers.push(LayerParams {
                ln1_gain: f[0].cast(),
                ln1_bias: f[1].cast(),
                wq: f[2].cast(),
                bq: f[3].cast(),
                wk: f[4].cast(),
                bk: f[5].cast(),
                wv: f[6].cast(),
                bv: f[7].cast(),
                wo: f[8].cast(),
                bo: f[9].cast(),
                ln2_gain: f[10].cast(),
                ln2_bias: f[11].cast(),
                w1: f[12].cast(),
                b1: f[13].cast(),
                w2: f[14].cast(),
                b2: f[15].cast(),
            });
        }
        out
    }
}

/// Deterministic initialization: uniform Xavier bounds for weight matrices,
/// `±sqrt(3/d)` for embeddings, unit norm gains and zero biases. Values are
/// drawn in `f64` and cast, so `f32` and `f64` sets agree up to rounding.
pub fn init_parameters<T: Scalar>(config: &EncoderConfig) -> Result<ParameterSet<T>> {
    config.validate()?;
    let mut params = ParameterSet::<T>::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.d_model as f64;
    for (name, tensor) in params.named_mut() {
        let shape = tensor.shape().to_vec();
        if name.ends_with(".gain") {
            tensor.data_mut().iter_mut().for_each(|x| *x = T::one());
            continue;
        }
        let bound = if name.starts_with("embeddings.") {
            (3.0 / d).sqrt()
        } else if shape.len() == 2 {
            (6.0 / (shape[0] + shape[1]) as f64).sqrt()
        } else {
            continue; // biases
        };
        for x in tensor.data_mut() {
            *x = T::of(rng.gen_range(-bound..bound));
        }
    }
    Ok(params)
}

/// Per-position contextual representations, one row per assembled token.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEncoding<T> {
    pub reps: Tensor<T>,
}

impl<T: Scalar> ContextualEncoding<T> {
    pub fn row(&self, i: usize) -> &[T] {
        self.reps.row(i)
    }

    pub fn len(&self) -> usize {
        self.reps.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
struct NormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    ln1: NormCache<T>,
    a: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<Vec<T>>,
    ctx: Vec<T>,
    attn_mask: Option<Vec<T>>,
    ln2: NormCache<T>,
    b: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
    ffn_mask: Option<Vec<T>>,
}

/// Activations retained by a forward pass for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    len: usize,
    ids: Vec<usize>,
    segments: Vec<usize>,
    layers: Vec<LayerCache<T>>,
    final_norm: NormCache<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Attention weights of one head, `len × len`, row-major.
    pub fn attention(&self, layer: usize, head: usize) -> &[T] {
        &self.layers[layer].probs[head]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn layer_norm<T: Scalar>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    rows: usize,
    d: usize,
) -> (Vec<T>, NormCache<T>) {
    let eps = T::of(NORM_EPS);
    let dn = T::of(d as f64);
    let mut y = vec![T::zero(); rows * d];
    let mut xhat = vec![T::zero(); rows * d];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let h = (row[c] - mean) * rs;
            xhat[r * d + c] = h;
            y[r * d + c] = h * gain[c] + bias[c];
        }
    }
    (y, NormCache { xhat, rstd })
}

fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    cache: &NormCache<T>,
    gain: &[T],
    d_gain: &mut [T],
    d_bias: &mut [T],
    rows: usize,
    d: usize,
) -> Vec<T> {
    let dn = T::of(d as f64);
    let mut dx = vec![T::zero(); rows * d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxh = T::zero();
        let mut mean_dxh_xh = T::zero();
        for c in 0..d {
            let dxh = dyr[c] * gain[c];
            mean_dxh = mean_dxh + dxh;
            mean_dxh_xh = mean_dxh_xh + dxh * xh[c];
            d_gain[c] = d_gain[c] + dyr[c] * xh[c];
            d_bias[c] = d_bias[c] + dyr[c];
        }
        mean_dxh = mean_dxh / dn;
        mean_dxh_xh = mean_dxh_xh / dn;
        for c in 0..d {
            let dxh = dyr[c] * gain[c];
            dx[r * d + c] = cache.rstd[r] * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
        }
    }
    dx
}

fn linear<T: Scalar>(x: &[T], w: &Tensor<T>, b: &Tensor<T>, rows: usize) -> Vec<T> {
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    let mut y = matmul(x, w.data(), rows, fan_in, fan_out);
    for r in 0..rows {
        for (o, &bv) in y[r * fan_out..(r + 1) * fan_out].iter_mut().zip(b.data()) {
            *o = *o + bv;
        }
    }
    y
}

/// Accumulates weight and bias gradients, returns the input gradient.
fn linear_backward<T: Scalar>(
    x: &[T],
    w: &Tensor<T>,
    dy: &[T],
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    rows: usize,
) -> Vec<T> {
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    matmul_at_acc(x, dy, rows, fan_in, fan_out, dw.data_mut());
    let dbd = db.data_mut();
    for r in 0..rows {
        for (o, &g) in dbd.iter_mut().zip(&dy[r * fan_out..(r + 1) * fan_out]) {
            *o = *o + g;
        }
    }
    matmul_bt(dy, w.data(), rows, fan_out, fan_in)
}

const GELU_A: f64 = 0.044715;

fn gelu<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    let u = c * (x + T::of(GELU_A) * x * x * x);
    half * x * (T::one() + u.tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    let u = c * (x + T::of(GELU_A) * x * x * x);
    let t = u.tanh();
    half * (T::one() + t)
        + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0 * GELU_A) * x * x)
}

fn head_cols<T: Scalar>(m: &[T], rows: usize, d: usize, h: usize, dh: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(rows * dh);
    for r in 0..rows {
        out.extend_from_slice(&m[r * d + h * dh..r * d + (h + 1) * dh]);
    }
    out
}

fn add_head_cols<T: Scalar>(dst: &mut [T], src: &[T], rows: usize, d: usize, h: usize, dh: usize) {
    for r in 0..rows {
        for c in 0..dh {
            let o = &mut dst[r * d + h * dh + c];
            *o = *o + src[r * dh + c];
        }
    }
}

fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn check_input(config: &EncoderConfig, pair: &EncodedPair) -> Result<()> {
    if pair.ids.len() > config.max_len {
        return Err(Error::TooLong {
            len: pair.ids.len(),
            max_len: config.max_len,
        });
    }
    if pair.segments.len() != pair.ids.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} segment flags for {} ids",
            pair.segments.len(),
            pair.ids.len()
        )));
    }
    if let Some((pos, &id)) = pair
        .ids
        .iter()
        .enumerate()
        .find(|(_, &id)| id >= config.vocab_size)
    {
        return Err(Error::IdOutOfRange {
            id,
            pos,
            vocab_size: config.vocab_size,
        });
    }
    Ok(())
}

pub fn forward<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
) -> Result<ContextualEncoding<T>> {
    forward_with_cache(params, config, pair, None).map(|(enc, _)| enc)
}

/// Forward pass that keeps activations. Dropout is applied only when `rng`
/// is given and the configured rate is non-zero.
pub fn forward_with_cache<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(ContextualEncoding<T>, ForwardCache<T>)> {
    check_input(config, pair)?;
    let l = pair.ids.len();
    let d = config.d_model;
    let dh = config.head_dim();
    let scale = T::of(1.0 / (dh as f64).sqrt());
    let segments: Vec<usize> = pair.segments.iter().map(|s| s.index()).collect();

    let mut x = vec![T::zero(); l * d];
    for (i, (&id, &seg)) in pair.ids.iter().zip(&segments).enumerate() {
        let (tok, pos, sg) = (
            params.token_emb.row(id),
            params.position_emb.row(i),
            params.segment_emb.row(seg),
        );
        for c in 0..d {
            x[i * d + c] = tok[c] + pos[c] + sg[c];
        }
    }

    let mut layers = Vec::with_capacity(config.n_layers);
    for lp in &params.layers {
        let (a, ln1) = layer_norm(&x, lp.ln1_gain.data(), lp.ln1_bias.data(), l, d);
        let q = linear(&a, &lp.wq, &lp.bq, l);
        let k = linear(&a, &lp.wk, &lp.bk, l);
        let v = linear(&a, &lp.wv, &lp.bv, l);
        let mut ctx = vec![T::zero(); l * d];
        let mut probs = Vec::with_capacity(config.n_heads);
        for h in 0..config.n_heads {
            let qh = head_cols(&q, l, d, h, dh);
            let kh = head_cols(&k, l, d, h, dh);
            let vh = head_cols(&v, l, d, h, dh);
            let mut p = matmul_bt(&qh, &kh, l, dh, l);
            for row in p.chunks_mut(l) {
                row.iter_mut().for_each(|s| *s = *s * scale);
                softmax_in_place(row);
            }
            let oh = matmul(&p, &vh, l, l, dh);
            add_head_cols(&mut ctx, &oh, l, d, h, dh);
            probs.push(p);
        }
        let mut attn = linear(&ctx, &lp.wo, &lp.bo, l);
        let attn_mask = match rng.as_deref_mut() {
            Some(r) if config.dropout > 0.0 => Some(dropout_mask::<T>(l * d, config.dropout, r)),
            _ => None,
        };
        if let Some(mask) = &attn_mask {
            attn.iter_mut().zip(mask).for_each(|(a, &m)| *a = *a * m);
        }
        x.iter_mut().zip(&attn).for_each(|(xv, &av)| *xv = *xv + av);

        let (b, ln2) = layer_norm(&x, lp.ln2_gain.data(), lp.ln2_bias.data(), l, d);
        let pre_act = linear(&b, &lp.w1, &lp.b1, l);
        let act: Vec<T> = pre_act.iter().map(|&z| gelu(z)).collect();
        let mut ffn = linear(&act, &lp.w2, &lp.b2, l);
        let ffn_mask = match rng.as_deref_mut() {
            Some(r) if config.dropout > 0.0 => Some(dropout_mask::<T>(l * d, config.dropout, r)),
            _ => None,
        };
        if let Some(mask) = &ffn_mask {
            ffn.iter_mut().zip(mask).for_each(|(f, &m)| *f = *f * m);
        }
        x.iter_mut().zip(&ffn).for_each(|(xv, &fv)| *xv = *xv + fv);

        layers.push(LayerCache {
            ln1,
            a,
            q,
            k,
            v,
            probs,
            ctx,
            attn_mask,
            ln2,
            b,
            pre_act,
            act,
            ffn_mask,
        });
    }

    let (out, final_norm) =
        layer_norm(&x, params.final_gain.data(), params.final_bias.data(), l, d);
    let reps = Tensor::from_vec(&[l, d], out).expect("l×d output");
    Ok((
        ContextualEncoding { reps },
        ForwardCache {
            len: l,
            ids: pair.ids.clone(),
            segments,
            layers,
            final_norm,
        },
    ))
}

/// Exact gradients of `Σ upstream ⊙ output` with respect to every encoder
/// tensor, recomputing the forward pass.
pub fn backward<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    pair: &EncodedPair,
    upstream: &Tensor<T>,
) -> Result<ParameterGradients<T>> {
    let (_, cache) = forward_with_cache(params, config, pair, None)?;
    let mut grads = params.zeros_like();
    backward_with_cache(params, config, &cache, upstream, &mut grads)?;
    Ok(grads)
}

/// Reverse pass over a cached forward; gradients are added into `grads`.
pub fn backward_with_cache<T: Scalar>(
    params: &ParameterSet<T>,
    config: &EncoderConfig,
    cache: &ForwardCache<T>,
    upstream: &Tensor<T>,
    grads: &mut ParameterGradients<T>,
) -> Result<()> {
    let l = cache.len;
    let d = config.d_model;
    if upstream.shape() != [l, d] {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?}, expected [{l}, {d}]",
            upstream.shape()
        )));
    }
    let dh = config.head_dim();
    let scale = T::of(1.0 / (dh as f64).sqrt());

    let mut dx = layer_norm_backward(
        upstream.data(),
        &cache.final_norm,
        params.final_gain.data(),
        grads.final_gain.data_mut(),
        grads.final_bias.data_mut(),
        l,
        d,
    );

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let lg = &mut grads.layers[li];

        // feed-forward branch
        let mut df = dx.clone();
        if let Some(mask) = &lc.ffn_mask {
            df.iter_mut().zip(mask).for_each(|(g, &m)| *g = *g * m);
        }
        let mut d_act = linear_backward(&lc.act, &lp.w2, &df, &mut lg.w2, &mut lg.b2, l);
        d_act
            .iter_mut()
            .zip(&lc.pre_act)
            .for_each(|(g, &z)| *g = *g * gelu_grad(z));
        let db = linear_backward(&lc.b, &lp.w1, &d_act, &mut lg.w1, &mut lg.b1, l);
        let dx_norm2 = layer_norm_backward(
            &db,
            &lc.ln2,
            lp.ln2_gain.data(),
            lg.ln2_gain.data_mut(),
            lg.ln2_bias.data_mut(),
            l,
            d,
        );
        dx.iter_mut().zip(&dx_norm2).for_each(|(a, &b)| *a = *a + b);

        // attention branch
        let mut dattn = dx.clone();
        if let Some(mask) = &lc.attn_mask {
            dattn.iter_mut().zip(mask).for_each(|(g, &m)| *g = *g * m);
        }
        let dctx = linear_backward(&lc.ctx, &lp.wo, &dattn, &mut lg.wo, &mut lg.bo, l);
        let mut dq = vec![T::zero(); l * d];
        let mut dk = vec![T::zero(); l * d];
        let mut dv = vec![T::zero(); l * d];
        for h in 0..config.n_heads {
            let p = &lc.probs[h];
            let qh = head_cols(&lc.q, l, d, h, dh);
            let kh = head_cols(&lc.k, l, d, h, dh);
            let vh = head_cols(&lc.v, l, d, h, dh);
            let doh = head_cols(&dctx, l, d, h, dh);
            let dp = matmul_bt(&doh, &vh, l, dh, l);
            let mut dvh = vec![T::zero(); l * dh];
            matmul_at_acc(p, &doh, l, l, dh, &mut dvh);
            let mut ds = vec![T::zero(); l * l];
            for r in 0..l {
                let pr = &p[r * l..(r + 1) * l];
                let dpr = &dp[r * l..(r + 1) * l];
                let inner = pr
                    .iter()
                    .zip(dpr)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                for c in 0..l {
                    ds[r * l + c] = pr[c] * (dpr[c] - inner) * scale;
                }
            }
            let dqh = matmul(&ds, &kh, l, l, dh);
            let mut dkh = vec![T::zero(); l * dh];
            matmul_at_acc(&ds, &qh, l, l, dh, &mut dkh);
            add_head_cols(&mut dq, &dqh, l, d, h, dh);
            add_head_cols(&mut dk, &dkh, l, d, h, dh);
            add_head_cols(&mut dv, &dvh, l, d, h, dh);
        }
        let mut da = linear_backward(&lc.a, &lp.wq, &dq, &mut lg.wq, &mut lg.bq, l);
        let da_k = linear_backward(&lc.a, &lp.wk, &dk, &mut lg.wk, &mut lg.bk, l);
        let da_v = linear_backward(&lc.a, &lp.wv, &dv, &mut lg.wv, &mut lg.bv, l);
        for ((a, &b), &c) in da.iter_mut().zip(&da_k).zip(&da_v) {
            *a = *a + b + c;
        }
        let dx_norm1 = layer_norm_backward(
            &da,
            &lc.ln1,
            lp.ln1_gain.data(),
            lg.ln1_gain.data_mut(),
            lg.ln1_bias.data_mut(),
            l,
            d,
        );
        dx.iter_mut().zip(&dx_norm1).for_each(|(a, &b)| *a = *a + b);
    }

    for i in 0..l {
        let g = &dx[i * d..(i + 1) * d];
        for (dst, &src) in grads.token_emb.row_mut(cache.ids[i]).iter_mut().zip(g) {
            *dst = *dst + src;
        }
        for (dst, &src) in grads.position_emb.row_mut(i).iter_mut().zip(g) {
            *dst = *dst + src;
        }
        for (dst, &src) in grads
            .segment_emb
            .row_mut(cache.segments[i])
            .iter_mut()
            .zip(g)
        {
            *dst = *dst + src;
        }
    }
    Ok(())
}
