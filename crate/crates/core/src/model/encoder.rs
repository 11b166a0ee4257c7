//! Post-layer-norm transformer encoder with hand-written reverse mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{LayerParams, ModelParams};
use super::tensor::{dot, Matrix};
use super::{EncoderConfig, EncoderInput, ModelError};
use crate::scalar::Scalar;

struct LayerNormCache<T> {
    xhat: Matrix<T>,
    inv_std: Vec<T>,
}

fn layer_norm<T: Scalar>(x: &Matrix<T>, gamma: &Matrix<T>, beta: &Matrix<T>, eps: T) -> (Matrix<T>, LayerNormCache<T>) {
    let (rows, cols) = x.shape();
    let n = T::from_usize(cols).unwrap();
    let mut y = Matrix::zeros(rows, cols);
    let mut xhat = Matrix::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let is = T::one() / (var + eps).sqrt();
        inv_std.push(is);
        for (c, &v) in row.iter().enumerate() {
            let h = (v - mean) * is;
            *xhat.at_mut(r, c) = h;
            *y.at_mut(r, c) = gamma.data[c] * h + beta.data[c];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

fn layer_norm_backward<T: Scalar>(
    dy: &Matrix<T>,
    cache: &LayerNormCache<T>,
    gamma: &Matrix<T>,
    d_gamma: &mut Matrix<T>,
    d_beta: &mut Matrix<T>,
) -> Matrix<T> {
    let (rows, cols) = dy.shape();
    let n = T::from_usize(cols).unwrap();
    let mut dx = Matrix::zeros(rows, cols);
    let mut dxhat = vec![T::zero(); cols];
    for r in 0..rows {
        let dyr = dy.row(r);
        let xh = cache.xhat.row(r);
        for c in 0..cols {
            d_gamma.data[c] = d_gamma.data[c] + dyr[c] * xh[c];
            d_beta.data[c] = d_beta.data[c] + dyr[c];
            dxhat[c] = dyr[c] * gamma.data[c];
        }
        let mean_d = dxhat.iter().copied().sum::<T>() / n;
        let mean_dx = dot(&dxhat, xh) / n;
        let is = cache.inv_std[r];
        for c in 0..cols {
            *dx.at_mut(r, c) = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    dx
}

fn gelu_consts<T: Scalar>() -> (T, T) {
    (T::lit((2.0 / std::f64::consts::PI).sqrt()), T::lit(0.044715))
}

/// Tanh-approximated GELU.
fn gelu<T: Scalar>(x: T) -> T {
    let (c, a) = gelu_consts::<T>();
    let half = T::lit(0.5);
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let (c, a) = gelu_consts::<T>();
    let half = T::lit(0.5);
    let th = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + th) + half * x * (T::one() - th * th) * c * (T::one() + T::lit(3.0) * a * x * x)
}

/// Inverted dropout; returns the applied mask (already scaled).
fn dropout<T: Scalar>(x: &mut Matrix<T>, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<T>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.data.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    for (v, &m) in x.data.iter_mut().zip(&mask) {
        *v = *v * m;
    }
    Some(mask)
}

fn apply_mask<T: Scalar>(x: &mut Matrix<T>, mask: &Option<Vec<T>>) {
    if let Some(mask) = mask {
        for (v, &m) in x.data.iter_mut().zip(mask) {
            *v = *v * m;
        }
    }
}

fn linear<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let mut y = x.matmul(w);
    y.add_row_vector(b);
    y
}

/// Accumulates weight/bias gradients of `y = x w + b` and returns `dx`.
fn linear_backward<T: Scalar>(
    x: &Matrix<T>,
    w: &Matrix<T>,
    dy: &Matrix<T>,
    dw: &mut Matrix<T>,
    db: &mut Matrix<T>,
) -> Matrix<T> {
    x.add_matmul_at(dy, dw);
    dy.add_col_sums_into(db);
    dy.matmul_bt(w)
}

struct LayerCache<T> {
    input: Matrix<T>,
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    /// One `len x len` attention matrix per head.
    probs: Vec<Matrix<T>>,
    ctx: Matrix<T>,
    attn_mask: Option<Vec<T>>,
    ln1: LayerNormCache<T>,
    h1: Matrix<T>,
    ffn_pre: Matrix<T>,
    ffn_act: Matrix<T>,
    ffn_mask: Option<Vec<T>>,
    ln2: LayerNormCache<T>,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache<T> {
    ids: Vec<u32>,
    segments: Vec<u8>,
    emb_ln: LayerNormCache<T>,
    emb_mask: Option<Vec<T>>,
    layers: Vec<LayerCache<T>>,
}

pub(crate) fn check_input(cfg: &EncoderConfig, input: &EncoderInput<'_>) -> Result<(), ModelError> {
    if input.ids.len() != input.segments.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} ids but {} segment ids",
            input.ids.len(),
            input.segments.len()
        )));
    }
    if input.ids.len() > cfg.max_positions {
        return Err(ModelError::ShapeMismatch(format!(
            "input length {} exceeds max_positions {}",
            input.ids.len(),
            cfg.max_positions
        )));
    }
    if input.valid_len > input.ids.len() {
        return Err(ModelError::ShapeMismatch("valid_len exceeds input length".into()));
    }
    if let Some(&id) = input.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::ShapeMismatch(format!("token id {id} outside vocabulary of {}", cfg.vocab_size)));
    }
    if let Some(&s) = input.segments.iter().find(|&&s| s as usize >= cfg.num_segments) {
        return Err(ModelError::ShapeMismatch(format!("segment id {s} out of range")));
    }
    Ok(())
}

fn attention<T: Scalar>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    heads: usize,
    valid_len: usize,
) -> (Matrix<T>, Vec<Matrix<T>>) {
    let (t, h) = q.shape();
    let d = h / heads;
    let scale = T::one() / T::from_usize(d).unwrap().sqrt();
    let mut ctx = Matrix::zeros(t, h);
    let mut probs = Vec::with_capacity(heads);
    let mut scores = vec![T::zero(); valid_len];
    for n in 0..heads {
        let cols = n * d..(n + 1) * d;
        let mut p = Matrix::zeros(t, t);
        for i in 0..t {
            let qi = &q.row(i)[cols.clone()];
            let mut max = T::neg_infinity();
            for (j, s) in scores.iter_mut().enumerate() {
                *s = dot(qi, &k.row(j)[cols.clone()]) * scale;
                max = max.max(*s);
            }
            let mut total = T::zero();
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                total = total + *s;
            }
            let out = &mut ctx.row_mut(i)[cols.clone()];
            for (j, &s) in scores.iter().enumerate() {
                let pij = s / total;
                *p.at_mut(i, j) = pij;
                for (o, &vv) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *o = *o + pij * vv;
                }
            }
        }
        probs.push(p);
    }
    (ctx, probs)
}

fn layer_forward<T: Scalar>(
    cfg: &EncoderConfig,
    l: &LayerParams<T>,
    input: Matrix<T>,
    valid_len: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> (Matrix<T>, LayerCache<T>) {
    let eps = T::lit(cfg.layer_norm_eps);
    let q = linear(&input, &l.query_w, &l.query_b);
    let k = linear(&input, &l.key_w, &l.key_b);
    let v = linear(&input, &l.value_w, &l.value_b);
    let (ctx, probs) = attention(&q, &k, &v, cfg.num_heads, valid_len);
    let mut a = linear(&ctx, &l.attn_out_w, &l.attn_out_b);
    let attn_mask = dropout(&mut a, cfg.dropout_rate, rng.as_deref_mut());
    a.add_assign(&input);
    let (h1, ln1) = layer_norm(&a, &l.attn_ln_gamma, &l.attn_ln_beta, eps);
    let ffn_pre = linear(&h1, &l.ffn_in_w, &l.ffn_in_b);
    let ffn_act = Matrix::from_vec(ffn_pre.rows, ffn_pre.cols, ffn_pre.data.iter().map(|&x| gelu(x)).collect());
    let mut out = linear(&ffn_act, &l.ffn_out_w, &l.ffn_out_b);
    let ffn_mask = dropout(&mut out, cfg.dropout_rate, rng);
    out.add_assign(&h1);
    let (y, ln2) = layer_norm(&out, &l.ffn_ln_gamma, &l.ffn_ln_beta, eps);
    let cache = LayerCache { input, q, k, v, probs, ctx, attn_mask, ln1, h1, ffn_pre, ffn_act, ffn_mask, ln2 };
    (y, cache)
}

/// Runs the encoder. Dropout is active only when `dropout_seed` is given.
pub fn forward<T: Scalar>(
    cfg: &EncoderConfig,
    p: &ModelParams<T>,
    input: &EncoderInput<'_>,
    dropout_seed: Option<u64>,
) -> (Matrix<T>, ForwardCache<T>) {
    let t = input.ids.len();
    let h = cfg.hidden_size;
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let mut e = Matrix::zeros(t, h);
    for i in 0..t {
        let tok = p.token_emb.row(input.ids[i] as usize);
        let pos = p.position_emb.row(i);
        let seg = p.segment_emb.row(input.segments[i] as usize);
        for (c, x) in e.row_mut(i).iter_mut().enumerate() {
            *x = tok[c] + pos[c] + seg[c];
        }
    }
    let (mut x, emb_ln) = layer_norm(&e, &p.emb_ln_gamma, &p.emb_ln_beta, T::lit(cfg.layer_norm_eps));
    let emb_mask = dropout(&mut x, cfg.dropout_rate, rng.as_mut());
    let mut layers = Vec::with_capacity(p.layers.len());
    for l in &p.layers {
        let (y, cache) = layer_forward(cfg, l, x, input.valid_len, rng.as_mut());
        layers.push(cache);
        x = y;
    }
    let cache = ForwardCache {
        ids: input.ids.to_vec(),
        segments: input.segments.to_vec(),
        emb_ln,
        emb_mask,
        layers,
    };
    (x, cache)
}

fn attention_backward<T: Scalar>(c: &LayerCache<T>, d_ctx: &Matrix<T>, heads: usize) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
    let (t, h) = c.q.shape();
    let d = h / heads;
    let scale = T::one() / T::from_usize(d).unwrap().sqrt();
    let mut dq = Matrix::zeros(t, h);
    let mut dk = Matrix::zeros(t, h);
    let mut dv = Matrix::zeros(t, h);
    let mut dp = vec![T::zero(); t];
    for (n, p) in c.probs.iter().enumerate() {
        let cols = n * d..(n + 1) * d;
        for i in 0..t {
            let dci = &d_ctx.row(i)[cols.clone()];
            let mut weighted = T::zero();
            for (j, dpj) in dp.iter_mut().enumerate() {
                let pij = p.at(i, j);
                if pij == T::zero() {
                    *dpj = T::zero();
                    continue;
                }
                *dpj = dot(dci, &c.v.row(j)[cols.clone()]);
                weighted = weighted + pij * *dpj;
                for (o, &g) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dci) {
                    *o = *o + pij * g;
                }
            }
            for (j, &dpj) in dp.iter().enumerate() {
                let pij = p.at(i, j);
                if pij == T::zero() {
                    continue;
                }
                let ds = pij * (dpj - weighted) * scale;
                let kj: Vec<T> = c.k.row(j)[cols.clone()].to_vec();
                for (o, &kk) in dq.row_mut(i)[cols.clone()].iter_mut().zip(&kj) {
                    *o = *o + ds * kk;
                }
                let qi: Vec<T> = c.q.row(i)[cols.clone()].to_vec();
                for (o, &qq) in dk.row_mut(j)[cols.clone()].iter_mut().zip(&qi) {
                    *o = *o + ds * qq;
                }
            }
        }
    }
    (dq, dk, dv)
}

/// Accumulates parameter gradients given `d_out`, the gradient of the loss
/// with respect to the encoder output.
pub fn backward<T: Scalar>(p: &ModelParams<T>, cache: &ForwardCache<T>, d_out: Matrix<T>, g: &mut ModelParams<T>, heads: usize) {
    let mut dx = d_out;
    for (li, c) in cache.layers.iter().enumerate().rev() {
        let l = &p.layers[li];
        let gl = &mut g.layers[li];
        let d_sum = layer_norm_backward(&dx, &c.ln2, &l.ffn_ln_gamma, &mut gl.ffn_ln_gamma, &mut gl.ffn_ln_beta);
        let mut d_h1 = d_sum.clone();
        let mut d_out = d_sum;
        apply_mask(&mut d_out, &c.ffn_mask);
        let mut d_act = linear_backward(&c.ffn_act, &l.ffn_out_w, &d_out, &mut gl.ffn_out_w, &mut gl.ffn_out_b);
        for (da, &x) in d_act.data.iter_mut().zip(&c.ffn_pre.data) {
            *da = *da * gelu_grad(x);
        }
        d_h1.add_assign(&linear_backward(&c.h1, &l.ffn_in_w, &d_act, &mut gl.ffn_in_w, &mut gl.ffn_in_b));

        let d_asum = layer_norm_backward(&d_h1, &c.ln1, &l.attn_ln_gamma, &mut gl.attn_ln_gamma, &mut gl.attn_ln_beta);
        let mut d_input = d_asum.clone();
        let mut d_a = d_asum;
        apply_mask(&mut d_a, &c.attn_mask);
        let d_ctx = linear_backward(&c.ctx, &l.attn_out_w, &d_a, &mut gl.attn_out_w, &mut gl.attn_out_b);
        let (dq, dk, dv) = attention_backward(c, &d_ctx, heads);
        d_input.add_assign(&linear_backward(&c.input, &l.query_w, &dq, &mut gl.query_w, &mut gl.query_b));
        d_input.add_assign(&linear_backward(&c.input, &l.key_w, &dk, &mut gl.key_w, &mut gl.key_b));
        d_input.add_assign(&linear_backward(&c.input, &l.value_w, &dv, &mut gl.value_w, &mut gl.value_b));
        dx = d_input;
    }
    apply_mask(&mut dx, &cache.emb_mask);
    let de = layer_norm_backward(&dx, &cache.emb_ln, &p.emb_ln_gamma, &mut g.emb_ln_gamma, &mut g.emb_ln_beta);
    for i in 0..cache.ids.len() {
        let row = de.row(i);
        let targets = [
            g.token_emb.row_mut(cache.ids[i] as usize).as_mut_ptr(),
            g.position_emb.row_mut(i).as_mut_ptr(),
            g.segment_emb.row_mut(cache.segments[i] as usize).as_mut_ptr(),
        ];
        // The three rows live in distinct tensors, so writes never alias.
        for ptr in targets {
            for (c, &v) in row.iter().enumerate() {
                unsafe {
                    *ptr.add(c) = *ptr.add(c) + v;
                }
            }
        }
    }
}
