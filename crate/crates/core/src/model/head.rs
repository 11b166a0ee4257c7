//! Sigmoid start/end span head and its binary cross-entropy loss.

use super::params::ModelParams;
use super::tensor::{dot, Matrix};
use super::ModelError;
use crate::scalar::Scalar;

/// Clamp applied to probabilities before taking logarithms in the loss.
pub const LOSS_EPSILON: f64 = 1e-7;

/// Per-token start/end probabilities of one context.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbabilities<T> {
    pub start: Vec<T>,
    pub end: Vec<T>,
    /// True on text-segment, non-PAD positions.
    pub valid: Vec<bool>,
}

impl<T: Scalar> TokenProbabilities<T> {
    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let p = if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    };
    p.max(T::min_positive_value()).min(T::one() - T::epsilon() / T::lit(2.0))
}

/// Start and end logits of every row of `enc`.
pub(crate) fn logits<T: Scalar>(enc: &Matrix<T>, p: &ModelParams<T>, shared_bias: bool) -> (Vec<T>, Vec<T>) {
    let bs = p.start_b.data[0];
    let be = if shared_bias { bs } else { p.end_b.data[0] };
    let zs = (0..enc.rows).map(|i| dot(&p.start_w.data, enc.row(i)) + bs).collect();
    let ze = (0..enc.rows).map(|i| dot(&p.end_w.data, enc.row(i)) + be).collect();
    (zs, ze)
}

/// `v[i] = sigmoid(w . enc[i] + b)` for both heads.
pub fn token_probabilities<T: Scalar>(
    enc: &Matrix<T>,
    p: &ModelParams<T>,
    valid: Vec<bool>,
    shared_bias: bool,
) -> TokenProbabilities<T> {
    assert_eq!(valid.len(), enc.rows, "valid mask length");
    let (zs, ze) = logits(enc, p, shared_bias);
    TokenProbabilities {
        start: zs.into_iter().map(sigmoid).collect(),
        end: ze.into_iter().map(sigmoid).collect(),
        valid,
    }
}

/// `v_s[s] * v_e[e]`.
pub fn span_score<T: Scalar>(probs: &TokenProbabilities<T>, s: usize, e: usize) -> Result<T, ModelError> {
    let ok = |i: usize| probs.valid.get(i).copied().unwrap_or(false);
    if s > e || !ok(s) || !ok(e) {
        return Err(ModelError::InvalidSpan(s, e));
    }
    Ok(probs.start[s] * probs.end[e])
}

fn check_targets<T>(probs: &TokenProbabilities<T>, start: &[u8], end: &[u8]) -> Result<usize, ModelError> {
    if start.len() != probs.valid.len() || end.len() != probs.valid.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "targets of length {}/{} for {} positions",
            start.len(),
            end.len(),
            probs.valid.len()
        )));
    }
    match probs.valid.iter().filter(|&&v| v).count() {
        0 => Err(ModelError::NoValidPositions),
        n => Ok(n),
    }
}

fn bce<T: Scalar>(p: T, g: u8) -> T {
    let eps = T::lit(LOSS_EPSILON);
    let p = p.max(eps).min(T::one() - eps);
    if g != 0 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

/// Mean BCE over valid positions for starts plus the same for ends.
pub fn loss<T: Scalar>(probs: &TokenProbabilities<T>, start: &[u8], end: &[u8]) -> Result<T, ModelError> {
    let n = T::from_usize(check_targets(probs, start, end)?).unwrap();
    let mut ls = T::zero();
    let mut le = T::zero();
    for i in (0..probs.len()).filter(|&i| probs.valid[i]) {
        ls = ls + bce(probs.start[i], start[i]);
        le = le + bce(probs.end[i], end[i]);
    }
    Ok(ls / n + le / n)
}

/// Gradient of [`loss`] with respect to the start and end logits.
pub(crate) fn loss_logit_grads<T: Scalar>(
    probs: &TokenProbabilities<T>,
    start: &[u8],
    end: &[u8],
) -> Result<(Vec<T>, Vec<T>), ModelError> {
    let n = T::from_usize(check_targets(probs, start, end)?).unwrap();
    let eps = T::lit(LOSS_EPSILON);
    let grad = |p: T, g: u8| {
        if p < eps || p > T::one() - eps {
            T::zero()
        } else {
            (p - if g != 0 { T::one() } else { T::zero() }) / n
        }
    };
    let mut ds = vec![T::zero(); probs.len()];
    let mut de = vec![T::zero(); probs.len()];
    for i in (0..probs.len()).filter(|&i| probs.valid[i]) {
        ds[i] = grad(probs.start[i], start[i]);
        de[i] = grad(probs.end[i], end[i]);
    }
    Ok((ds, de))
}

/// Accumulates head gradients and returns the gradient with respect to `enc`.
pub(crate) fn head_backward<T: Scalar>(
    enc: &Matrix<T>,
    p: &ModelParams<T>,
    ds: &[T],
    de: &[T],
    g: &mut ModelParams<T>,
    shared_bias: bool,
) -> Matrix<T> {
    let mut d_enc = Matrix::zeros(enc.rows, enc.cols);
    for i in 0..enc.rows {
        let row = enc.row(i);
        for (c, out) in d_enc.row_mut(i).iter_mut().enumerate() {
            *out = ds[i] * p.start_w.data[c] + de[i] * p.end_w.data[c];
            g.start_w.data[c] = g.start_w.data[c] + ds[i] * row[c];
            g.end_w.data[c] = g.end_w.data[c] + de[i] * row[c];
        }
        g.start_b.data[0] = g.start_b.data[0] + ds[i];
        if shared_bias {
            g.start_b.data[0] = g.start_b.data[0] + de[i];
        } else {
            g.end_b.data[0] = g.end_b.data[0] + de[i];
        }
    }
    d_enc
}
