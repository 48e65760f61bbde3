//! Layers and their backward passes. Every backward takes the upstream
//! gradient `dy` and whatever forward state it needs, and returns exact
//! analytic gradients.

use std::f64::consts::LN_2;

use super::tensor::{dot, matmul_into, Tensor2D};
use crate::{Error, Result};

/// Variance stabiliser inside the layer-norm square root.
pub const LN_EPS: f64 = 1e-5;

/// Probabilities are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` before logs.
pub const BCE_CLAMP: f64 = 1e-12;

/// `x · w + b`, with `b` a `1×cols` row broadcast over all rows.
pub fn linear(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::ShapeMismatch(format!(
            "bias {:?} for weight {:?}",
            b.shape(),
            w.shape()
        )));
    }
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        for (v, bv) in y.row_mut(r).iter_mut().zip(b.data()) {
            *v += bv;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub dx: Tensor2D,
    pub dw: Tensor2D,
    pub db: Tensor2D,
}

pub fn linear_backward(x: &Tensor2D, w: &Tensor2D, dy: &Tensor2D) -> Result<LinearGrads> {
    if dy.rows() != x.rows() || dy.cols() != w.cols() || x.cols() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "linear backward: x {:?}, w {:?}, dy {:?}",
            x.shape(),
            w.shape(),
            dy.shape()
        )));
    }
    let dx = dy.matmul_t(w)?;
    let dw = x.t_matmul(dy)?;
    let mut db = Tensor2D::zeros(1, dy.cols());
    for r in 0..dy.rows() {
        for (d, g) in db.data_mut().iter_mut().zip(dy.row(r)) {
            *d += g;
        }
    }
    Ok(LinearGrads { dx, dw, db })
}

pub fn relu(x: &Tensor2D) -> Tensor2D {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(x: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    let mut dx = dy.clone();
    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// Per-row inverse standard deviations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub inv_std: Vec<f64>,
}

/// Per-row standardisation, no learned scale or shift.
pub fn layer_norm(x: &Tensor2D) -> (Tensor2D, LayerNormCache) {
    let cols = x.cols() as f64;
    let mut y = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = y.row_mut(r);
        let mean = row.iter().sum::<f64>() / cols;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
        let s = 1.0 / (var + LN_EPS).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv_std.push(s);
    }
    (y, LayerNormCache { inv_std })
}

/// `dx = s·(dy − mean(dy) − y·mean(dy ⊙ y))` per row, where `y` is the
/// forward output.
pub fn layer_norm_backward(y: &Tensor2D, cache: &LayerNormCache, dy: &Tensor2D) -> Tensor2D {
    let cols = y.cols() as f64;
    let mut dx = Tensor2D::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, gr) = (y.row(r), dy.row(r));
        let mean_g = gr.iter().sum::<f64>() / cols;
        let mean_gy = dot(gr, yr) / cols;
        let s = cache.inv_std[r];
        for ((d, &g), &yv) in dx.row_mut(r).iter_mut().zip(gr).zip(yr) {
            *d = s * (g - mean_g - yv * mean_gy);
        }
    }
    dx
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn softmax_backward_row(y: &[f64], dy: &[f64], dx: &mut [f64]) {
    let inner = dot(y, dy);
    for ((d, &yv), &g) in dx.iter_mut().zip(y).zip(dy) {
        *d = yv * (g - inner);
    }
}

pub fn softmax_rows(x: &Tensor2D) -> Tensor2D {
    let mut y = x.clone();
    for r in 0..y.rows() {
        softmax_in_place(y.row_mut(r));
    }
    y
}

/// Jacobian-vector product through the row softmax, from its output `y`.
pub fn softmax_rows_backward(y: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    let mut dx = Tensor2D::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        softmax_backward_row(y.row(r), dy.row(r), dx.row_mut(r));
    }
    dx
}

#[inline]
fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor2D) -> Tensor2D {
    x.map(sigmoid_scalar)
}

/// From the forward output `y`: `dx = dy · y · (1 − y)`.
pub fn sigmoid_backward(y: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    let mut dx = dy.clone();
    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= yv * (1.0 - yv);
    }
    dx
}

#[inline]
fn clamp_prob(o: f64) -> f64 {
    o.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// Mean base-2 binary cross-entropy over all entries.
pub fn bce_loss(output: &Tensor2D, target: &Tensor2D) -> Result<f64> {
    output.check_same(target, "bce")?;
    let total: f64 = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(&o, &t)| {
            let o = clamp_prob(o);
            -t * o.log2() - (1.0 - t) * (1.0 - o).log2()
        })
        .sum();
    Ok(total / output.data().len() as f64)
}

/// Gradient of [`bce_loss`] with respect to `output`.
pub fn bce_backward(output: &Tensor2D, target: &Tensor2D) -> Result<Tensor2D> {
    output.check_same(target, "bce")?;
    let scale = 1.0 / (LN_2 * output.data().len() as f64);
    let mut d = output.clone();
    for (g, &t) in d.data_mut().iter_mut().zip(target.data()) {
        let o = clamp_prob(*g);
        *g = scale * ((1.0 - t) / (1.0 - o) - t / o);
    }
    Ok(d)
}

/// Forward state of [`segmented_attention`]: the row-softmaxed score
/// matrices, one `block×block` matrix per segment, back to back.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dq: Tensor2D,
    pub dk: Tensor2D,
    pub dv: Tensor2D,
}

fn check_attention(q: &Tensor2D, k: &Tensor2D, v: &Tensor2D, block: usize) -> Result<()> {
    if q.shape() != k.shape()
        || q.rows() != v.rows()
        || block == 0
        || !q.rows().is_multiple_of(block)
    {
        return Err(Error::ShapeMismatch(format!(
            "attention q {:?}, k {:?}, v {:?}, block {block}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    Ok(())
}

/// Self-attention applied independently to consecutive groups of `block`
/// rows: for each group, `softmax_rows(scale · Q Kᵀ) · V`.
pub fn segmented_attention(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    block: usize,
    scale: f64,
) -> Result<(Tensor2D, AttentionCache)> {
    check_attention(q, k, v, block)?;
    let segments = q.rows() / block;
    let dv_cols = v.cols();
    let mut out = Tensor2D::zeros(q.rows(), dv_cols);
    let mut probs = vec![0.0; segments * block * block];
    for s in 0..segments {
        let p = &mut probs[s * block * block..(s + 1) * block * block];
        for i in 0..block {
            let qi = q.row(s * block + i);
            let prow = &mut p[i * block..(i + 1) * block];
            for (j, pv) in prow.iter_mut().enumerate() {
                *pv = scale * dot(qi, k.row(s * block + j));
            }
            softmax_in_place(prow);
        }
        let vs = &v.data()[s * block * dv_cols..(s + 1) * block * dv_cols];
        let os = &mut out.data_mut()[s * block * dv_cols..(s + 1) * block * dv_cols];
        matmul_into(p, vs, os, block, block, dv_cols);
    }
    Ok((out, AttentionCache { probs }))
}

pub fn segmented_attention_backward(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    cache: &AttentionCache,
    dy: &Tensor2D,
    block: usize,
    scale: f64,
) -> Result<AttentionGrads> {
    check_attention(q, k, v, block)?;
    if dy.shape() != v.shape() {
        return Err(Error::ShapeMismatch("attention backward: dy shape".into()));
    }
    let segments = q.rows() / block;
    let mut dq = Tensor2D::zeros(q.rows(), q.cols());
    let mut dk = Tensor2D::zeros(k.rows(), k.cols());
    let mut dv = Tensor2D::zeros(v.rows(), v.cols());
    let mut dp = vec![0.0; block * block];
    let mut ds = vec![0.0; block * block];
    for s in 0..segments {
        let p = &cache.probs[s * block * block..(s + 1) * block * block];
        let base = s * block;
        // dP = dE Vᵀ, dV = Pᵀ dE
        for i in 0..block {
            for j in 0..block {
                dp[i * block + j] = dot(dy.row(base + i), v.row(base + j));
            }
        }
        for i in 0..block {
            for j in 0..block {
                let pij = p[i * block + j];
                let src = dy.row(base + i);
                for (d, &g) in dv.row_mut(base + j).iter_mut().zip(src) {
                    *d += pij * g;
                }
            }
        }
        for i in 0..block {
            softmax_backward_row(
                &p[i * block..(i + 1) * block],
                &dp[i * block..(i + 1) * block],
                &mut ds[i * block..(i + 1) * block],
            );
        }
        // dQ = scale·dS K, dK = scale·dSᵀ Q
        for i in 0..block {
            for j in 0..block {
                let g = scale * ds[i * block + j];
                if g == 0.0 {
                    continue;
                }
                for (d, kv) in dq.row_mut(base + i).iter_mut().zip(k.row(base + j)) {
                    *d += g * kv;
                }
                for (d, qv) in dk.row_mut(base + j).iter_mut().zip(q.row(base + i)) {
                    *d += g * qv;
                }
            }
        }
    }
    Ok(AttentionGrads { dq, dk, dv })
}
