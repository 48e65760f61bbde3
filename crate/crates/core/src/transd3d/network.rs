//! Forward and backward passes over a batch of blocks stacked row-wise:
//! rows `b·n .. (b+1)·n` of every activation belong to block `b`.

use super::params::{HeadParams, NetworkParams};
use crate::ndiff::{
    bce_backward, bce_loss, layer_norm, layer_norm_backward, linear, linear_backward, relu,
    relu_backward, segmented_attention, segmented_attention_backward, sigmoid, sigmoid_backward,
    AttentionCache, LayerNormCache, Tensor2D,
};
use crate::{Error, Result};

/// Architecture switches. The default is the plain equations: unscaled
/// attention scores and no residual paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetOptions {
    /// Multiply attention scores by `1/√d_head`.
    pub scaled_attention: bool,
    /// Add skip connections around the attention and MLP sublayers.
    pub residual: bool,
}

struct HeadCache {
    q: Tensor2D,
    k: Tensor2D,
    v: Tensor2D,
    att: AttentionCache,
}

/// Activations kept for [`backward`].
pub struct ForwardCache {
    input: Tensor2D,
    z_c: Tensor2D,
    c_bar: Tensor2D,
    ln1: LayerNormCache,
    heads: Vec<HeadCache>,
    concat: Tensor2D,
    e_bar: Tensor2D,
    ln2: LayerNormCache,
    z_a1: Tensor2D,
    r_a1: Tensor2D,
    a: Tensor2D,
    pub output: Tensor2D,
}

fn attention_scale(params: &NetworkParams, options: NetOptions) -> f64 {
    if options.scaled_attention {
        1.0 / (params.dims.d_head as f64).sqrt()
    } else {
        1.0
    }
}

/// Runs the network on `input`, a `(blocks·n) × 9` stack of feature
/// matrices. The output is `(blocks·n) × (s_A + 1)` with entries in (0, 1).
pub fn forward(
    params: &NetworkParams,
    options: NetOptions,
    input: &Tensor2D,
) -> Result<ForwardCache> {
    let dims = &params.dims;
    if input.cols() != dims.d_in || !input.rows().is_multiple_of(dims.n) {
        return Err(Error::ShapeMismatch(format!(
            "network input {:?}, expected (blocks·{}) x {}",
            input.shape(),
            dims.n,
            dims.d_in
        )));
    }
    let scale = attention_scale(params, options);

    let z_c = linear(input, &params.w_c, &params.b_c)?;
    let c = relu(&z_c);
    let (c_bar, ln1) = layer_norm(&c);

    let mut heads = Vec::with_capacity(params.heads.len());
    let mut head_out = Vec::with_capacity(params.heads.len());
    for hp in &params.heads {
        let q = linear(&c_bar, &hp.w_q, &hp.b_q)?;
        let k = linear(&c_bar, &hp.w_k, &hp.b_k)?;
        let v = linear(&c_bar, &hp.w_v, &hp.b_v)?;
        let (e, att) = segmented_attention(&q, &k, &v, dims.n, scale)?;
        head_out.push(e);
        heads.push(HeadCache { q, k, v, att });
    }
    let concat = Tensor2D::concat_cols(&head_out.iter().collect::<Vec<_>>())?;
    let mut e = linear(&concat, &params.w_e, &params.b_e)?;
    if options.residual {
        e.add_assign(&c)?;
    }
    let (e_bar, ln2) = layer_norm(&e);

    let z_a1 = linear(&e_bar, &params.w_a1, &params.b_a1)?;
    let r_a1 = relu(&z_a1);
    let mut a = linear(&r_a1, &params.w_a2, &params.b_a2)?;
    if options.residual {
        a.add_assign(&e)?;
    }
    let output = sigmoid(&linear(&a, &params.w_o, &params.b_o)?);

    Ok(ForwardCache {
        input: input.clone(),
        z_c,
        c_bar,
        ln1,
        heads,
        concat,
        e_bar,
        ln2,
        z_a1,
        r_a1,
        a,
        output,
    })
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// loss gradient `d_output` with respect to the network output.
pub fn backward(
    params: &NetworkParams,
    options: NetOptions,
    cache: &ForwardCache,
    d_output: &Tensor2D,
) -> Result<NetworkParams> {
    let dims = &params.dims;
    let scale = attention_scale(params, options);

    let dz_o = sigmoid_backward(&cache.output, d_output);
    let g_o = linear_backward(&cache.a, &params.w_o, &dz_o)?;
    let da = g_o.dx;

    let g_a2 = linear_backward(&cache.r_a1, &params.w_a2, &da)?;
    let dz_a1 = relu_backward(&cache.z_a1, &g_a2.dx);
    let g_a1 = linear_backward(&cache.e_bar, &params.w_a1, &dz_a1)?;
    let mut de = layer_norm_backward(&cache.e_bar, &cache.ln2, &g_a1.dx);
    if options.residual {
        de.add_assign(&da)?;
    }

    let g_e = linear_backward(&cache.concat, &params.w_e, &de)?;
    let d_heads = g_e.dx.split_cols(params.heads.len());

    let mut dc_bar = Tensor2D::zeros(cache.c_bar.rows(), cache.c_bar.cols());
    let mut head_grads = Vec::with_capacity(params.heads.len());
    for ((hp, hc), dh) in params.heads.iter().zip(&cache.heads).zip(&d_heads) {
        let g = segmented_attention_backward(&hc.q, &hc.k, &hc.v, &hc.att, dh, dims.n, scale)?;
        let gq = linear_backward(&cache.c_bar, &hp.w_q, &g.dq)?;
        let gk = linear_backward(&cache.c_bar, &hp.w_k, &g.dk)?;
        let gv = linear_backward(&cache.c_bar, &hp.w_v, &g.dv)?;
        dc_bar.add_assign(&gq.dx)?;
        dc_bar.add_assign(&gk.dx)?;
        dc_bar.add_assign(&gv.dx)?;
        head_grads.push(HeadParams {
            w_q: gq.dw,
            b_q: gq.db,
            w_k: gk.dw,
            b_k: gk.db,
            w_v: gv.dw,
            b_v: gv.db,
        });
    }

    let mut dc = layer_norm_backward(&cache.c_bar, &cache.ln1, &dc_bar);
    if options.residual {
        dc.add_assign(&de)?;
    }
    let dz_c = relu_backward(&cache.z_c, &dc);
    let g_c = linear_backward(&cache.input, &params.w_c, &dz_c)?;

    Ok(NetworkParams {
        dims: *dims,
        w_c: g_c.dw,
        b_c: g_c.db,
        heads: head_grads,
        w_e: g_e.dw,
        b_e: g_e.db,
        w_a1: g_a1.dw,
        b_a1: g_a1.db,
        w_a2: g_a2.dw,
        b_a2: g_a2.db,
        w_o: g_o.dw,
        b_o: g_o.db,
    })
}

/// Mean BCE of the network on a batch and its parameter gradient.
pub fn loss_and_grad(
    params: &NetworkParams,
    options: NetOptions,
    input: &Tensor2D,
    labels: &Tensor2D,
) -> Result<(f64, NetworkParams)> {
    let cache = forward(params, options, input)?;
    let loss = bce_loss(&cache.output, labels)?;
    let d_out = bce_backward(&cache.output, labels)?;
    let grads = backward(params, options, &cache, &d_out)?;
    Ok((loss, grads))
}

pub fn loss(
    params: &NetworkParams,
    options: NetOptions,
    input: &Tensor2D,
    labels: &Tensor2D,
) -> Result<f64> {
    bce_loss(&forward(params, options, input)?.output, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::SystemConfig;
    use crate::ndiff::grad_check;
    use crate::transd3d::params::{init_params, NetDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_dims() -> NetDims {
        NetDims::new(SystemConfig::scenario1(), 8, 2, 16).unwrap()
    }

    #[test]
    fn output_shape_and_range() {
        let dims = NetDims::default_for(SystemConfig::scenario2());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = init_params(&mut rng, dims);
        let x = Tensor2D::uniform(&mut rng, 3 * 4, 9, 2.0);
        let out = forward(&p, NetOptions::default(), &x).unwrap().output;
        assert_eq!(out.shape(), (12, 5));
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(forward(&p, NetOptions::default(), &Tensor2D::zeros(5, 9)).is_err());
    }

    #[test]
    fn identical_tokens_give_identical_rows() {
        let dims = NetDims::default_for(SystemConfig::scenario1());
        let p = init_params(&mut ChaCha8Rng::seed_from_u64(1), dims);
        let out = forward(&p, NetOptions::default(), &Tensor2D::zeros(4, 9))
            .unwrap()
            .output;
        for r in 1..4 {
            assert_eq!(out.row(r), out.row(0));
        }
    }

    #[test]
    fn blocks_in_a_batch_are_independent() {
        let dims = NetDims::default_for(SystemConfig::scenario1());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = init_params(&mut rng, dims);
        let x = Tensor2D::uniform(&mut rng, 8, 9, 1.0);
        let both = forward(&p, NetOptions::default(), &x).unwrap().output;
        let second = forward(&p, NetOptions::default(), &x.row_block(4, 4))
            .unwrap()
            .output;
        for (a, b) in both.row_block(4, 4).data().iter().zip(second.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn end_to_end_check(options: NetOptions, seed: u64) {
        let dims = small_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = init_params(&mut rng, dims);
        // non-zero biases so their gradients are exercised
        for t in p.tensors_mut() {
            if t.rows() == 1 {
                *t = Tensor2D::uniform(&mut rng, 1, t.cols(), 0.3);
            }
        }
        let x = Tensor2D::uniform(&mut rng, 2 * 4, 9, 1.5);
        let labels = Tensor2D::uniform(&mut rng, 8, 3, 1.0).map(|v| (v > 0.0) as u8 as f64);
        let (_, grads) = loss_and_grad(&p, options, &x, &labels).unwrap();

        let names = crate::transd3d::params::tensor_layout(&dims);
        let analytic: Vec<Tensor2D> = grads.tensors().into_iter().cloned().collect();
        for (idx, (name, _, _)) in names.iter().enumerate() {
            let base = p.clone();
            let f = |d: &[f64]| {
                let mut q = base.clone();
                q.tensors_mut()[idx].data_mut().copy_from_slice(d);
                loss(&q, options, &x, &labels).unwrap()
            };
            let err = grad_check(f, p.tensors()[idx].data(), analytic[idx].data(), 1e-5);
            assert!(err < 1e-4, "{name}: {err}");
        }
    }

    #[test]
    fn end_to_end_gradients_plain() {
        for seed in 0..3 {
            end_to_end_check(NetOptions::default(), 10 + seed);
        }
    }

    #[test]
    fn end_to_end_gradients_with_switches() {
        end_to_end_check(
            NetOptions {
                scaled_attention: true,
                residual: true,
            },
            20,
        );
        end_to_end_check(
            NetOptions {
                scaled_attention: false,
                residual: true,
            },
            21,
        );
    }

    #[test]
    fn permutation_equivariance() {
        let dims = NetDims::default_for(SystemConfig::scenario2());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = init_params(&mut rng, dims);
        for _ in 0..20 {
            let x = Tensor2D::uniform(&mut rng, 4, 9, 2.0);
            let mut perm: Vec<usize> = (0..4).collect();
            for i in (1..4).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let mut xp = Tensor2D::zeros(4, 9);
            for (dst, &src) in perm.iter().enumerate() {
                xp.row_mut(dst).copy_from_slice(x.row(src));
            }
            let o = forward(&p, NetOptions::default(), &x).unwrap().output;
            let op = forward(&p, NetOptions::default(), &xp).unwrap().output;
            for (dst, &src) in perm.iter().enumerate() {
                for (a, b) in op.row(dst).iter().zip(o.row(src)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
