use rand::Rng;

use crate::constellation::SystemConfig;
use crate::ndiff::Tensor2D;
use crate::phy::FEATURES;
use crate::{Error, Result};

/// Layer widths of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    pub system: SystemConfig,
    /// Tokens per block (subcarriers).
    pub n: usize,
    pub d_in: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_head: usize,
    pub d_mlp: usize,
    /// `s_A + 1`: symbol columns plus the mode column.
    pub d_out: usize,
}

impl NetDims {
    pub fn new(system: SystemConfig, d_model: usize, heads: usize, d_mlp: usize) -> Result<Self> {
        if heads == 0 || d_model == 0 || !d_model.is_multiple_of(heads) || d_mlp == 0 {
            return Err(Error::InvalidConfig(format!(
                "d_model={d_model} must be a positive multiple of heads={heads}, d_mlp={d_mlp} positive"
            )));
        }
        Ok(NetDims {
            system,
            n: system.n,
            d_in: FEATURES,
            d_model,
            heads,
            d_head: d_model / heads,
            d_mlp,
            d_out: system.s_a + 1,
        })
    }

    /// Two heads with `(d_model, d_mlp)` = (32, 128) for `s = 2` and
    /// (64, 256) otherwise.
    pub fn default_for(system: SystemConfig) -> Self {
        let (d_model, d_mlp) = if system.s_a <= 2 {
            (32, 128)
        } else {
            (64, 256)
        };
        NetDims::new(system, d_model, 2, d_mlp).expect("defaults are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w_q: Tensor2D,
    pub b_q: Tensor2D,
    pub w_k: Tensor2D,
    pub b_k: Tensor2D,
    pub w_v: Tensor2D,
    pub b_v: Tensor2D,
}

/// All weights and biases. Weights are `fan_in × fan_out` and act on row
/// tokens from the right; biases are `1 × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub dims: NetDims,
    pub w_c: Tensor2D,
    pub b_c: Tensor2D,
    pub heads: Vec<HeadParams>,
    pub w_e: Tensor2D,
    pub b_e: Tensor2D,
    pub w_a1: Tensor2D,
    pub b_a1: Tensor2D,
    pub w_a2: Tensor2D,
    pub b_a2: Tensor2D,
    pub w_o: Tensor2D,
    pub b_o: Tensor2D,
}

/// `(name, rows, cols)` of every tensor in canonical order.
pub fn tensor_layout(dims: &NetDims) -> Vec<(String, usize, usize)> {
    let NetDims {
        d_in,
        d_model,
        d_head,
        d_mlp,
        d_out,
        ..
    } = *dims;
    let mut out = vec![
        ("W_C".to_string(), d_in, d_model),
        ("b_C".to_string(), 1, d_model),
    ];
    for h in 1..=dims.heads {
        for kind in ["Q", "K", "V"] {
            out.push((format!("W_{kind}{h}"), d_model, d_head));
            out.push((format!("b_{kind}{h}"), 1, d_head));
        }
    }
    out.extend([
        ("W_E".to_string(), dims.heads * d_head, d_model),
        ("b_E".to_string(), 1, d_model),
        ("W_A1".to_string(), d_model, d_mlp),
        ("b_A1".to_string(), 1, d_mlp),
        ("W_A2".to_string(), d_mlp, d_model),
        ("b_A2".to_string(), 1, d_model),
        ("W_O".to_string(), d_model, d_out),
        ("b_O".to_string(), 1, d_out),
    ]);
    out
}

impl NetworkParams {
    pub fn zeros(dims: NetDims) -> Self {
        let tensors = tensor_layout(&dims)
            .into_iter()
            .map(|(_, r, c)| Tensor2D::zeros(r, c))
            .collect();
        Self::from_tensors(dims, tensors).expect("layout matches")
    }

    /// Builds parameters from tensors given in canonical order.
    pub fn from_tensors(dims: NetDims, tensors: Vec<Tensor2D>) -> Result<Self> {
        let layout = tensor_layout(&dims);
        if tensors.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, r, c), t) in layout.iter().zip(&tensors) {
            if t.shape() != (*r, *c) {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {r}x{c}, got {:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        let w_c = next();
        let b_c = next();
        let heads = (0..dims.heads)
            .map(|_| HeadParams {
                w_q: next(),
                b_q: next(),
                w_k: next(),
                b_k: next(),
                w_v: next(),
                b_v: next(),
            })
            .collect();
        Ok(NetworkParams {
            dims,
            w_c,
            b_c,
            heads,
            w_e: next(),
            b_e: next(),
            w_a1: next(),
            b_a1: next(),
            w_a2: next(),
            b_a2: next(),
            w_o: next(),
            b_o: next(),
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        let mut v = vec![&self.w_c, &self.b_c];
        for h in &self.heads {
            v.extend([&h.w_q, &h.b_q, &h.w_k, &h.b_k, &h.w_v, &h.b_v]);
        }
        v.extend([
            &self.w_e, &self.b_e, &self.w_a1, &self.b_a1, &self.w_a2, &self.b_a2, &self.w_o,
            &self.b_o,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        let mut v = vec![&mut self.w_c, &mut self.b_c];
        for h in &mut self.heads {
            v.extend([
                &mut h.w_q, &mut h.b_q, &mut h.w_k, &mut h.b_k, &mut h.w_v, &mut h.b_v,
            ]);
        }
        v.extend([
            &mut self.w_e,
            &mut self.b_e,
            &mut self.w_a1,
            &mut self.b_a1,
            &mut self.w_a2,
            &mut self.b_a2,
            &mut self.w_o,
            &mut self.b_o,
        ]);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Glorot-uniform weights, zero biases. Weights are drawn in canonical
/// order.
pub fn init_params<R: Rng + ?Sized>(rng: &mut R, dims: NetDims) -> NetworkParams {
    let tensors = tensor_layout(&dims)
        .into_iter()
        .map(|(_, rows, cols)| {
            if rows == 1 {
                Tensor2D::zeros(rows, cols)
            } else {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                Tensor2D::uniform(rng, rows, cols, bound)
            }
        })
        .collect();
    NetworkParams::from_tensors(dims, tensors).expect("layout matches")
}
