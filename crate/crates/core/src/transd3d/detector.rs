use super::label::decide;
use super::network::{forward, NetOptions};
use super::params::NetworkParams;
use crate::constellation::{SubblockBits, System};
use crate::detectors::Detector;
use crate::ndiff::Tensor2D;
use crate::phy::{write_features, Channel, RxBlock, FEATURES};
use crate::{Error, Result};

const INFER_SLICE: usize = 32;

/// The trained network wrapped as a [`Detector`].
#[derive(Debug, Clone)]
pub struct TransDetector {
    system: System,
    params: NetworkParams,
    options: NetOptions,
}

impl TransDetector {
    pub fn new(system: &System, params: NetworkParams, options: NetOptions) -> Result<Self> {
        if params.dims.system != system.config {
            return Err(Error::InvalidConfig(format!(
                "weights were trained for {:?}, detector runs {:?}",
                params.dims.system, system.config
            )));
        }
        Ok(TransDetector {
            system: system.clone(),
            params,
            options,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// Network output for a batch of blocks, stacked row-wise.
    pub fn infer(&self, blocks: &[(&RxBlock, &Channel)]) -> Tensor2D {
        let n = self.system.config.n;
        let width = self.params.dims.d_out;
        let mut out = Vec::with_capacity(blocks.len() * n * width);
        // Blocks are independent; slicing keeps activations cache resident.
        for slice in blocks.chunks(INFER_SLICE) {
            let mut input = Tensor2D::zeros(slice.len() * n, FEATURES);
            for (i, (rx, ch)) in slice.iter().enumerate() {
                let dst = &mut input.data_mut()[i * n * FEATURES..(i + 1) * n * FEATURES];
                write_features(rx, ch, dst).expect("block shapes match the system");
            }
            let o = forward(&self.params, self.options, &input)
                .expect("input shape matches the network")
                .output;
            out.extend_from_slice(o.data());
        }
        Tensor2D::from_vec(blocks.len() * n, width, out).expect("row count matches")
    }
}

impl Detector for TransDetector {
    fn name(&self) -> &'static str {
        "trans"
    }

    fn detect(&self, rx: &RxBlock, channel: &Channel, n0: f64) -> SubblockBits {
        self.detect_batch(&[(rx, channel)], n0)
            .pop()
            .expect("one block in, one out")
    }

    fn detect_batch(&self, blocks: &[(&RxBlock, &Channel)], _n0: f64) -> Vec<SubblockBits> {
        if blocks.is_empty() {
            return Vec::new();
        }
        let out = self.infer(blocks);
        let cfg = &self.system.config;
        let stride = cfg.n * (cfg.s_a + 1);
        out.data()
            .chunks(stride)
            .map(|o| {
                let (pattern, symbols) = decide(o, &self.system);
                self.system.bits_of(pattern, &symbols)
            })
            .collect()
    }
}
