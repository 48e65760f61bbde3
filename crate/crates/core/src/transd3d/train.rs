use rand::Rng;

use super::label::write_one_hot;
use super::network::{loss_and_grad, NetOptions};
use super::params::{init_params, NetDims, NetworkParams};
use crate::constellation::System;
use crate::ndiff::{Adam, AdamConfig, Tensor2D};
use crate::phy::{simulate_block, snr_to_n0, write_features, FEATURES};
use crate::seed::{stream_rng, DOMAIN_INIT, DOMAIN_TRAIN};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// SNR in dB at which every training sample is simulated.
    pub train_snr_db: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batches_per_epoch: 600,
            batch_size: 1000,
            lr: 1e-3,
            train_snr_db: 15.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batches and batch size must be positive".into(),
            ));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || !self.train_snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} and training SNR {} must be positive and finite",
                self.lr, self.train_snr_db
            )));
        }
        Ok(())
    }
}

/// Stacked features and labels of `count` simulated blocks.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Tensor2D,
    pub labels: Tensor2D,
}

pub fn make_batch<R: Rng + ?Sized>(system: &System, n0: f64, count: usize, rng: &mut R) -> Batch {
    let cfg = &system.config;
    let width = cfg.s_a + 1;
    let mut features = Tensor2D::zeros(count * cfg.n, FEATURES);
    let mut labels = Tensor2D::zeros(count * cfg.n, width);
    for i in 0..count {
        let tr = simulate_block(system, n0, rng);
        let f = &mut features.data_mut()[i * cfg.n * FEATURES..(i + 1) * cfg.n * FEATURES];
        write_features(&tr.rx, &tr.channel, f).expect("shapes agree");
        let syms = system.symbols_of(&tr.bits).expect("valid bits");
        write_one_hot(
            &syms,
            cfg,
            &mut labels.data_mut()[i * cfg.n * width..(i + 1) * cfg.n * width],
        );
    }
    Batch { features, labels }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Initial parameters for a training run with this seed.
pub fn initial_params(seed: u64, dims: NetDims) -> NetworkParams {
    init_params(&mut stream_rng(seed, DOMAIN_INIT, 0), dims)
}

/// Adam on mean BCE. Every batch is freshly simulated from its own random
/// stream; `progress` is called with `(epoch, mean loss)` after each epoch.
pub fn train(
    tc: &TrainConfig,
    system: &System,
    dims: NetDims,
    options: NetOptions,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    tc.validate()?;
    if dims.system != system.config {
        return Err(Error::InvalidConfig(
            "network dims built for another system".into(),
        ));
    }
    let mut params = initial_params(tc.seed, dims);
    let mut adam = Adam::new(
        AdamConfig {
            lr: tc.lr,
            ..AdamConfig::default()
        },
        params.tensors(),
    );
    let n0 = snr_to_n0(tc.train_snr_db);
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let mut total = 0.0;
        for b in 0..tc.batches_per_epoch {
            let index = (epoch * tc.batches_per_epoch + b) as u64;
            let batch = make_batch(
                system,
                n0,
                tc.batch_size,
                &mut stream_rng(tc.seed, DOMAIN_TRAIN, index),
            );
            let (loss, grads) = loss_and_grad(&params, options, &batch.features, &batch.labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            adam.step(&mut params.tensors_mut(), &grads.tensors())?;
            total += loss;
        }
        let mean = total / tc.batches_per_epoch as f64;
        progress(epoch, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}
