//! Frequency-domain channel: per-entry Rayleigh fading plus AWGN,
//! zero-forcing, and the n×9 feature matrix.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::{SubblockBits, System, TxBlock, DIMS};
use crate::cplx::Cplx;
use crate::ndiff::Tensor2D;
use crate::{Error, Result};

/// Channel magnitudes below this are clamped before zero-forcing.
pub const H_FLOOR: f64 = 1e-9;

/// Feature columns per subcarrier.
pub const FEATURES: usize = 9;

/// Noise variance per complex entry for unit-energy subblocks.
pub fn snr_to_n0(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// One draw from CN(0, variance).
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Cplx {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cplx::new(re * s, im * s)
}

/// 3×n complex fading coefficients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub n: usize,
    pub h: Vec<Cplx>,
}

impl Channel {
    pub fn ones(n: usize) -> Self {
        Channel {
            n,
            h: vec![Cplx::ONE; DIMS * n],
        }
    }

    #[inline]
    pub fn get(&self, dim: usize, pos: usize) -> Cplx {
        self.h[dim * self.n + pos]
    }

    /// Multiplies every coefficient by a real factor.
    pub fn scaled(&self, c: f64) -> Self {
        Channel {
            n: self.n,
            h: self.h.iter().map(|h| h.scale(c)).collect(),
        }
    }
}

/// 3×n complex received matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RxBlock {
    pub n: usize,
    pub y: Vec<Cplx>,
}

impl RxBlock {
    #[inline]
    pub fn get(&self, dim: usize, pos: usize) -> Cplx {
        self.y[dim * self.n + pos]
    }

    pub fn scaled(&self, c: f64) -> Self {
        RxBlock {
            n: self.n,
            y: self.y.iter().map(|y| y.scale(c)).collect(),
        }
    }
}

pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Channel {
    Channel {
        n,
        h: (0..DIMS * n).map(|_| complex_gaussian(rng, 1.0)).collect(),
    }
}

/// `Y = H ⊙ X + G` with `G` i.i.d. CN(0, n0). Noise is drawn even when
/// `n0 == 0` so the random stream does not depend on the SNR.
pub fn transmit<R: Rng + ?Sized>(
    x: &TxBlock,
    channel: &Channel,
    n0: f64,
    rng: &mut R,
) -> Result<RxBlock> {
    if x.n != channel.n || x.data.len() != channel.h.len() {
        return Err(Error::ShapeMismatch(format!(
            "transmit block has n={}, channel has n={}",
            x.n, channel.n
        )));
    }
    let y = x
        .data
        .iter()
        .zip(&channel.h)
        .map(|(&xv, &h)| h.scale(xv) + complex_gaussian(rng, n0))
        .collect();
    Ok(RxBlock { n: x.n, y })
}

#[inline]
fn clamp_coefficient(h: Cplx) -> Cplx {
    let mag = h.abs();
    if mag >= H_FLOOR {
        h
    } else if mag > 0.0 {
        h.scale(H_FLOOR / mag)
    } else {
        Cplx::new(H_FLOOR, 0.0)
    }
}

/// Entrywise `Y / H`, with near-zero coefficients clamped to [`H_FLOOR`]
/// keeping their phase.
pub fn zf_equalize(rx: &RxBlock, channel: &Channel) -> Result<Vec<Cplx>> {
    check_shapes(rx, channel)?;
    Ok(rx
        .y
        .iter()
        .zip(&channel.h)
        .map(|(&y, &h)| y / clamp_coefficient(h))
        .collect())
}

fn check_shapes(rx: &RxBlock, channel: &Channel) -> Result<()> {
    if rx.n != channel.n || rx.y.len() != channel.h.len() {
        return Err(Error::ShapeMismatch(format!(
            "received block has n={}, channel has n={}",
            rx.n, channel.n
        )));
    }
    Ok(())
}

/// Writes the `n×9` feature rows `[Re Ȳ, Im Ȳ, |Y|²]` into `out`.
pub fn write_features(rx: &RxBlock, channel: &Channel, out: &mut [f64]) -> Result<()> {
    check_shapes(rx, channel)?;
    let n = rx.n;
    if out.len() != n * FEATURES {
        return Err(Error::ShapeMismatch(format!(
            "feature buffer has {} entries, need {}",
            out.len(),
            n * FEATURES
        )));
    }
    for pos in 0..n {
        let row = &mut out[pos * FEATURES..(pos + 1) * FEATURES];
        for dim in 0..DIMS {
            let y = rx.get(dim, pos);
            let eq = y / clamp_coefficient(channel.get(dim, pos));
            row[dim] = eq.re;
            row[DIMS + dim] = eq.im;
            row[2 * DIMS + dim] = y.norm_sqr();
        }
    }
    Ok(())
}

pub fn features(rx: &RxBlock, channel: &Channel) -> Result<Tensor2D> {
    let mut t = Tensor2D::zeros(rx.n, FEATURES);
    write_features(rx, channel, t.data_mut())?;
    Ok(t)
}

/// One simulated subblock with its ground truth.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub bits: SubblockBits,
    pub tx: TxBlock,
    pub channel: Channel,
    pub rx: RxBlock,
}

/// Draws bits, then the channel, then the noise, in that order.
pub fn simulate_block<R: Rng + ?Sized>(system: &System, n0: f64, rng: &mut R) -> Transmission {
    let bits = SubblockBits::random(rng, &system.config);
    let tx = system
        .encode(&bits)
        .expect("random bits have the right length");
    let channel = draw_channel(rng, system.config.n);
    let rx = transmit(&tx, &channel, n0, rng).expect("shapes agree");
    Transmission {
        bits,
        tx,
        channel,
        rx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::SystemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_n0(0.0), 1.0);
        assert!((snr_to_n0(10.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_n0(30.0) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn channel_is_deterministic() {
        let a = draw_channel(&mut ChaCha8Rng::seed_from_u64(3), 4);
        let b = draw_channel(&mut ChaCha8Rng::seed_from_u64(3), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn channel_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = draw_channel(&mut rng, 100_000 / 3 + 1);
        let m = ch.h.len() as f64;
        let power = ch.h.iter().map(|h| h.norm_sqr()).sum::<f64>() / m;
        assert!((0.99..=1.01).contains(&power), "power {power}");
        let mean_re = ch.h.iter().map(|h| h.re).sum::<f64>() / m;
        let mean_im = ch.h.iter().map(|h| h.im).sum::<f64>() / m;
        let var_re = ch.h.iter().map(|h| (h.re - mean_re).powi(2)).sum::<f64>() / m;
        let var_im = ch.h.iter().map(|h| (h.im - mean_im).powi(2)).sum::<f64>() / m;
        assert!((var_re - 0.5).abs() < 0.01, "var_re {var_re}");
        assert!((var_im - 0.5).abs() < 0.01, "var_im {var_im}");
    }

    #[test]
    fn identity_channel_without_noise() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let tx = sys
            .encode(&SubblockBits::from_index(0x2b7, &sys.config))
            .unwrap();
        let rx = transmit(
            &tx,
            &Channel::ones(4),
            0.0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        for (y, x) in rx.y.iter().zip(&tx.data) {
            assert_eq!(*y, Cplx::new(*x, 0.0));
        }
    }

    #[test]
    fn zero_input_gives_noise() {
        let tx = TxBlock::zeros(4);
        let ch = draw_channel(&mut ChaCha8Rng::seed_from_u64(1), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rx = transmit(&tx, &ch, 0.3, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for y in &rx.y {
            assert_eq!(*y, complex_gaussian(&mut rng, 0.3));
        }
    }

    #[test]
    fn transmit_rejects_shape_mismatch() {
        let ch = Channel::ones(3);
        let r = transmit(
            &TxBlock::zeros(4),
            &ch,
            0.1,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zf_hand_computed() {
        let rx = RxBlock {
            n: 1,
            y: vec![Cplx::new(2.0, 0.0), Cplx::ONE, Cplx::ONE],
        };
        let ch = Channel {
            n: 1,
            h: vec![Cplx::new(1.0, 1.0), Cplx::ONE, Cplx::ONE],
        };
        let eq = zf_equalize(&rx, &ch).unwrap();
        assert!((eq[0] - Cplx::new(1.0, -1.0)).abs() < 1e-15);
    }

    #[test]
    fn zf_clamps_tiny_coefficients() {
        let rx = RxBlock {
            n: 1,
            y: vec![Cplx::ONE; 3],
        };
        let ch = Channel {
            n: 1,
            h: vec![Cplx::ZERO, Cplx::new(0.0, 1e-300), Cplx::new(-1e-12, 0.0)],
        };
        let eq = zf_equalize(&rx, &ch).unwrap();
        assert!(eq.iter().all(|v| v.is_finite()));
        assert!((eq[0] - Cplx::new(1e9, 0.0)).abs() < 1e-3);
        assert!((eq[1] - Cplx::new(0.0, -1e9)).abs() < 1e-3);
        assert!((eq[2] - Cplx::new(-1e9, 0.0)).abs() < 1e-3);
    }

    #[test]
    fn zf_inverts_noiseless_channel() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let tr = simulate_block(&sys, 0.0, &mut rng);
            let eq = zf_equalize(&tr.rx, &tr.channel).unwrap();
            for (e, x) in eq.iter().zip(&tr.tx.data) {
                let rel = (*e - Cplx::new(*x, 0.0)).abs() / x.abs().max(1e-300);
                assert!(rel < 1e-10, "rel {rel}");
            }
        }
    }

    #[test]
    fn noise_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let tx = TxBlock::zeros(4);
        let ch = Channel::ones(4);
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..100_000 / 12 + 1 {
            let rx = transmit(&tx, &ch, 0.1, &mut rng).unwrap();
            total += rx.y.iter().map(|y| y.norm_sqr()).sum::<f64>();
            count += rx.y.len();
        }
        let p = total / count as f64;
        assert!((0.098..=0.102).contains(&p), "noise power {p}");
    }

    #[test]
    fn feature_layout() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let tx = sys
            .encode(&SubblockBits::from_index(0x1c3, &sys.config))
            .unwrap();
        let ch = Channel::ones(4);
        let rx = transmit(&tx, &ch, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let f = features(&rx, &ch).unwrap();
        assert_eq!((f.rows(), f.cols()), (4, 9));
        for pos in 0..4 {
            for dim in 0..3 {
                let x = tx.get(dim, pos);
                assert_eq!(f.get(pos, dim), x);
                assert_eq!(f.get(pos, 3 + dim), 0.0);
                assert_eq!(f.get(pos, 6 + dim), x * x);
            }
        }
    }

    #[test]
    fn features_of_zero_signal() {
        let rx = RxBlock {
            n: 4,
            y: vec![Cplx::ZERO; 12],
        };
        let ch = draw_channel(&mut ChaCha8Rng::seed_from_u64(4), 4);
        let f = features(&rx, &ch).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_use_raw_energy() {
        let rx = RxBlock {
            n: 1,
            y: vec![Cplx::new(3.0, 4.0), Cplx::ZERO, Cplx::ZERO],
        };
        let ch = Channel {
            n: 1,
            h: vec![Cplx::new(0.0, 2.0), Cplx::ONE, Cplx::ONE],
        };
        let f = features(&rx, &ch).unwrap();
        // (3+4i)/(2i) = 2 - 1.5i; energy from raw Y = 25
        assert!((f.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((f.get(0, 3) + 1.5).abs() < 1e-15);
        assert_eq!(f.get(0, 6), 25.0);
    }
}
