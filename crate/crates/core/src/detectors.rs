//! Classical detectors: exhaustive maximum likelihood and the
//! per-subcarrier log-likelihood-ratio detector.

use crate::constellation::{argmin, Mode, SubblockBits, System, DIMS};
use crate::cplx::Cplx;
use crate::phy::{Channel, RxBlock};
use crate::Result;

/// Anything that turns a received block plus perfect CSI into bits.
pub trait Detector: Sync {
    fn name(&self) -> &'static str;

    fn detect(&self, rx: &RxBlock, channel: &Channel, n0: f64) -> SubblockBits;

    fn detect_batch(&self, blocks: &[(&RxBlock, &Channel)], n0: f64) -> Vec<SubblockBits> {
        blocks
            .iter()
            .map(|(rx, ch)| self.detect(rx, ch, n0))
            .collect()
    }
}

/// All `2^p` subblocks with their transmit matrices, in bit-lexicographic
/// order. Transmit matrices are stored back to back.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    block_len: usize,
    bits: Vec<SubblockBits>,
    points: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self, index: usize) -> &SubblockBits {
        &self.bits[index]
    }

    /// Row-major 3×n transmit matrix of candidate `index`.
    pub fn tx(&self, index: usize) -> &[f64] {
        &self.points[index * self.block_len..(index + 1) * self.block_len]
    }
}

pub fn enumerate_candidates(system: &System) -> Result<CandidateSet> {
    let all = system.enumerate()?;
    let block_len = DIMS * system.config.n;
    let mut points = Vec::with_capacity(all.len() * block_len);
    let mut bits = Vec::with_capacity(all.len());
    for (b, tx) in all {
        points.extend_from_slice(&tx.data);
        bits.push(b);
    }
    Ok(CandidateSet {
        block_len,
        bits,
        points,
    })
}

/// `Σ |Y − H ⊙ X|²` over all entries.
#[inline]
pub fn ml_metric(rx: &RxBlock, channel: &Channel, tx: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((y, h), &x) in rx.y.iter().zip(&channel.h).zip(tx) {
        let dr = y.re - h.re * x;
        let di = y.im - h.im * x;
        acc += dr * dr + di * di;
    }
    acc
}

/// Index of the best candidate and its metric. Ties go to the lowest
/// enumeration index.
pub fn ml_search(rx: &RxBlock, channel: &Channel, candidates: &CandidateSet) -> (usize, f64) {
    argmin((0..candidates.len()).map(|i| ml_metric(rx, channel, candidates.tx(i))))
}

#[derive(Debug, Clone)]
pub struct MlDetector {
    candidates: CandidateSet,
}

impl MlDetector {
    pub fn new(system: &System) -> Result<Self> {
        Ok(MlDetector {
            candidates: enumerate_candidates(system)?,
        })
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }
}

impl Detector for MlDetector {
    fn name(&self) -> &'static str {
        "ml"
    }

    fn detect(&self, rx: &RxBlock, channel: &Channel, _n0: f64) -> SubblockBits {
        let (best, _) = ml_search(rx, channel, &self.candidates);
        self.candidates.bits(best).clone()
    }
}

/// `ln Σ exp(v)` with the maximum factored out.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ exp(c·v)` without materialising the scaled values.
fn log_sum_exp_scaled(values: &[f64], c: f64) -> f64 {
    let max = values
        .iter()
        .map(|v| c * v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (c * v - max).exp()).sum::<f64>().ln()
}

/// Squared distances from every subcarrier to every point of both
/// constellations, row `pos` holding the `s_A` mode-A then `s_B` mode-B
/// distances.
fn distance_table(rx: &RxBlock, channel: &Channel, system: &System) -> Vec<f64> {
    let points: Vec<&[f64; 3]> = system.a.points.iter().chain(&system.b.points).collect();
    let mut table = Vec::with_capacity(rx.n * points.len());
    for pos in 0..rx.n {
        let y: [Cplx; 3] = std::array::from_fn(|dim| rx.get(dim, pos));
        let h: [Cplx; 3] = std::array::from_fn(|dim| channel.get(dim, pos));
        table.extend(points.iter().map(|p| {
            (0..3)
                .map(|dim| (y[dim] - h[dim].scale(p[dim])).norm_sqr())
                .sum::<f64>()
        }));
    }
    table
}

fn llr_from_table(table: &[f64], s_a: usize, width: usize, n0: f64) -> Vec<f64> {
    table
        .chunks(width)
        .map(|row| {
            let (a, b) = row.split_at(s_a);
            log_sum_exp_scaled(a, -1.0 / n0) - log_sum_exp_scaled(b, -1.0 / n0)
        })
        .collect()
}

/// Per-subcarrier log ratio of the mode-A and mode-B likelihoods under
/// equal priors. Positive values favour mode A.
pub fn llr_metric(rx: &RxBlock, channel: &Channel, n0: f64, system: &System) -> Vec<f64> {
    let width = system.a.len() + system.b.len();
    llr_from_table(
        &distance_table(rx, channel, system),
        system.a.len(),
        width,
        n0,
    )
}

/// Lookup entry whose mode-A positions have the largest total score.
/// Ties go to the lowest entry.
pub fn best_pattern(system: &System, score: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, pattern) in system.lookup.patterns().iter().enumerate() {
        let s: f64 = pattern.iter().map(|&pos| score[pos]).sum();
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

#[derive(Debug, Clone)]
pub struct LlrDetector {
    system: System,
}

impl LlrDetector {
    pub fn new(system: &System) -> Self {
        LlrDetector {
            system: system.clone(),
        }
    }

    /// Chosen lookup entry and per-subcarrier symbol indices.
    pub fn decide(&self, rx: &RxBlock, channel: &Channel, n0: f64) -> (usize, Vec<usize>) {
        let s_a = self.system.a.len();
        let width = s_a + self.system.b.len();
        let table = distance_table(rx, channel, &self.system);
        let llr = llr_from_table(&table, s_a, width, n0);
        let pattern = best_pattern(&self.system, &llr);
        let modes = self.system.lookup.modes(pattern);
        let symbols = modes
            .iter()
            .zip(table.chunks(width))
            .map(|(mode, row)| {
                let d = if *mode == Mode::A {
                    &row[..s_a]
                } else {
                    &row[s_a..]
                };
                argmin(d.iter().copied()).0
            })
            .collect();
        (pattern, symbols)
    }
}

impl Detector for LlrDetector {
    fn name(&self) -> &'static str {
        "llr"
    }

    fn detect(&self, rx: &RxBlock, channel: &Channel, n0: f64) -> SubblockBits {
        let (pattern, symbols) = self.decide(rx, channel, n0);
        self.system.bits_of(pattern, &symbols)
    }
}
