use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use crate::constellation::{System, SystemConfig};
use crate::detectors::{Detector, LlrDetector, MlDetector};
use crate::phy::{simulate_block, snr_to_n0, Transmission};
use crate::seed::{stream_rng, DOMAIN_BENCH};
use crate::transd3d::{NetOptions, NetworkParams, TransDetector};
use crate::Result;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub system: SystemConfig,
    pub blocks: usize,
    pub snr_db: f64,
    pub seed: u64,
    /// Repetitions of the full batch for the batched timing.
    pub batch_reps: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            system: SystemConfig::scenario2(),
            blocks: 1000,
            snr_db: 15.0,
            seed: 0,
            batch_reps: 9,
            warmup: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    /// `ml`, `llr`, `trans-single` or `trans-batched`.
    pub label: &'static str,
    pub median_ns_per_block: f64,
    pub samples: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn time_single(det: &dyn Detector, blocks: &[Transmission], n0: f64, warmup: usize) -> Vec<f64> {
    for t in blocks.iter().cycle().take(warmup) {
        black_box(det.detect(&t.rx, &t.channel, n0));
    }
    blocks
        .iter()
        .map(|t| {
            let start = Instant::now();
            black_box(det.detect(black_box(&t.rx), black_box(&t.channel), n0));
            start.elapsed().as_nanos() as f64
        })
        .collect()
}

/// Median single-threaded detection time per block. The network rows are
/// present only when `params` is given; untrained weights time the same.
pub fn bench_runtime(
    cfg: &BenchConfig,
    params: Option<NetworkParams>,
    options: NetOptions,
) -> Result<Vec<RuntimeRow>> {
    let system = System::new(cfg.system)?;
    let n0 = snr_to_n0(cfg.snr_db);
    let blocks: Vec<Transmission> = (0..cfg.blocks)
        .map(|i| {
            simulate_block(
                &system,
                n0,
                &mut stream_rng(cfg.seed, DOMAIN_BENCH, i as u64),
            )
        })
        .collect();
    let ml = MlDetector::new(&system)?;
    let llr = LlrDetector::new(&system);

    let mut rows = Vec::new();
    for (label, det) in [("ml", &ml as &dyn Detector), ("llr", &llr)] {
        let samples = time_single(det, &blocks, n0, cfg.warmup);
        rows.push(RuntimeRow {
            label,
            median_ns_per_block: median(samples),
            samples: cfg.blocks,
        });
    }
    if let Some(params) = params {
        let trans = TransDetector::new(&system, params, options)?;
        let samples = time_single(&trans, &blocks, n0, cfg.warmup);
        rows.push(RuntimeRow {
            label: "trans-single",
            median_ns_per_block: median(samples),
            samples: cfg.blocks,
        });
        let refs: Vec<_> = blocks.iter().map(|t| (&t.rx, &t.channel)).collect();
        black_box(trans.detect_batch(&refs, n0));
        let reps = cfg.batch_reps.max(1);
        let per_block = (0..reps)
            .map(|_| {
                let start = Instant::now();
                black_box(trans.detect_batch(black_box(&refs), n0));
                start.elapsed().as_nanos() as f64 / cfg.blocks as f64
            })
            .collect();
        rows.push(RuntimeRow {
            label: "trans-batched",
            median_ns_per_block: median(per_block),
            samples: reps,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[RuntimeRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "detector,median_ns_per_block,samples")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.1},{}",
            r.label, r.median_ns_per_block, r.samples
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transd3d::{initial_params, NetDims};

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn rows_present() {
        let cfg = BenchConfig {
            system: SystemConfig::scenario1(),
            blocks: 20,
            batch_reps: 2,
            warmup: 5,
            ..BenchConfig::default()
        };
        let rows = bench_runtime(&cfg, None, NetOptions::default()).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.label).collect::<Vec<_>>(),
            ["ml", "llr"]
        );
        let p = initial_params(0, NetDims::default_for(cfg.system));
        let rows = bench_runtime(&cfg, Some(p), NetOptions::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.median_ns_per_block > 0.0));
    }
}
