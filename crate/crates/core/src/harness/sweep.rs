use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::constellation::{System, SystemConfig};
use crate::detectors::{Detector, LlrDetector, MlDetector};
use crate::phy::{simulate_block, snr_to_n0, Transmission};
use crate::seed::{stream_rng, sweep_domain};
use crate::transd3d::{load_params, NetOptions, TransDetector};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "detector,snr_db,blocks,bit_errors,ber,stderr,ns_per_block";

/// Trials handed to a detector at once.
const CHUNK: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Ml,
    Llr,
    Trans,
}

impl DetectorKind {
    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Llr => "llr",
            DetectorKind::Trans => "trans",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(DetectorKind::Ml),
            "llr" => Ok(DetectorKind::Llr),
            "trans" | "transd3d" => Ok(DetectorKind::Trans),
            other => Err(Error::UnknownDetector(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub snrs_db: Vec<f64>,
    pub blocks: usize,
    pub detectors: Vec<DetectorKind>,
    pub seed: u64,
    pub weights: Option<PathBuf>,
    pub options: NetOptions,
}

/// One (detector, SNR) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub blocks: usize,
    pub bits_per_block: usize,
    pub bit_errors: u64,
    /// Time spent inside the detector, summed over all blocks.
    pub elapsed_ns: u128,
}

impl BerRecord {
    pub fn bits(&self) -> u64 {
        (self.blocks * self.bits_per_block) as u64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits() as f64
    }

    /// Binomial standard error of [`BerRecord::ber`].
    pub fn stderr(&self) -> f64 {
        let p = self.ber();
        (p * (1.0 - p) / self.bits() as f64).sqrt()
    }

    pub fn ns_per_block(&self) -> f64 {
        self.elapsed_ns as f64 / self.blocks as f64
    }
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("invalid SNR list '{s}'"));
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(bad)
    };
    let parts: Vec<&str> = s.split(':').collect();
    let list = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if list.is_empty() {
        return Err(bad());
    }
    Ok(list)
}

pub fn build_detector(
    kind: DetectorKind,
    system: &System,
    weights: Option<&PathBuf>,
    options: NetOptions,
) -> Result<Box<dyn Detector>> {
    Ok(match kind {
        DetectorKind::Ml => Box::new(MlDetector::new(system)?),
        DetectorKind::Llr => Box::new(LlrDetector::new(system)),
        DetectorKind::Trans => {
            let path = weights.ok_or(Error::MissingWeights)?;
            Box::new(TransDetector::new(system, load_params(path)?, options)?)
        }
    })
}

fn simulate_chunk(
    system: &System,
    seed: u64,
    snr_db: f64,
    range: std::ops::Range<usize>,
) -> Vec<Transmission> {
    let n0 = snr_to_n0(snr_db);
    range
        .map(|trial| {
            simulate_block(
                system,
                n0,
                &mut stream_rng(seed, sweep_domain(snr_db), trial as u64),
            )
        })
        .collect()
}

/// BER of every selected detector at every SNR. Records are ordered by
/// detector, then SNR. Trial `t` at a given SNR uses the same random stream
/// for every detector.
pub fn run_ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>> {
    if cfg.blocks == 0 {
        return Err(Error::Usage("blocks must be at least 1".into()));
    }
    if let Some(bad) = cfg.snrs_db.iter().find(|v| !v.is_finite()) {
        return Err(Error::Usage(format!("SNR {bad} is not finite")));
    }
    let system = System::new(cfg.system)?;
    let detectors = cfg
        .detectors
        .iter()
        .map(|&k| build_detector(k, &system, cfg.weights.as_ref(), cfg.options).map(|d| (k, d)))
        .collect::<Result<Vec<_>>>()?;

    let chunks: Vec<_> = (0..cfg.blocks)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(cfg.blocks))
        .collect();
    let mut records = Vec::with_capacity(detectors.len() * cfg.snrs_db.len());
    for (kind, det) in &detectors {
        for &snr_db in &cfg.snrs_db {
            let n0 = snr_to_n0(snr_db);
            let (bit_errors, elapsed_ns) = chunks
                .par_iter()
                .map(|range| {
                    let trs = simulate_chunk(&system, cfg.seed, snr_db, range.clone());
                    let blocks: Vec<_> = trs.iter().map(|t| (&t.rx, &t.channel)).collect();
                    let start = Instant::now();
                    let decided = det.detect_batch(&blocks, n0);
                    let ns = start.elapsed().as_nanos().max(1);
                    let errors: u64 = decided
                        .iter()
                        .zip(&trs)
                        .map(|(d, t)| d.bit_errors(&t.bits) as u64)
                        .sum();
                    (errors, ns)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            records.push(BerRecord {
                detector: *kind,
                snr_db,
                blocks: cfg.blocks,
                bits_per_block: cfg.system.p,
                bit_errors,
                elapsed_ns,
            });
        }
    }
    Ok(records)
}

/// Writes the sweep table. Wall-clock time is not reproducible, so the
/// `ns_per_block` column is left empty unless `timing` is set.
pub fn write_csv(records: &[BerRecord], timing: bool, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let ns = if timing {
            format!("{:.1}", r.ns_per_block())
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{},{},{},{:.6e},{:.6e},{}",
            r.detector,
            r.snr_db,
            r.blocks,
            r.bit_errors,
            r.ber(),
            r.stderr(),
            ns
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(detectors: Vec<DetectorKind>, snrs: Vec<f64>, blocks: usize) -> SweepConfig {
        SweepConfig {
            system: SystemConfig::scenario1(),
            snrs_db: snrs,
            blocks,
            detectors,
            seed: 7,
            weights: None,
            options: NetOptions::default(),
        }
    }

    #[test]
    fn snr_lists() {
        assert_eq!(
            parse_snr_list("0:5:30").unwrap(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        );
        assert_eq!(parse_snr_list("0:2.5:5").unwrap(), vec![0.0, 2.5, 5.0]);
        assert_eq!(parse_snr_list("3, 7.5,10").unwrap(), vec![3.0, 7.5, 10.0]);
        assert!(parse_snr_list("0:0:5").is_err());
        assert!(parse_snr_list("a,b").is_err());
        assert!(parse_snr_list("inf").is_err());
        assert!(parse_snr_list("1:2").is_err());
    }

    #[test]
    fn detector_ids() {
        assert_eq!("ML".parse::<DetectorKind>().unwrap(), DetectorKind::Ml);
        assert_eq!(
            "trans".parse::<DetectorKind>().unwrap(),
            DetectorKind::Trans
        );
        assert!(matches!(
            "zf".parse::<DetectorKind>(),
            Err(Error::UnknownDetector(_))
        ));
    }

    #[test]
    fn ml_is_error_free_at_high_snr() {
        let recs = run_ber_sweep(&cfg(vec![DetectorKind::Ml], vec![60.0], 1000)).unwrap();
        assert_eq!(recs[0].bit_errors, 0);
        assert!(recs[0].elapsed_ns > 0);
    }

    #[test]
    fn missing_weights() {
        let r = run_ber_sweep(&cfg(vec![DetectorKind::Trans], vec![10.0], 10));
        assert!(matches!(r, Err(Error::MissingWeights)));
    }

    #[test]
    fn record_layout_and_determinism() {
        let c = cfg(
            vec![DetectorKind::Ml, DetectorKind::Llr],
            vec![0.0, 10.0],
            600,
        );
        let a = run_ber_sweep(&c).unwrap();
        let b = run_ber_sweep(&c).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!((a[1].detector, a[1].snr_db), (DetectorKind::Ml, 10.0));
        assert_eq!((a[2].detector, a[2].snr_db), (DetectorKind::Llr, 0.0));
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_csv(&a, false, &mut csv_a).unwrap();
        write_csv(&b, false, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let text = String::from_utf8(csv_a).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn stats() {
        let r = BerRecord {
            detector: DetectorKind::Ml,
            snr_db: 0.0,
            blocks: 100,
            bits_per_block: 6,
            bit_errors: 60,
            elapsed_ns: 1000,
        };
        assert!((r.ber() - 0.1).abs() < 1e-15);
        assert!((r.stderr() - (0.1f64 * 0.9 / 600.0).sqrt()).abs() < 1e-15);
        assert!(r.stderr() <= (r.ber() / 600.0).sqrt());
        assert_eq!(r.ns_per_block(), 10.0);
    }
}
