//! Simulated training sets on disk.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TD3DSET"  u32 version
//! u32 n, k, s_A, s_B
//! u64 record count
//! per record: n·9 f64 features (row-major), then n·(s+1) u8 labels
//! ```

use std::fs;
use std::path::Path;

use crate::constellation::{System, SystemConfig};
use crate::ndiff::Tensor2D;
use crate::phy::{simulate_block, snr_to_n0, write_features, FEATURES};
use crate::seed::{stream_rng, DOMAIN_DATASET};
use crate::transd3d::one_hot;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 7] = b"TD3DSET";
pub const DATASET_VERSION: u32 = 1;

/// Features and labels of `len()` blocks stacked row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemConfig,
    pub features: Tensor2D,
    pub labels: Tensor2D,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows() / self.system.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Features and labels of record `i`.
    pub fn record(&self, i: usize) -> (Tensor2D, Tensor2D) {
        let n = self.system.n;
        (
            self.features.row_block(i * n, n),
            self.labels.row_block(i * n, n),
        )
    }
}

/// Simulates `count` blocks at `snr_db`; record `i` uses its own stream.
pub fn gen_dataset(system: &System, count: usize, snr_db: f64, seed: u64) -> Dataset {
    let cfg = system.config;
    let width = cfg.s_a + 1;
    let n0 = snr_to_n0(snr_db);
    let mut features = Tensor2D::zeros(count * cfg.n, FEATURES);
    let mut labels = Vec::with_capacity(count * cfg.n * width);
    for i in 0..count {
        let tr = simulate_block(system, n0, &mut stream_rng(seed, DOMAIN_DATASET, i as u64));
        let f = &mut features.data_mut()[i * cfg.n * FEATURES..(i + 1) * cfg.n * FEATURES];
        write_features(&tr.rx, &tr.channel, f).expect("shapes agree");
        let syms = system.symbols_of(&tr.bits).expect("valid bits");
        labels.extend_from_slice(one_hot(&syms, &cfg).data());
    }
    Dataset {
        system: cfg,
        features,
        labels: Tensor2D::from_vec(count * cfg.n, width, labels).expect("label count"),
    }
}

pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let cfg = &data.system;
    let mut out = Vec::with_capacity(
        7 + 4 * 5 + 8 + data.features.data().len() * 8 + data.labels.data().len(),
    );
    out.extend_from_slice(DATASET_MAGIC);
    for v in [
        DATASET_VERSION,
        cfg.n as u32,
        cfg.k as u32,
        cfg.s_a as u32,
        cfg.s_b as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    let fw = cfg.n * FEATURES;
    let lw = cfg.n * (cfg.s_a + 1);
    for i in 0..data.len() {
        for v in &data.features.data()[i * fw..(i + 1) * fw] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(
            data.labels.data()[i * lw..(i + 1) * lw]
                .iter()
                .map(|&v| v as u8),
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut buf = bytes.as_slice();
    let mut take = |len: usize, what: &str| -> Result<&[u8]> {
        if buf.len() < len {
            return Err(Error::Truncated(what.to_string()));
        }
        let (head, tail) = buf.split_at(len);
        buf = tail;
        Ok(head)
    };
    if take(7, "magic")? != DATASET_MAGIC {
        return Err(Error::BadMagic("dataset file"));
    }
    let mut ints = [0u32; 5];
    for v in &mut ints {
        *v = u32::from_le_bytes(take(4, "header")?.try_into().unwrap());
    }
    if ints[0] != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            found: ints[0],
            expected: DATASET_VERSION,
        });
    }
    let [_, n, k, s_a, s_b] = ints.map(|v| v as usize);
    let cfg = SystemConfig::new(n, k, s_a, s_b)?;
    let count = u64::from_le_bytes(take(8, "record count")?.try_into().unwrap()) as usize;
    let width = s_a + 1;
    let mut features = Vec::with_capacity(count.min(1 << 20) * n * FEATURES);
    let mut labels = Vec::with_capacity(count.min(1 << 20) * n * width);
    for i in 0..count {
        let what = format!("record {i}");
        features.extend(
            take(n * FEATURES * 8, &what)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
        );
        labels.extend(take(n * width, &what)?.iter().map(|&b| b as f64));
    }
    if !buf.is_empty() {
        return Err(Error::Truncated(format!("{} trailing bytes", buf.len())));
    }
    Ok(Dataset {
        system: cfg,
        features: Tensor2D::from_vec(count * n, FEATURES, features)?,
        labels: Tensor2D::from_vec(count * n, width, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transd3d::make_batch;

    #[test]
    fn round_trip() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let data = gen_dataset(&sys, 25, 12.0, 3);
        assert_eq!(data.len(), 25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&data, &path).unwrap();
        let len = fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, 7 + 20 + 8 + 25 * (4 * 9 * 8 + 4 * 5));
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn records_match_training_batches() {
        let sys = System::new(SystemConfig::scenario1()).unwrap();
        let data = gen_dataset(&sys, 5, 15.0, 9);
        for i in 0..5 {
            let mut rng = stream_rng(9, DOMAIN_DATASET, i as u64);
            let b = make_batch(&sys, snr_to_n0(15.0), 1, &mut rng);
            assert_eq!(data.record(i), (b.features, b.labels));
        }
    }

    #[test]
    fn corrupt_files() {
        let sys = System::new(SystemConfig::scenario1()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&gen_dataset(&sys, 3, 10.0, 1), &path).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'x';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::BadMagic(_))));

        let mut bad = good.clone();
        bad[7] = 2;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(Error::VersionMismatch { found: 2, .. })
        ));

        fs::write(&path, &good[..good.len() - 1]).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Truncated(_))));

        assert!(matches!(
            read_dataset(dir.path().join("none")),
            Err(Error::Io { .. })
        ));
    }
}
