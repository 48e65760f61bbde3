//! Monte-Carlo BER sweeps, runtime benchmarks, training datasets and the
//! command-line front end.

mod bench;
pub mod cli;
mod dataset;
mod sweep;

pub use bench::{bench_runtime, write_bench_csv, BenchConfig, RuntimeRow};
pub use dataset::{
    gen_dataset, read_dataset, write_dataset, Dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use sweep::{
    build_detector, parse_snr_list, run_ber_sweep, write_csv, BerRecord, DetectorKind, SweepConfig,
    CSV_HEADER,
};

use crate::constellation::SystemConfig;
use crate::transd3d::NetDims;
use crate::{Error, Result};

/// System and network sizes of the two evaluated scenarios.
pub fn scenario(id: u8) -> Result<(SystemConfig, NetDims)> {
    let system = match id {
        1 => SystemConfig::scenario1(),
        2 => SystemConfig::scenario2(),
        other => {
            return Err(Error::Usage(format!(
                "unknown scenario {other} (expected 1 or 2)"
            )))
        }
    };
    Ok((system, NetDims::default_for(system)))
}
