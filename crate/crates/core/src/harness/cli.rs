//! `dmim3d` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    bench_runtime, gen_dataset, parse_snr_list, run_ber_sweep, scenario, write_bench_csv,
    write_csv, write_dataset, BenchConfig, DetectorKind, SweepConfig,
};
use crate::constellation::{System, SystemConfig};
use crate::transd3d::{
    initial_params, load_params, save_params, train, NetDims, NetOptions, TrainConfig,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "dmim3d",
    version,
    about = "Dual-mode index modulation over 3-D constellations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo BER against SNR, written as CSV.
    Sweep(SweepArgs),
    /// Train the transformer detector and save its weights.
    Train(TrainArgs),
    /// Median per-block detection time.
    Bench(BenchArgs),
    /// Write a simulated training set.
    GenDataset(DatasetArgs),
    /// BER sweep of a weights file against the classical detectors.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// 1: (n,k,s) = (4,2,2); 2: (4,2,4).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    scenario: u8,
    /// Explicit `n,k,sA,sB`, overriding --scenario.
    #[arg(long, value_parser = parse_system)]
    system: Option<SystemConfig>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Add skip connections around the sublayers.
    #[arg(long)]
    residual: bool,
    /// Scale attention scores by 1/sqrt(d_head).
    #[arg(long)]
    scaled_attention: bool,
}

impl NetArgs {
    fn options(&self) -> NetOptions {
        NetOptions {
            scaled_attention: self.scaled_attention,
            residual: self.residual,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    net: NetArgs,
    /// `start:step:stop` or a comma-separated list, in dB.
    #[arg(long, default_value = "0:5:30")]
    snr_list: String,
    #[arg(long, default_value_t = 10_000)]
    blocks: usize,
    #[arg(long, value_delimiter = ',', default_value = "ml,llr")]
    detectors: Vec<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Fill the ns_per_block column (makes output machine dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 600)]
    batches: usize,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Training SNR in dB.
    #[arg(long, default_value_t = 15.0)]
    train_snr: f64,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    d_mlp: Option<usize>,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long)]
    weights_out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 1000)]
    blocks: usize,
    #[arg(long, default_value_t = 15.0)]
    snr: f64,
    /// Weights for the network rows; freshly initialised ones otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 15.0)]
    train_snr: f64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value = "0:5:30")]
    snr_list: String,
    #[arg(long, default_value_t = 10_000)]
    blocks: usize,
    #[arg(long, value_delimiter = ',', default_value = "ml,llr,trans")]
    detectors: Vec<String>,
}

fn parse_system(s: &str) -> std::result::Result<SystemConfig, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let [n, k, s_a, s_b] = v[..] else {
        return Err("expected n,k,sA,sB".into());
    };
    SystemConfig::new(n, k, s_a, s_b).map_err(|e| e.to_string())
}

impl Common {
    fn system(&self) -> Result<SystemConfig> {
        match self.system {
            Some(s) => Ok(s),
            None => scenario(self.scenario).map(|(s, _)| s),
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| Error::io(p, e))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn out_name(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("<stdout>"))
    }
}

fn detectors(names: &[String]) -> Result<Vec<DetectorKind>> {
    names.iter().map(|s| s.parse()).collect()
}

fn emit(common: &Common, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let mut w = common.writer()?;
    f(&mut *w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(common.out_name(), e))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        system: a.common.system()?,
        snrs_db: parse_snr_list(&a.snr_list)?,
        blocks: a.blocks,
        detectors: detectors(&a.detectors)?,
        seed: a.common.seed,
        weights: a.weights,
        options: a.net.options(),
    };
    let records = run_ber_sweep(&cfg)?;
    emit(&a.common, |w| write_csv(&records, a.timing, w))
}

fn eval(a: EvalArgs) -> Result<()> {
    let params = load_params(&a.weights)?;
    let system = params.dims.system;
    if let Some(s) = a.common.system {
        if s != system {
            return Err(Error::InvalidConfig(format!(
                "--system {s:?} disagrees with the weights file ({system:?})"
            )));
        }
    }
    let cfg = SweepConfig {
        system,
        snrs_db: parse_snr_list(&a.snr_list)?,
        blocks: a.blocks,
        detectors: detectors(&a.detectors)?,
        seed: a.common.seed,
        weights: Some(a.weights),
        options: a.net.options(),
    };
    let records = run_ber_sweep(&cfg)?;
    emit(&a.common, |w| write_csv(&records, false, w))
}

fn net_dims(
    system: SystemConfig,
    d_model: Option<usize>,
    d_mlp: Option<usize>,
    heads: usize,
) -> Result<NetDims> {
    let base = NetDims::default_for(system);
    NetDims::new(
        system,
        d_model.unwrap_or(base.d_model),
        heads,
        d_mlp.unwrap_or(base.d_mlp),
    )
}

fn run_train(a: TrainArgs) -> Result<()> {
    let config = a.common.system()?;
    let system = System::new(config)?;
    let dims = net_dims(config, a.d_model, a.d_mlp, a.heads)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batches_per_epoch: a.batches,
        batch_size: a.batch_size,
        lr: a.lr,
        train_snr_db: a.train_snr,
        seed: a.common.seed,
    };
    let outcome = train(&tc, &system, dims, a.net.options(), |epoch, loss| {
        eprintln!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    })?;
    save_params(&outcome.params, &a.weights_out)?;
    emit(&a.common, |w| {
        writeln!(w, "epoch,loss")?;
        for (i, l) in outcome.epoch_losses.iter().enumerate() {
            writeln!(w, "{},{l:.8}", i + 1)?;
        }
        Ok(())
    })
}

fn bench(a: BenchArgs) -> Result<()> {
    let system = a.common.system()?;
    let params = match &a.weights {
        Some(p) => load_params(p)?,
        None => initial_params(a.common.seed, NetDims::default_for(system)),
    };
    let cfg = BenchConfig {
        system,
        blocks: a.blocks,
        snr_db: a.snr,
        seed: a.common.seed,
        ..BenchConfig::default()
    };
    if cfg.blocks == 0 {
        return Err(Error::Usage("blocks must be at least 1".into()));
    }
    let rows = bench_runtime(&cfg, Some(params), a.net.options())?;
    emit(&a.common, |w| write_bench_csv(&rows, w))
}

fn dataset(a: DatasetArgs) -> Result<()> {
    let system = System::new(a.common.system()?)?;
    let out = a
        .common
        .out
        .as_deref()
        .ok_or_else(|| Error::Usage("gen-dataset needs --out".into()))?;
    let data = gen_dataset(&system, a.count, a.train_snr, a.common.seed);
    write_dataset(&data, Path::new(out))
}

/// Runs the command line; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Train(a) => run_train(a),
        Command::Bench(a) => bench(a),
        Command::GenDataset(a) => dataset(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
