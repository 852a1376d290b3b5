//! Command-line front end: `train`, `generate`, `eval` and `pid`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 training divergence.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{KeySet, RunConfig, RESOLVED_FILE};

use crate::kvtext::KvText;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Environment variable capping worker threads (0 = one per core).
pub const THREADS_ENV: &str = "PCVAE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pcvae", version, about = "Parallel-concatenated VAE: train, generate, evaluate, and decompose information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train decoders on a dataset or synthetic pairs
    Train(TrainArgs),
    /// Generate images and/or audio from a checkpoint
    Generate(GenerateArgs),
    /// Reconstruction and interaction-information metrics
    Eval(EvalArgs),
    /// Decompose a discrete joint distribution
    Pid(PidArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` settings file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest, or a directory holding manifest.txt
    #[arg(long)]
    pub data: Option<String>,
    /// Train on this many synthetic pairs instead of a dataset
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Held-out synthetic pairs generated after the training ones
    #[arg(long)]
    pub synthetic_val: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// desk, desk-visual, desk-audio, paper, paper-visual or paper-audio
    #[arg(long)]
    pub preset: Option<String>,
    /// joint, audio-only or visual-only
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bank_seed: Option<u64>,
    /// gaussian or off
    #[arg(long = "ii")]
    pub ii_backend: Option<String>,
    #[arg(long)]
    pub ii_weight: Option<f64>,
    #[arg(long)]
    pub recon_weight: Option<f64>,
    #[arg(long)]
    pub projection_dim: Option<usize>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub projection_seed: Option<u64>,
    /// batch, dataset or zero
    #[arg(long)]
    pub sigma_scope: Option<String>,
    #[arg(long)]
    pub plugin_bins: Option<usize>,
    /// Write sample reconstructions every N epochs (0 = final epoch only)
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Continue from a checkpoint for `--epochs` more epochs
    #[arg(long)]
    pub resume: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    /// audio, image or both
    #[arg(long)]
    pub from: Option<String>,
    /// Input PPM/WAV files (repeatable); with `--from both`, images and clips pair up in order
    #[arg(long = "in")]
    pub inputs: Vec<String>,
    /// Outputs per input, each with fresh noise
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub synthetic_val: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// train, val or all
    #[arg(long)]
    pub split: Option<String>,
    /// gaussian (report both II estimates) or off
    #[arg(long = "ii")]
    pub ii: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct PidArgs {
    /// xor, copy or indep
    #[arg(long, conflicts_with = "joint")]
    pub case: Option<String>,
    /// Joint distribution file: a `cards n1 n2 n3` line, then `x1 x2 y p` lines
    #[arg(long)]
    pub joint: Option<PathBuf>,
}

fn set<T: ToString>(kv: &mut KvText, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.set(key, v.to_string());
    }
}

impl TrainArgs {
    fn overrides(&self) -> KvText {
        let mut kv = KvText::new();
        set(&mut kv, "data", &self.data);
        set(&mut kv, "synthetic", &self.synthetic);
        set(&mut kv, "synthetic_val", &self.synthetic_val);
        set(&mut kv, "data_seed", &self.data_seed);
        set(&mut kv, "preset", &self.preset);
        set(&mut kv, "mode", &self.mode);
        set(&mut kv, "latent", &self.latent);
        set(&mut kv, "epochs", &self.epochs);
        set(&mut kv, "batch_size", &self.batch_size);
        set(&mut kv, "learning_rate", &self.learning_rate);
        set(&mut kv, "seed", &self.seed);
        set(&mut kv, "bank_seed", &self.bank_seed);
        set(&mut kv, "ii_backend", &self.ii_backend);
        set(&mut kv, "ii_weight", &self.ii_weight);
        set(&mut kv, "recon_weight", &self.recon_weight);
        set(&mut kv, "projection_dim", &self.projection_dim);
        set(&mut kv, "ridge", &self.ridge);
        set(&mut kv, "projection_seed", &self.projection_seed);
        set(&mut kv, "sigma_scope", &self.sigma_scope);
        set(&mut kv, "plugin_bins", &self.plugin_bins);
        set(&mut kv, "sample_every", &self.sample_every);
        set(&mut kv, "resume", &self.resume);
        set(&mut kv, "out", &self.out);
        kv
    }
}

impl GenerateArgs {
    fn overrides(&self) -> KvText {
        let mut kv = KvText::new();
        set(&mut kv, "checkpoint", &self.checkpoint);
        set(&mut kv, "from", &self.from);
        if !self.inputs.is_empty() {
            kv.set("inputs", self.inputs.join(","));
        }
        set(&mut kv, "count", &self.count);
        set(&mut kv, "seed", &self.seed);
        set(&mut kv, "out", &self.out);
        kv
    }
}

impl EvalArgs {
    fn overrides(&self) -> KvText {
        let mut kv = KvText::new();
        set(&mut kv, "checkpoint", &self.checkpoint);
        set(&mut kv, "data", &self.data);
        set(&mut kv, "synthetic", &self.synthetic);
        set(&mut kv, "synthetic_val", &self.synthetic_val);
        set(&mut kv, "data_seed", &self.data_seed);
        set(&mut kv, "split", &self.split);
        set(&mut kv, "ii", &self.ii);
        set(&mut kv, "seed", &self.seed);
        set(&mut kv, "out", &self.out);
        kv
    }
}

/// Maps an error to the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> crate::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let Ok(n) = raw.trim().parse::<usize>() else {
        return Err(Error::Usage(format!("{THREADS_ENV} must be a nonnegative integer, got {raw:?}")));
    };
    #[cfg(feature = "parallel")]
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Runs one command line and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Train(a) => commands::train(a.config.as_deref(), &a.overrides()),
        Command::Generate(a) => commands::generate(a.config.as_deref(), &a.overrides()),
        Command::Eval(a) => commands::eval(a.config.as_deref(), &a.overrides()),
        Command::Pid(a) => commands::pid(a.case.as_deref(), a.joint.as_deref()),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
