//! Experiment harness: one subcommand per experiment family, TOML configs
//! with named presets, CSV outputs.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{ep, fwd, probe, ratio, rmt, spectrum, train, transfer};
use config::{resolve, Experiment, Overrides};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "pclab", version, about = "Predictive-coding network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config; keys override the preset, flags override the file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset to start from.
    #[arg(long)]
    pub preset: Option<String>,
    /// Base seed of every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the CSVs and the config sidecar.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Dataset directory.
    #[arg(long, env = data::DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the presets of this subcommand and exit.
    #[arg(long)]
    pub list_presets: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Condition number of the activity Hessian at initialisation.
    SpectrumInit(CommonArgs),
    /// Eigenvalues of the Hessian and of its diagonal/off-diagonal split.
    RmtSpectra(CommonArgs),
    /// Train networks and log loss, accuracy and conditioning.
    Train(CommonArgs),
    /// Minimum training loss over learning-rate grids.
    TransferGrid(CommonArgs),
    /// Loss over equilibrated energy of linear networks.
    Ratio(CommonArgs),
    /// GD inference trajectories against the analytic equilibrium.
    InferenceProbe(CommonArgs),
    /// Forward-pass activity norms across depth.
    FwdStability(CommonArgs),
    /// Spectra of the equilibrium-propagation Hessian.
    EpSpectrum(CommonArgs),
}

/// `(file, header)` of every CSV the tool writes.
pub fn csv_schemas() -> Vec<(&'static str, &'static [&'static str])> {
    vec![
        (spectrum::FILE, spectrum::HEADER),
        (rmt::FILE, rmt::HEADER),
        (train::FILE, train::HEADER),
        (train::SUMMARY_FILE, train::SUMMARY_HEADER),
        (transfer::FILE, transfer::HEADER),
        (transfer::RUNS_FILE, transfer::RUNS_HEADER),
        (ratio::FILE, ratio::HEADER),
        (probe::FILE, probe::HEADER),
        (fwd::FILE, fwd::HEADER),
        (ep::FILE, ep::HEADER),
    ]
}

/// Resolves the config, runs, and writes CSVs plus the sidecar. Returns
/// the written paths.
pub fn execute<T: Experiment>(args: &CommonArgs) -> CliResult<Vec<PathBuf>> {
    if args.list_presets {
        for (name, text) in T::presets() {
            println!("# {name}\n{text}");
        }
        return Ok(Vec::new());
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // Only the first pool of the process wins; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let text = match &args.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let ov = Overrides {
        preset: args.preset.clone(),
        seed: args.seed,
        data_root: args.data_root.clone(),
    };
    let resolved = resolve::<T>(text.as_deref(), &ov)?;
    let tables = resolved.config.run()?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let mut paths = Vec::new();
    for t in &tables {
        paths.push(t.write(&args.out)?);
    }
    paths.push(output::write_sidecar(
        &args.out,
        T::NAME,
        resolved.preset.as_deref(),
        &resolved.to_toml()?,
    )?);
    resolved.config.check_outcome(&tables)?;
    Ok(paths)
}

pub fn dispatch(cmd: &Command) -> CliResult<Vec<PathBuf>> {
    match cmd {
        Command::SpectrumInit(a) => execute::<spectrum::SpectrumInitConfig>(a),
        Command::RmtSpectra(a) => execute::<rmt::RmtSpectraConfig>(a),
        Command::Train(a) => execute::<train::TrainCmdConfig>(a),
        Command::TransferGrid(a) => execute::<transfer::TransferConfig>(a),
        Command::Ratio(a) => execute::<ratio::RatioConfig>(a),
        Command::InferenceProbe(a) => execute::<probe::ProbeConfig>(a),
        Command::FwdStability(a) => execute::<fwd::FwdConfig>(a),
        Command::EpSpectrum(a) => execute::<ep::EpConfig>(a),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("pclab: {e}");
            e.exit_code()
        }
    }
}
