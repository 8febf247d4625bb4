use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};

use peer_select::harness::{
    emit_gain_data, run_sweep, run_sweep_to, selection_frequencies, write_csv, write_gain_csv,
    ExperimentConfig, RunSettings,
};
use peer_select::mechanisms::Mechanism;
use peer_select::metrics::gain_curve;
use peer_select::twostage::TwoStageParams;
use peer_select::{Error, Result};

/// Seeded peer-selection simulations.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// JSON sweep configuration.
    #[arg(long, value_name = "PATH", required_unless_present = "gain")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Trials per cell, overriding the config.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// Output CSV; stdout when neither this nor the config names one.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads (1 runs serially).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Emit the per-agent gain from config A to config B. Each must describe
    /// a single cell and mechanism.
    #[arg(long, num_args = 2, value_names = ["A_CONFIG", "B_CONFIG"], conflicts_with = "config")]
    gain: Option<Vec<PathBuf>>,

    /// Check the configuration(s) and exit.
    #[arg(long)]
    validate_only: bool,
}

fn load(path: &PathBuf, cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    let cells = cfg.cells()?;
    info!("{}: {} cells x {} mechanisms", path.display(), cells.len(), cfg.mechanism_set()?.len());
    Ok(cfg)
}

fn settings(cli: &Cli) -> RunSettings {
    RunSettings { threads: cli.threads, ..RunSettings::default() }
}

fn sweep(cli: &Cli, path: &PathBuf) -> Result<()> {
    let cfg = load(path, cli)?;
    if cli.validate_only {
        return Ok(());
    }
    match cli.out.clone().or_else(|| cfg.out.clone()) {
        Some(out) => {
            let rows = run_sweep_to(&cfg, &out, &settings(cli))?;
            info!("wrote {} rows to {}", rows.len(), out.display());
        }
        None => {
            let rows = run_sweep(&cfg, &settings(cli))?;
            let mut stdout = io::stdout().lock();
            write_csv(&mut stdout, &rows)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn single_cell(path: &PathBuf, cli: &Cli) -> Result<(ExperimentConfig, TwoStageParams, Mechanism)> {
    let cfg = load(path, cli)?;
    let cells = cfg.cells()?;
    let mechs = cfg.mechanism_set()?;
    if cells.len() != 1 || mechs.len() != 1 {
        return Err(Error::Config(format!(
            "{}: gain configs need exactly one cell and one mechanism, found {} and {}",
            path.display(),
            cells.len(),
            mechs.len()
        )));
    }
    Ok((cfg, cells[0], mechs[0]))
}

fn gain(cli: &Cli, a: &PathBuf, b: &PathBuf) -> Result<()> {
    let (cfg_a, cell_a, mech_a) = single_cell(a, cli)?;
    let (cfg_b, cell_b, mech_b) = single_cell(b, cli)?;
    if cell_a.n != cell_b.n {
        return Err(Error::InvalidInput(format!("agent counts differ: {} vs {}", cell_a.n, cell_b.n)));
    }
    if cli.validate_only {
        return Ok(());
    }
    let base = settings(cli);
    let freq = |cfg: &ExperimentConfig, cell, mech| {
        let s = RunSettings { pool_stage1: cfg.pool_stage1, ..base };
        selection_frequencies(&cell, mech, cfg.trials, cfg.seed, &s)
    };
    let fa = freq(&cfg_a, cell_a, mech_a)?;
    let fb = freq(&cfg_b, cell_b, mech_b)?;
    match &cli.out {
        Some(out) => {
            let curve = emit_gain_data(&fa, &fb, out)?;
            info!("peak gain {:.4} at agent {:?}", curve.peak(), curve.argmax());
        }
        None => {
            let mut stdout = io::stdout().lock();
            write_gain_csv(&mut stdout, &gain_curve(&fa, &fb)?)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match (&cli.gain, &cli.config) {
        (Some(paths), _) => gain(&cli, &paths[0], &paths[1]),
        (None, Some(path)) => sweep(&cli, path),
        (None, None) => unreachable!("clap requires --config or --gain"),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
