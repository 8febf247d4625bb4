//! Seeded parameter sweeps.
//!
//! Within a trial every mechanism sees the same clustering, rankings and
//! tie priorities. Rankings and tie priorities are keyed by
//! `(seed, n, phi, trial)` and clusterings by `(seed, n, c, trial)`, so cells
//! that differ only in review budget or staging are paired as well. Results
//! are aggregated in trial order and never depend on thread count.

mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::assign::make_clusters;
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, TieBreak};
use crate::metrics::{gain_curve, mean_stderr, selection_frequency, GainCurve, MeanStderr, MetricReport};
use crate::noise::sample_profile;
use crate::rng::{Purpose, Streams};
use crate::twostage::{run, RunOptions, Trial, TwoStageParams};

pub use config::{ExperimentConfig, GridValue, DEFAULT_TRIALS};
pub use output::{write_csv, write_gain_csv, CSV_HEADER, GAIN_HEADER};

const KEY_PROFILE: u64 = 0x5052_4f46;
const KEY_CLUSTERS: u64 = 0x434c_5553;
const KEY_CELL: u64 = 0x4345_4c4c;

/// How to run trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSettings {
    /// `Some(1)` runs serially; `None` uses rayon's global pool.
    pub threads: Option<usize>,
    pub pool_stage1: bool,
    /// Keep per-agent selection frequencies in each row.
    pub frequencies: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { threads: None, pool_stage1: true, frequencies: false }
    }
}

impl RunSettings {
    pub fn serial() -> Self {
        RunSettings { threads: Some(1), ..Self::default() }
    }

    fn within_pool<T: Send>(&self, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.threads {
            Some(0) => Err(Error::Config("thread count must be positive".into())),
            Some(t) if t > 1 => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(job),
            _ => job(),
        }
    }

    fn map_trials<T: Send>(&self, trials: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        if self.threads == Some(1) {
            (0..trials).map(f).collect()
        } else {
            (0..trials).into_par_iter().map(f).collect()
        }
    }
}

/// Builds trial `t` of a cell. Clusters are drawn only when `c > 1` or a
/// clustered mechanism is asked for.
pub fn trial_for(params: &TwoStageParams, seed: u64, t: usize) -> Result<Trial> {
    let n = params.n as u64;
    let phi = params.phi.value().to_bits();
    let t = t as u64;
    let profile = Streams::from_parts(&[seed, KEY_PROFILE, n, phi, t]);
    let clusters = Streams::from_parts(&[seed, KEY_CLUSTERS, n, params.c as u64, t]);
    let cell = Streams::from_parts(&[
        seed,
        KEY_CELL,
        n,
        params.k as u64,
        params.m as u64,
        params.f as u64,
        params.h as u64,
        params.l as u64,
        params.c as u64,
        phi,
        t,
    ]);
    let rankings = sample_profile(params.n, params.phi, &mut profile.rng(Purpose::Rankings));
    let ties = TieBreak::random(params.n, &mut profile.rng(Purpose::Ties));
    let clustering = make_clusters(params.n, params.c, &mut clusters.rng(Purpose::Clusters))?;
    Trial::new(&rankings, Some(clustering), ties, cell)
}

/// One mechanism's result in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutcome {
    pub selected: Vec<usize>,
    pub report: MetricReport,
}

/// Every mechanism's result in one trial.
#[derive(Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Fingerprint of the inputs all mechanisms shared.
    pub inputs: u64,
    pub outcomes: Vec<Result<MechanismOutcome>>,
}

/// Runs `trials` paired trials of one cell.
pub fn run_trials(
    params: &TwoStageParams,
    mechanisms: &[Mechanism],
    trials: usize,
    seed: u64,
    settings: &RunSettings,
) -> Result<Vec<TrialOutcome>> {
    params.validate()?;
    let options = RunOptions { pool_stage1: settings.pool_stage1 };
    settings.within_pool(|| {
        settings
            .map_trials(trials, |t| {
                let trial = trial_for(params, seed, t)?;
                let outcomes = mechanisms
                    .iter()
                    .map(|&mech| {
                        let (res, _) = run(mech, params, &trial, options)?;
                        let report = MetricReport::evaluate(&res.selected, params.k, params.n)?;
                        Ok(MechanismOutcome { selected: res.selected, report })
                    })
                    .collect();
                Ok(TrialOutcome { trial: t, inputs: trial.fingerprint(), outcomes })
            })
            .into_iter()
            .collect()
    })
}

/// Aggregated results for one cell and mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub params: TwoStageParams,
    pub mechanism: Mechanism,
    /// Zero when the cell was infeasible.
    pub trials: usize,
    pub precision: MeanStderr,
    pub positive_borda: MeanStderr,
    pub negative_borda: MeanStderr,
    pub frequencies: Option<Vec<f64>>,
    /// Why the cell could not be run.
    pub infeasible: Option<String>,
}

impl ResultRow {
    fn infeasible(params: TwoStageParams, mechanism: Mechanism, reason: String) -> Self {
        let nan = MeanStderr { mean: f64::NAN, stderr: f64::NAN };
        ResultRow {
            params,
            mechanism,
            trials: 0,
            precision: nan,
            positive_borda: nan,
            negative_borda: nan,
            frequencies: None,
            infeasible: Some(reason),
        }
    }

    fn sort_key(&self) -> impl Ord {
        let p = &self.params;
        let phi = (p.phi.value() * 1e9).round() as u64;
        let mech = Mechanism::ALL.iter().position(|&m| m == self.mechanism);
        (p.n, p.k, p.m, p.f, p.h, p.l, p.c, phi, mech)
    }
}

/// Runs one cell for each mechanism. Infeasible mechanisms get a marker
/// row instead of failing the cell.
pub fn run_cell(
    params: &TwoStageParams,
    mechanisms: &[Mechanism],
    trials: usize,
    seed: u64,
    settings: &RunSettings,
) -> Result<Vec<ResultRow>> {
    let outcomes = run_trials(params, mechanisms, trials, seed, settings)?;
    let mut rows = Vec::with_capacity(mechanisms.len());
    for (i, &mech) in mechanisms.iter().enumerate() {
        let mut per_trial = Vec::with_capacity(trials);
        let mut failure = None;
        for o in &outcomes {
            match &o.outcomes[i] {
                Ok(x) => per_trial.push(x),
                Err(e) if e.is_infeasible() => {
                    failure = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(Error::InvalidInput(format!("{mech}, trial {}: {e}", o.trial))),
            }
        }
        if let Some(reason) = failure {
            warn!("{mech} infeasible for {}: {reason}", config::cell_label(params));
            rows.push(ResultRow::infeasible(*params, mech, reason));
            continue;
        }
        let metric = |f: fn(&MetricReport) -> f64| {
            mean_stderr(&per_trial.iter().map(|x| f(&x.report)).collect::<Vec<_>>())
        };
        let frequencies = if settings.frequencies && trials > 0 {
            Some(selection_frequency(per_trial.iter().map(|x| &x.selected[..]), params.n)?)
        } else {
            None
        };
        rows.push(ResultRow {
            params: *params,
            mechanism: mech,
            trials,
            precision: metric(|r| r.precision_at_k),
            positive_borda: metric(|r| r.positive_borda),
            negative_borda: metric(|r| r.negative_borda),
            frequencies,
            infeasible: None,
        });
    }
    Ok(rows)
}

/// Runs every cell of the grid and returns rows sorted by cell and
/// mechanism.
pub fn run_sweep(config: &ExperimentConfig, settings: &RunSettings) -> Result<Vec<ResultRow>> {
    let cells = config.cells()?;
    let mechanisms = config.mechanism_set()?;
    if cells.is_empty() || mechanisms.is_empty() {
        warn!("empty parameter grid, nothing to run");
        return Ok(Vec::new());
    }
    let settings = RunSettings { pool_stage1: config.pool_stage1, ..*settings };
    let mut rows = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        info!("cell {}/{}: {}", i + 1, cells.len(), config::cell_label(cell));
        rows.extend(run_cell(cell, &mechanisms, config.trials, config.seed, &settings)?);
    }
    rows.sort_by_key(ResultRow::sort_key);
    Ok(rows)
}

/// Like [`run_sweep`], writing the CSV to `out`. The file is created before
/// any trial runs.
pub fn run_sweep_to(config: &ExperimentConfig, out: &Path, settings: &RunSettings) -> Result<Vec<ResultRow>> {
    let file = File::create(out).map_err(|source| Error::Output { path: out.to_path_buf(), source })?;
    let rows = run_sweep(config, settings)?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(rows)
}

/// Per-agent selection frequency of one mechanism in one cell.
pub fn selection_frequencies(
    params: &TwoStageParams,
    mechanism: Mechanism,
    trials: usize,
    seed: u64,
    settings: &RunSettings,
) -> Result<Vec<f64>> {
    let settings = RunSettings { frequencies: true, ..*settings };
    let row = run_cell(params, &[mechanism], trials, seed, &settings)?.remove(0);
    if let Some(reason) = row.infeasible {
        return Err(Error::InvalidInput(format!("{mechanism} cannot run: {reason}")));
    }
    row.frequencies
        .ok_or_else(|| Error::InvalidInput("no trials to count".into()))
}

/// Writes the gain from `freq_a` to `freq_b` as `agent_index,delta` rows.
pub fn emit_gain_data(freq_a: &[f64], freq_b: &[f64], out: &Path) -> Result<GainCurve> {
    let curve = gain_curve(freq_a, freq_b)?;
    let file = File::create(out).map_err(|source| Error::Output { path: out.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    write_gain_csv(&mut w, &curve)?;
    w.flush()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Dispersion;

    fn cell(phi: f64, c: usize) -> TwoStageParams {
        TwoStageParams::single_stage(30, 6, 4, c, Dispersion::new(phi).unwrap())
    }

    #[test]
    fn noiseless_vanilla_is_perfect() {
        let rows = run_cell(&cell(0.0, 1), &[Mechanism::Vanilla], 50, 1, &RunSettings::default()).unwrap();
        assert_eq!(rows[0].precision, MeanStderr { mean: 1.0, stderr: 0.0 });
        assert_eq!(rows[0].trials, 50);
    }

    #[test]
    fn mechanisms_share_inputs() {
        let p = cell(0.5, 3);
        let a = run_trials(&p, &[Mechanism::Partition], 5, 2, &RunSettings::serial()).unwrap();
        let b = run_trials(&p, &Mechanism::ALL, 5, 2, &RunSettings::serial()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.inputs, y.inputs);
            assert_eq!(x.outcomes[0].as_ref().unwrap(), y.outcomes[1].as_ref().unwrap());
        }
    }

    #[test]
    fn budget_cells_are_paired() {
        let a = trial_for(&cell(0.5, 3), 4, 7).unwrap();
        let mut p = cell(0.5, 3);
        p.m = 9;
        let b = trial_for(&p, 4, 7).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), trial_for(&p, 4, 8).unwrap().fingerprint());
    }

    #[test]
    fn serial_equals_parallel() {
        let p = cell(0.8, 2);
        let s = run_cell(&p, &Mechanism::ALL, 40, 3, &RunSettings::serial()).unwrap();
        let settings = RunSettings { threads: Some(3), ..RunSettings::default() };
        let q = run_cell(&p, &Mechanism::ALL, 40, 3, &settings).unwrap();
        assert_eq!(s, q);
    }

    #[test]
    fn infeasible_cell_is_marked() {
        // 3 clusters of 2 leave each reviewer only 4 outsiders
        let p = TwoStageParams::single_stage(6, 2, 5, 3, Dispersion::new(0.5).unwrap());
        let rows = run_cell(&p, &Mechanism::ALL, 3, 0, &RunSettings::serial()).unwrap();
        assert!(rows[0].infeasible.is_none());
        assert!(rows[1].infeasible.is_some());
        assert_eq!(rows[1].trials, 0);
        assert!(rows[1].precision.mean.is_nan());
    }

    #[test]
    fn identical_configs_gain_nothing() {
        let p = cell(0.5, 1);
        let a = selection_frequencies(&p, Mechanism::Vanilla, 30, 5, &RunSettings::serial()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let curve = emit_gain_data(&a, &a, &dir.path().join("gain.csv")).unwrap();
        assert_eq!(curve.delta.len(), 30);
        assert!(curve.delta.iter().all(|&d| d == 0.0));
        assert!(emit_gain_data(&a, &a[1..], &dir.path().join("bad.csv")).is_err());
    }
}
