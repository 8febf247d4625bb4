use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mechanisms::Mechanism;
use crate::noise::Dispersion;
use crate::twostage::TwoStageParams;

pub const DEFAULT_TRIALS: usize = 10_000;

/// A grid value: either a count or a multiple of another parameter such
/// as `"0.1m"` or `"0.5n-k"`. Multiples round to the nearest integer and
/// never go below 1.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Count(usize),
    Expr(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    N,
    K,
    M,
    NMinusK,
}

#[derive(Debug, Clone, Copy, Default)]
struct Env {
    n: usize,
    k: usize,
    m: usize,
}

impl GridValue {
    fn resolve(&self, env: Env, allowed: &[&str]) -> Result<usize> {
        let expr = match self {
            GridValue::Count(x) => return Ok(*x),
            GridValue::Expr(s) => s.trim(),
        };
        let bad = || Error::Config(format!("cannot read grid value {expr:?} (allowed bases: {allowed:?})"));
        let (coef, base) = [("n-k", Base::NMinusK), ("n", Base::N), ("k", Base::K), ("m", Base::M)]
            .into_iter()
            .find_map(|(name, b)| {
                let head = expr.strip_suffix(name)?;
                allowed.contains(&name).then_some((head.trim_end_matches('*').trim(), b))
            })
            .ok_or_else(bad)?;
        let coef: f64 = if coef.is_empty() { 1.0 } else { coef.parse().map_err(|_| bad())? };
        if !coef.is_finite() || coef < 0.0 {
            return Err(bad());
        }
        let base = match base {
            Base::N => env.n,
            Base::K => env.k,
            Base::M => env.m,
            Base::NMinusK => env.n.saturating_sub(env.k),
        } as f64;
        Ok(((coef * base).round() as usize).max(1))
    }
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Count(x) => write!(f, "{x}"),
            GridValue::Expr(s) => f.write_str(s),
        }
    }
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_true() -> bool {
    true
}

fn default_c() -> Vec<usize> {
    vec![1]
}

fn default_zero() -> Vec<GridValue> {
    vec![GridValue::Count(0)]
}

fn default_mechanisms() -> Vec<String> {
    Mechanism::ALL.iter().map(|m| m.name().to_string()).collect()
}

/// A parameter sweep as read from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: Vec<GridValue>,
    pub m: Vec<GridValue>,
    #[serde(default = "default_zero")]
    pub f: Vec<GridValue>,
    #[serde(default = "default_zero")]
    pub h: Vec<GridValue>,
    #[serde(default = "default_zero")]
    pub l: Vec<GridValue>,
    #[serde(default = "default_c")]
    pub c: Vec<usize>,
    pub phi: Vec<f64>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub pool_stage1: bool,
    /// Without this, `f`, `h` and `l` are ignored and every cell is single stage.
    #[serde(default)]
    pub two_stage: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn mechanism_set(&self) -> Result<Vec<Mechanism>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for name in &self.mechanisms {
            let m: Mechanism = name.parse()?;
            if seen.insert(m.name()) {
                out.push(m);
            }
        }
        Ok(out)
    }

    /// Expands the grid into validated cells, in grid order, without
    /// duplicates. Single-stage cells (`f = 0`) drop `h` and `l`.
    pub fn cells(&self) -> Result<Vec<TwoStageParams>> {
        self.mechanism_set()?;
        let n = self.n;
        let mut seen = Vec::new();
        let zero = [GridValue::Count(0)];
        let (fs, hs, ls) = if self.two_stage {
            (&self.f[..], &self.h[..], &self.l[..])
        } else {
            (&zero[..], &zero[..], &zero[..])
        };
        for &phi in &self.phi {
            let phi = Dispersion::new(phi)?;
            for kv in &self.k {
                let k = kv.resolve(Env { n, ..Env::default() }, &["n"])?;
                for mv in &self.m {
                    let m = mv.resolve(Env { n, k, m: 0 }, &["n"])?;
                    let env = Env { n, k, m };
                    for fv in fs {
                        let f = fv.resolve(env, &["m"])?;
                        for hv in hs {
                            let h = if f == 0 { 0 } else { hv.resolve(env, &["k"])? };
                            for lv in ls {
                                let l = if f == 0 { 0 } else { lv.resolve(env, &["n", "n-k", "k"])? };
                                for &c in &self.c {
                                    let cell = TwoStageParams { n, k, m, f, h, l, c, phi };
                                    cell.validate().map_err(|e| {
                                        Error::Config(format!("cell {}: {e}", cell_label(&cell)))
                                    })?;
                                    if !seen.contains(&cell) {
                                        seen.push(cell);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(seen)
    }
}

pub(crate) fn cell_label(p: &TwoStageParams) -> String {
    format!(
        "n={} k={} m={} f={} h={} l={} c={} phi={}",
        p.n,
        p.k,
        p.m,
        p.f,
        p.h,
        p.l,
        p.c,
        p.phi.value()
    )
}
