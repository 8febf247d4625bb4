//! Outcome-quality metrics against the ground truth (agent `j` is the
//! `(j+1)`-th best) and per-agent selection-probability curves.

use crate::error::{Error, Result};

/// Quality of one selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub precision_at_k: f64,
    pub positive_borda: f64,
    pub negative_borda: f64,
}

impl MetricReport {
    pub fn evaluate(selected: &[usize], k: usize, n: usize) -> Result<Self> {
        Ok(MetricReport {
            precision_at_k: precision_at_k(selected, k)?,
            positive_borda: positive_borda(selected, k)?,
            negative_borda: negative_borda(selected, k, n)?,
        })
    }
}

fn check_size(selected: &[usize], k: usize) -> Result<()> {
    if selected.len() != k || k == 0 {
        return Err(Error::InvalidInput(format!(
            "expected a selection of size {k} (k > 0), got {}",
            selected.len()
        )));
    }
    Ok(())
}

/// Fraction of the true top-`k` that was selected.
pub fn precision_at_k(selected: &[usize], k: usize) -> Result<f64> {
    check_size(selected, k)?;
    let hits = selected.iter().filter(|&&j| j < k).count();
    Ok(hits as f64 / k as f64)
}

/// Rank-weighted credit for correct picks: agent `j < k` is worth `k - j`,
/// normalized by the best achievable `k(k+1)/2`.
pub fn positive_borda(selected: &[usize], k: usize) -> Result<f64> {
    check_size(selected, k)?;
    let score: usize = selected.iter().map(|&j| k.saturating_sub(j)).sum();
    Ok(score as f64 / (k * (k + 1) / 2) as f64)
}

/// One minus the rank-weighted penalty for wrong picks, relative to the
/// worst case. Agent `j >= k` costs `j - k + 1`; selecting the bottom `k`
/// scores 0 and any selection without wrong picks scores 1.
pub fn negative_borda(selected: &[usize], k: usize, n: usize) -> Result<f64> {
    check_size(selected, k)?;
    if k >= n {
        return Err(Error::InvalidInput(format!("negative Borda needs k < n (k={k}, n={n})")));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidInput(format!("agent {j} out of range for n={n}")));
    }
    let penalty: usize = selected.iter().filter(|&&j| j >= k).map(|&j| j - k + 1).sum();
    let worst: usize = (n - k..n).map(|j| j.saturating_sub(k) + 1).sum();
    Ok(1.0 - penalty as f64 / worst as f64)
}

/// Per-agent fraction of runs in which the agent was selected.
pub fn selection_frequency<'a, I>(selections: I, n: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut counts = vec![0u64; n];
    let mut runs = 0u64;
    for sel in selections {
        runs += 1;
        for &a in sel {
            *counts.get_mut(a).ok_or_else(|| {
                Error::InvalidInput(format!("agent {a} out of range for n={n}"))
            })? += 1;
        }
    }
    if runs == 0 {
        return Err(Error::InvalidInput("no runs to count".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / runs as f64).collect())
}

/// Change in selection probability per agent between two configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub delta: Vec<f64>,
}

impl GainCurve {
    /// Agent with the largest gain (lowest index on ties).
    pub fn argmax(&self) -> Option<usize> {
        extreme(&self.delta, |a, b| a > b)
    }

    /// Agent with the largest loss (lowest index on ties).
    pub fn argmin(&self) -> Option<usize> {
        extreme(&self.delta, |a, b| a < b)
    }

    pub fn peak(&self) -> f64 {
        self.delta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.delta.iter().sum()
    }
}

fn extreme(xs: &[f64], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if best.is_none_or(|b| better(x, xs[b])) {
            best = Some(i);
        }
    }
    best
}

/// `freq_b - freq_a`, agent by agent.
pub fn gain_curve(freq_a: &[f64], freq_b: &[f64]) -> Result<GainCurve> {
    if freq_a.len() != freq_b.len() {
        return Err(Error::InvalidInput(format!(
            "frequency tables cover {} and {} agents",
            freq_a.len(),
            freq_b.len()
        )));
    }
    Ok(GainCurve {
        delta: freq_a.iter().zip(freq_b).map(|(a, b)| b - a).collect(),
    })
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Summarizes values in the given order, so the result does not depend on
/// how the values were produced.
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr::default();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}
