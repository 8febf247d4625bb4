//! Expectation-preserving rounding of real-valued cluster shares.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Integer seats per cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QuotaVector(pub Vec<usize>);

impl QuotaVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for QuotaVector {
    type Output = usize;
    fn index(&self, g: usize) -> &usize {
        &self.0[g]
    }
}

const SUM_TOLERANCE: f64 = 1e-6;
const SNAP: f64 = 1e-9;

/// Rounds shares that sum to an integer `k` into quotas that sum to exactly
/// `k`, each equal to the floor or ceiling of its share, with
/// `E[quota] = share`.
///
/// Systematic sampling: clusters are visited in random order, their
/// fractional parts laid end to end on a line, and a cluster rounds up when
/// the comb `{u, u+1, u+2, ...}` with `u ~ U[0,1)` hits its segment. The
/// draw consumes exactly one shuffle and one uniform regardless of the share
/// values.
pub fn randomized_round<R: Rng + ?Sized>(shares: &[f64], rng: &mut R) -> Result<QuotaVector> {
    let c = shares.len();
    let mut order: Vec<usize> = (0..c).collect();
    order.shuffle(rng);
    let u: f64 = rng.random();

    if let Some(s) = shares.iter().find(|s| !s.is_finite() || **s < -SNAP) {
        return Err(Error::InvalidInput(format!("share {s} is not a nonnegative number")));
    }
    let sum: f64 = shares.iter().sum();
    let k = sum.round();
    if (sum - k).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "shares sum to {sum}, which is not an integer"
        )));
    }
    let k = k as usize;

    let mut floors = Vec::with_capacity(c);
    let mut fracs = Vec::with_capacity(c);
    for &s in shares {
        let s = s.max(0.0);
        let near = s.round();
        let s = if (s - near).abs() < SNAP { near } else { s };
        let fl = s.floor();
        floors.push(fl as usize);
        fracs.push(s - fl);
    }
    let short = k.checked_sub(floors.iter().sum::<usize>()).ok_or_else(|| {
        Error::InvalidInput("floors of the shares exceed their sum".into())
    })?;

    // Count comb teeth u + j in [start, end); the last segment ends at
    // exactly `short` so the counts telescope to `short`.
    let mut quotas = floors;
    let mut start = 0.0;
    for (pos, &g) in order.iter().enumerate() {
        let end = if pos + 1 == c { short as f64 } else { start + fracs[g] };
        let hits = (end - u).ceil() - (start - u).ceil();
        quotas[g] += hits.max(0.0) as usize;
        start = end;
    }
    debug_assert_eq!(quotas.iter().sum::<usize>(), k);
    Ok(QuotaVector(quotas))
}
