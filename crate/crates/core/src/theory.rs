//! Normal-approximation model of how extra reviews change an item's chance
//! of clearing a fixed acceptance threshold.
//!
//! Each reviewer independently supports item `i` with probability `p_i`; the
//! item is accepted when the supporting fraction of its `m` reviews reaches
//! the threshold `t`. For large `m` the fraction is approximately
//! `N(p, p(1-p)/m)`, so `P_i(m) ≈ 1 - Φ((t - p)√m / b)` with
//! `b = √(p(1-p))`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// An item's probability of receiving a supporting review.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AnalyticItem {
    p: f64,
}

impl AnalyticItem {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(AnalyticItem { p })
        } else {
            Err(Error::InvalidInput(format!("support probability {p} outside [0, 1]")))
        }
    }

    pub fn p(self) -> f64 {
        self.p
    }

    /// Standard deviation of a single review, `√(p(1-p))`.
    pub fn spread(self) -> f64 {
        (self.p * (1.0 - self.p)).sqrt()
    }
}

/// Acceptance cutoff on the supporting fraction, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t < 1.0 {
            Ok(Threshold(t))
        } else {
            Err(Error::InvalidInput(format!("threshold {t} outside (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Midpoint of the two items around the top-`k` boundary (1-based `k`-th
/// and `(k+1)`-th of a list sorted by decreasing `p`).
pub fn default_threshold(items: &[AnalyticItem], k: usize) -> Result<Threshold> {
    if k == 0 || k >= items.len() {
        return Err(Error::InvalidInput(format!(
            "need 0 < k < {} for a boundary threshold",
            items.len()
        )));
    }
    Threshold::new((items[k - 1].p + items[k].p) / 2.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one review".into()));
    }
    Ok(())
}

/// Standardized margin `z(m) = (p - t)√m / b`; infinite for `p ∈ {0, 1}`.
fn z(item: AnalyticItem, t: Threshold, m: usize) -> f64 {
    let b = item.spread();
    let diff = item.p - t.0;
    if b == 0.0 {
        return if diff >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    diff * (m as f64).sqrt() / b
}

/// Approximate `P(V/m >= t)` for `V ~ Binomial(m, p)`. Exact for the
/// degenerate `p ∈ {0, 1}`.
pub fn accept_probability(p: f64, t: Threshold, m: usize) -> Result<f64> {
    check_m(m)?;
    let item = AnalyticItem::new(p)?;
    Ok(normal_cdf(z(item, t, m)))
}

/// Gain in acceptance probability from `m` to `m + x` reviews.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaP {
    /// `Φ(z(m+x)) - Φ(z(m))`.
    pub exact: f64,
    /// Mean-value form with the evaluation point fixed at the midpoint of
    /// `[z(m), z(m+x)]`. An approximation of `exact`, reported separately.
    pub midpoint: f64,
}

pub fn delta_p(p: f64, t: Threshold, m: usize, x: usize) -> Result<DeltaP> {
    check_m(m)?;
    if x == 0 {
        return Err(Error::InvalidInput("need at least one added review".into()));
    }
    let item = AnalyticItem::new(p)?;
    let b = item.spread();
    if b == 0.0 {
        return Ok(DeltaP { exact: 0.0, midpoint: 0.0 });
    }
    let exact = normal_cdf(z(item, t, m + x)) - normal_cdf(z(item, t, m));
    let (sm, smx) = ((m as f64).sqrt(), ((m + x) as f64).sqrt());
    let ratio = (p - t.0) / b;
    let midpoint = (smx - sm) * ratio * normal_pdf(ratio * (smx + sm) / 2.0);
    Ok(DeltaP { exact, midpoint })
}

/// Which item gains most from `x` extra reviews.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgmaxGain {
    /// 0-based index maximizing the exact `ΔP`; lowest index on ties.
    pub by_delta: usize,
    /// 0-based index whose `(p - t)/b` is closest to `2/(√(m+x) + √m)`,
    /// the first-order condition of the midpoint form. `None` when every
    /// item is degenerate.
    pub by_condition: Option<usize>,
}

pub fn argmax_gain(items: &[AnalyticItem], t: Threshold, m: usize, x: usize) -> Result<ArgmaxGain> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no items".into()));
    }
    if items.windows(2).any(|w| w[0].p < w[1].p) {
        return Err(Error::InvalidInput("items must be sorted by decreasing p".into()));
    }
    let target = 2.0 / (((m + x) as f64).sqrt() + (m as f64).sqrt());
    let mut by_delta = 0;
    let mut best = f64::NEG_INFINITY;
    let mut by_condition = None;
    let mut closest = f64::INFINITY;
    for (i, item) in items.iter().enumerate() {
        let d = delta_p(item.p, t, m, x)?.exact;
        if d > best {
            best = d;
            by_delta = i;
        }
        let b = item.spread();
        if b > 0.0 {
            let gap = ((item.p - t.0) / b - target).abs();
            if gap < closest {
                closest = gap;
                by_condition = Some(i);
            }
        }
    }
    Ok(ArgmaxGain { by_delta, by_condition })
}

/// Monte Carlo estimate of `P(V/m >= t)` for `V ~ Binomial(m, p)`.
pub fn mc_accept_probability<R: Rng + ?Sized>(
    p: f64,
    t: Threshold,
    m: usize,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    check_m(m)?;
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    AnalyticItem::new(p)?;
    let binom = Binomial::new(m as u64, p).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mf = m as f64;
    let hits = (0..trials)
        .filter(|_| binom.sample(rng) as f64 / mf >= t.0)
        .count();
    Ok(hits as f64 / trials as f64)
}
