//! Mallows-model ranking noise and Kendall-tau distance.
//!
//! Agents are numbered by their true quality: agent 0 is the best, so the
//! ground truth is always the identity ranking.

use rand::Rng;

use crate::error::{Error, Result};

/// A strict order over agents `0..n`; `order[p]` is the agent ranked `p`-th
/// (position 0 is the best).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &a in &order {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(Error::InvalidInput(format!(
                    "ranking is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Ranking { order })
    }

    pub fn identity(n: usize) -> Self {
        Ranking {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    /// Inverse permutation: `positions()[agent]` is that agent's position.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &a) in self.order.iter().enumerate() {
            pos[a] = p;
        }
        pos
    }
}

/// Mallows dispersion `phi` in `[0, 1]`. 0 is noiseless, 1 is uniform.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dispersion(f64);

impl Dispersion {
    pub fn new(phi: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&phi) {
            Ok(Dispersion(phi))
        } else {
            Err(Error::InvalidInput(format!("dispersion {phi} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Number of agent pairs ordered differently by `a` and `b`, in O(n log n).
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "rankings have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    // Relabel b's order by positions in a; disagreements are then inversions.
    let pos_a = a.positions();
    let mut seq: Vec<usize> = b.order.iter().map(|&x| pos_a[x]).collect();
    let mut buf = vec![0; seq.len()];
    Ok(count_inversions(&mut seq, &mut buf))
}

/// Merge sort that returns the number of inversions it removed.
fn count_inversions(xs: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = xs.split_at_mut(mid);
        let (lbuf, rbuf) = buf.split_at_mut(mid);
        count_inversions(left, lbuf) + count_inversions(right, rbuf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[i] <= xs[j] {
            buf[k] = xs[i];
            i += 1;
        } else {
            buf[k] = xs[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&xs[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&buf[..n]);
    inv
}

/// Mallows normalizing constant `prod_{j=1..n} (1 + phi + ... + phi^(j-1))`.
pub fn mallows_normalizer(n: usize, phi: Dispersion) -> f64 {
    let phi = phi.value();
    let mut z = 1.0;
    let mut partial = 0.0;
    let mut power = 1.0;
    for _ in 0..n {
        partial += power;
        power *= phi;
        z *= partial;
    }
    z
}

/// Exact probability of `r` under the Mallows model centred at `sigma`.
///
/// Intended for small `n` (test oracles). At `phi = 0` the model is a point
/// mass on `sigma`.
pub fn mallows_pmf(r: &Ranking, sigma: &Ranking, phi: Dispersion) -> Result<f64> {
    let d = kendall_tau(r, sigma)?;
    if phi.value() == 0.0 {
        return Ok(if d == 0 { 1.0 } else { 0.0 });
    }
    let d = i32::try_from(d)
        .map_err(|_| Error::InvalidInput("ranking too long for an exact pmf".into()))?;
    Ok(phi.value().powi(d) / mallows_normalizer(r.len(), phi))
}

/// Draws a ranking from the Mallows model by repeated insertion.
///
/// The items of `sigma` are inserted best-first. The `j`-th item lands `d`
/// slots before the end of the current list (creating exactly `d` new
/// disagreements with `sigma`) with probability `phi^d / (1 + ... + phi^j)`.
pub fn sample_mallows<R: Rng + ?Sized>(sigma: &Ranking, phi: Dispersion, rng: &mut R) -> Ranking {
    let n = sigma.len();
    let phi = phi.value();
    if phi == 0.0 {
        return sigma.clone();
    }
    let mut order = Vec::with_capacity(n);
    let ln_phi = phi.ln();
    let mut phi_pow = 1.0; // phi^(j+1) after the update below
    for (j, &item) in sigma.order.iter().enumerate() {
        phi_pow *= phi;
        let d = if phi == 1.0 {
            rng.random_range(0..=j)
        } else {
            truncated_geometric(rng.random::<f64>(), phi_pow, ln_phi, j)
        };
        order.insert(j - d, item);
    }
    Ranking { order }
}

/// Inverse-CDF draw of `d` in `0..=max` with `P(d) ∝ phi^d`, where
/// `phi_pow = phi^(max+1)`.
fn truncated_geometric(u: f64, phi_pow: f64, ln_phi: f64, max: usize) -> usize {
    // P(D <= x) = (1 - phi^(x+1)) / (1 - phi^(max+1))
    let tail = 1.0 - u * (1.0 - phi_pow);
    let d = (tail.ln() / ln_phi).floor();
    if d.is_finite() && d >= 0.0 {
        (d as usize).min(max)
    } else {
        max
    }
}

/// Draws one noisy ranking of the ground truth per agent.
pub fn sample_profile<R: Rng + ?Sized>(n: usize, phi: Dispersion, rng: &mut R) -> Vec<Ranking> {
    let truth = Ranking::identity(n);
    (0..n).map(|_| sample_mallows(&truth, phi, rng)).collect()
}
