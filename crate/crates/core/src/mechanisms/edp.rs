//! Exact Dollar Partition: every reviewer hands out one unit of points, a
//! cluster's seat share is its fraction of all points, and shares are
//! rounded to integer quotas in expectation.

use rand::Rng;

use super::{
    check_k, mean_scores, randomized_round, select_by_quota, GradeProfile, QuotaRepair,
    QuotaVector, SelectionResult, TieBreak,
};
use crate::assign::Clustering;
use crate::error::Result;

/// Rescales each reviewer's grades to sum to 1. A reviewer whose grades sum
/// to zero splits the unit evenly.
pub fn normalize_profile(profile: &GradeProfile) -> GradeProfile {
    let rows = profile
        .rows()
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(|&(_, g)| g).sum();
            if total > 0.0 {
                row.iter().map(|&(c, g)| (c, g / total)).collect()
            } else {
                let even = 1.0 / row.len() as f64;
                row.iter().map(|&(c, _)| (c, even)).collect()
            }
        })
        .collect();
    GradeProfile::from_rows(rows)
}

/// `k` times each cluster's fraction of the points given to `candidates`.
/// With no points at all every cluster gets `k / c`.
pub fn cluster_shares(
    normalized: &GradeProfile,
    clustering: &Clustering,
    candidates: &[usize],
    k: usize,
) -> Vec<f64> {
    let c = clustering.num_clusters();
    let dim = candidates.iter().copied().max().map_or(0, |m| m + 1);
    let (received, _) = normalized.received(dim);
    let mut points = vec![0.0; c];
    for &cand in candidates {
        points[clustering.cluster_of(cand)] += received[cand];
    }
    let total: f64 = points.iter().sum();
    if total > 0.0 {
        points.iter().map(|p| k as f64 * p / total).collect()
    } else {
        vec![k as f64 / c as f64; c]
    }
}

/// Caps quotas at cluster capacity and hands the surplus, one seat at a
/// time, to clusters with room, largest fractional share first.
pub(crate) fn repair_overflow(
    quotas: &mut QuotaVector,
    shares: &[f64],
    capacity: &[usize],
) -> Vec<QuotaRepair> {
    let mut repairs = Vec::new();
    let c = quotas.len();
    let mut receivers: Vec<usize> = (0..c).collect();
    receivers.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for from in 0..c {
        while quotas.0[from] > capacity[from] {
            let Some(&to) = receivers
                .iter()
                .find(|&&g| g != from && quotas.0[g] < capacity[g])
            else {
                return repairs;
            };
            quotas.0[from] -= 1;
            quotas.0[to] += 1;
            repairs.push(QuotaRepair { from, to });
            // move the receiver to the back so seats spread round-robin
            let pos = receivers.iter().position(|&g| g == to).unwrap();
            let g = receivers.remove(pos);
            receivers.push(g);
        }
    }
    repairs
}

/// Exact Dollar Partition over `candidates`.
///
/// Grades to non-candidates are ignored. Within a cluster, candidates are
/// ordered by mean normalized grade.
pub fn edp_select<R: Rng + ?Sized>(
    profile: &GradeProfile,
    clustering: &Clustering,
    candidates: &[usize],
    k: usize,
    rng: &mut R,
    ties: &TieBreak,
) -> Result<SelectionResult> {
    check_k(candidates, k)?;
    let normalized = normalize_profile(&profile.restricted(candidates));
    let shares = cluster_shares(&normalized, clustering, candidates, k);
    let mut quotas = randomized_round(&shares, rng)?;
    let capacity: Vec<usize> = clustering
        .group(candidates.iter().copied())
        .iter()
        .map(Vec::len)
        .collect();
    let repairs = repair_overflow(&mut quotas, &shares, &capacity);
    if !repairs.is_empty() {
        log::debug!("edp quota overflow repaired with {} seat moves", repairs.len());
    }

    let mut scored = mean_scores(&normalized, candidates);
    let scores = scored.iter().map(|&(c, s, _)| (c, s)).collect();
    let per_cluster = select_by_quota(&mut scored, clustering, &quotas, ties)?;
    let mut selected: Vec<usize> = per_cluster.iter().flatten().copied().collect();
    selected.sort_unstable();
    Ok(SelectionResult {
        selected,
        per_cluster: Some(per_cluster),
        scores,
        quotas: Some(quotas),
        repairs,
    })
}
