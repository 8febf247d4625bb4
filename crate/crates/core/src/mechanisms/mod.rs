//! Grading and the three selection mechanisms: Vanilla (Borda-style top-k),
//! Partition, and Exact Dollar Partition.
//!
//! A candidate's score is the mean grade it received. With the balanced
//! assigner every candidate of a single-stage run receives the same number
//! of reviews, so this orders candidates exactly like the grade sum; in the
//! second stage, where loads can differ by one, the mean keeps extra reviews
//! from counting as extra merit.

mod edp;
mod rounding;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assign::{Assignment, Clustering};
use crate::error::{Error, Result};
use crate::noise::Ranking;

pub use edp::{cluster_shares, edp_select, normalize_profile};
pub use rounding::{randomized_round, QuotaVector};

/// Which mechanism to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Vanilla,
    Partition,
    ExactDollarPartition,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [
        Mechanism::Vanilla,
        Mechanism::Partition,
        Mechanism::ExactDollarPartition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Vanilla => "vanilla",
            Mechanism::Partition => "partition",
            Mechanism::ExactDollarPartition => "edp",
        }
    }

    pub fn is_clustered(self) -> bool {
        !matches!(self, Mechanism::Vanilla)
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Mechanism::Vanilla),
            "partition" => Ok(Mechanism::Partition),
            "edp" | "exact_dollar_partition" | "exact-dollar-partition" => {
                Ok(Mechanism::ExactDollarPartition)
            }
            other => Err(Error::InvalidInput(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// Grades given by each reviewer, indexed by reviewer id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradeProfile {
    rows: Vec<Vec<(usize, f64)>>,
}

impl GradeProfile {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        GradeProfile { rows }
    }

    /// Grades every assigned pair from the reviewer's full ranking.
    pub fn from_rankings(assignment: &Assignment, rankings: &[Ranking]) -> Result<Self> {
        let positions: Vec<Vec<usize>> = rankings.iter().map(Ranking::positions).collect();
        Self::from_positions(assignment, &positions)
    }

    /// As [`GradeProfile::from_rankings`], from precomputed inverse rankings.
    pub fn from_positions(assignment: &Assignment, positions: &[Vec<usize>]) -> Result<Self> {
        let mut rows = vec![Vec::new(); assignment.len()];
        for (r, row) in rows.iter_mut().enumerate() {
            let reviewees = assignment.reviewees(r);
            if reviewees.is_empty() {
                continue;
            }
            let pos = positions.get(r).ok_or_else(|| {
                Error::InvalidInput(format!("no ranking for reviewer {r}"))
            })?;
            *row = grades_at(pos, reviewees)?;
        }
        Ok(GradeProfile { rows })
    }

    pub fn num_reviewers(&self) -> usize {
        self.rows.len()
    }

    pub fn reviewer(&self, r: usize) -> &[(usize, f64)] {
        self.rows.get(r).map_or(&[], Vec::as_slice)
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Replaces one reviewer's reported grades.
    pub fn set_reviewer(&mut self, r: usize, grades: Vec<(usize, f64)>) {
        if self.rows.len() <= r {
            self.rows.resize(r + 1, Vec::new());
        }
        self.rows[r] = grades;
    }

    /// Both profiles' grades, reviewer by reviewer.
    pub fn pooled(&self, other: &GradeProfile) -> GradeProfile {
        let len = self.rows.len().max(other.rows.len());
        let rows = (0..len)
            .map(|r| {
                let mut row = self.reviewer(r).to_vec();
                row.extend_from_slice(other.reviewer(r));
                row
            })
            .collect();
        GradeProfile { rows }
    }

    /// Keeps only grades given to `candidates`.
    pub fn restricted(&self, candidates: &[usize]) -> GradeProfile {
        let mask = membership(candidates);
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .copied()
                    .filter(|&(c, _)| mask.get(c).copied().unwrap_or(false))
                    .collect()
            })
            .collect();
        GradeProfile { rows }
    }

    pub fn map_grades(&self, f: impl Fn(f64) -> f64) -> GradeProfile {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(c, g)| (c, f(g))).collect())
            .collect();
        GradeProfile { rows }
    }

    /// Sum and count of grades received, for agent ids below `dim`.
    pub(crate) fn received(&self, dim: usize) -> (Vec<f64>, Vec<usize>) {
        let mut sum = vec![0.0; dim];
        let mut count = vec![0; dim];
        for row in &self.rows {
            for &(c, g) in row {
                if c < dim {
                    sum[c] += g;
                    count[c] += 1;
                }
            }
        }
        (sum, count)
    }
}

pub(crate) fn membership(agents: &[usize]) -> Vec<bool> {
    let dim = agents.iter().copied().max().map_or(0, |m| m + 1);
    let mut mask = vec![false; dim];
    for &a in agents {
        mask[a] = true;
    }
    mask
}

fn grades_at(positions: &[usize], reviewees: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n = positions.len();
    reviewees
        .iter()
        .map(|&c| {
            positions
                .get(c)
                .map(|&p| (c, (n - p) as f64))
                .ok_or_else(|| Error::InvalidInput(format!("candidate {c} is not in the ranking")))
        })
        .collect()
}

/// Borda-style grade: `n - position`, so the reviewer's favourite gets `n`
/// and each step down the ranking costs one point.
pub fn grades_from_ranking(full_ranking: &Ranking, reviewees: &[usize]) -> Result<Vec<(usize, f64)>> {
    grades_at(&full_ranking.positions(), reviewees)
}

/// Per-trial priority for breaking exact score ties; lower rank wins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TieBreak {
    rank: Vec<usize>,
}

impl TieBreak {
    /// Lower agent index wins.
    pub fn by_index(n: usize) -> Self {
        TieBreak {
            rank: (0..n).collect(),
        }
    }

    /// A uniformly random priority order.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut rank: Vec<usize> = (0..n).collect();
        rank.shuffle(rng);
        TieBreak { rank }
    }

    pub fn rank(&self, agent: usize) -> usize {
        self.rank.get(agent).copied().unwrap_or(agent)
    }

    /// `agents` sorted by priority.
    pub fn sorted(&self, agents: &[usize]) -> Vec<usize> {
        let mut v = agents.to_vec();
        v.sort_by_key(|&a| (self.rank(a), a));
        v
    }
}

/// Outcome of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Selected agents, ascending.
    pub selected: Vec<usize>,
    /// Selected agents by cluster, for clustered mechanisms.
    pub per_cluster: Option<Vec<Vec<usize>>>,
    /// Aggregate score of every candidate.
    pub scores: BTreeMap<usize, f64>,
    pub quotas: Option<QuotaVector>,
    /// Seat moves made when a rounded quota exceeded a cluster's size.
    pub repairs: Vec<QuotaRepair>,
}

/// One seat moved from an over-full cluster to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuotaRepair {
    pub from: usize,
    pub to: usize,
}

impl SelectionResult {
    pub fn contains(&self, agent: usize) -> bool {
        self.selected.binary_search(&agent).is_ok()
    }
}

/// Mean received grade per candidate (0 for unreviewed ones) and whether the
/// candidate was reviewed at all.
pub(crate) fn mean_scores(profile: &GradeProfile, candidates: &[usize]) -> Vec<(usize, f64, bool)> {
    let dim = candidates.iter().copied().max().map_or(0, |m| m + 1);
    let (sum, count) = profile.received(dim);
    candidates
        .iter()
        .map(|&c| {
            if count[c] == 0 {
                (c, 0.0, false)
            } else {
                (c, sum[c] / count[c] as f64, true)
            }
        })
        .collect()
}

/// Best first: reviewed before unreviewed, then by score, then by priority.
pub(crate) fn order_best_first(scored: &mut [(usize, f64, bool)], ties: &TieBreak) {
    scored.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(b.1.total_cmp(&a.1))
            .then(ties.rank(a.0).cmp(&ties.rank(b.0)))
            .then(a.0.cmp(&b.0))
    });
}

fn check_k(candidates: &[usize], k: usize) -> Result<()> {
    if k > candidates.len() {
        return Err(Error::InvalidInput(format!(
            "cannot select {k} from {} candidates",
            candidates.len()
        )));
    }
    Ok(())
}

/// The `k` candidates with the highest mean received grade.
pub fn vanilla_select(
    profile: &GradeProfile,
    candidates: &[usize],
    k: usize,
    ties: &TieBreak,
) -> Result<SelectionResult> {
    check_k(candidates, k)?;
    let mut scored = mean_scores(profile, candidates);
    let scores = scored.iter().map(|&(c, s, _)| (c, s)).collect();
    order_best_first(&mut scored, ties);
    let mut selected: Vec<usize> = scored[..k].iter().map(|x| x.0).collect();
    selected.sort_unstable();
    Ok(SelectionResult {
        selected,
        per_cluster: None,
        scores,
        quotas: None,
        repairs: Vec::new(),
    })
}

/// Splits `total` seats over `c` clusters: `floor(total/c)` each, plus one
/// for the first `total mod c` clusters of a random permutation.
pub fn even_quotas<R: Rng + ?Sized>(total: usize, c: usize, rng: &mut R) -> QuotaVector {
    let mut order: Vec<usize> = (0..c).collect();
    order.shuffle(rng);
    even_quotas_in_order(total, &order)
}

pub(crate) fn even_quotas_in_order(total: usize, order: &[usize]) -> QuotaVector {
    let c = order.len();
    if c == 0 {
        return QuotaVector(Vec::new());
    }
    let mut q = vec![total / c; c];
    for &g in &order[..total % c] {
        q[g] += 1;
    }
    QuotaVector(q)
}

/// Takes the top `quota[g]` of each cluster's candidates, ordered by
/// `scored`. Fails if a cluster has too few candidates.
pub(crate) fn select_by_quota(
    scored: &mut [(usize, f64, bool)],
    clustering: &Clustering,
    quotas: &QuotaVector,
    ties: &TieBreak,
) -> Result<Vec<Vec<usize>>> {
    order_best_first(scored, ties);
    let ranked: Vec<usize> = scored.iter().map(|x| x.0).collect();
    let by_cluster = clustering.group(ranked);
    by_cluster
        .into_iter()
        .enumerate()
        .map(|(g, members)| {
            let q = quotas[g];
            if q > members.len() {
                return Err(Error::InfeasibleQuota {
                    cluster: g,
                    quota: q,
                    available: members.len(),
                });
            }
            let mut picked = members[..q].to_vec();
            picked.sort_unstable();
            Ok(picked)
        })
        .collect()
}

/// Partition with fixed quotas: `k/c` per cluster, remainder seats to a
/// random subset of clusters.
pub fn partition_select<R: Rng + ?Sized>(
    profile: &GradeProfile,
    clustering: &Clustering,
    candidates: &[usize],
    k: usize,
    rng: &mut R,
    ties: &TieBreak,
) -> Result<SelectionResult> {
    let quotas = even_quotas(k, clustering.num_clusters(), rng);
    partition_select_with_quotas(profile, clustering, candidates, quotas, ties)
}

/// Partition with caller-supplied per-cluster quotas.
pub fn partition_select_with_quotas(
    profile: &GradeProfile,
    clustering: &Clustering,
    candidates: &[usize],
    quotas: QuotaVector,
    ties: &TieBreak,
) -> Result<SelectionResult> {
    check_k(candidates, quotas.total())?;
    let mut scored = mean_scores(profile, candidates);
    let scores = scored.iter().map(|&(c, s, _)| (c, s)).collect();
    let per_cluster = select_by_quota(&mut scored, clustering, &quotas, ties)?;
    let mut selected: Vec<usize> = per_cluster.iter().flatten().copied().collect();
    selected.sort_unstable();
    Ok(SelectionResult {
        selected,
        per_cluster: Some(per_cluster),
        scores,
        quotas: Some(quotas),
        repairs: Vec::new(),
    })
}
