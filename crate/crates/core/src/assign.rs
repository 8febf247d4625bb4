//! Reviewer clusters and balanced review assignments.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// A partition of agents `0..n` into `c` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clustering {
    cluster_of: Vec<usize>,
    c: usize,
}

impl Clustering {
    /// Checks that every agent has a cluster id below `c` and that no
    /// cluster is empty.
    pub fn new(cluster_of: Vec<usize>, c: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidInput("cluster count must be positive".into()));
        }
        let mut sizes = vec![0usize; c];
        for &g in &cluster_of {
            if g >= c {
                return Err(Error::InvalidInput(format!(
                    "cluster id {g} out of range for {c} clusters"
                )));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("cluster {g} is empty")));
        }
        Ok(Clustering { cluster_of, c })
    }

    /// Everyone in cluster 0.
    pub fn single(n: usize) -> Self {
        Clustering {
            cluster_of: vec![0; n],
            c: 1,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.c
    }

    pub fn cluster_of(&self, agent: usize) -> usize {
        self.cluster_of[agent]
    }

    pub fn labels(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c];
        for &g in &self.cluster_of {
            sizes[g] += 1;
        }
        sizes
    }

    /// Members of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        self.group(0..self.cluster_of.len())
    }

    /// Splits `agents` by cluster, preserving their order.
    pub fn group(&self, agents: impl IntoIterator<Item = usize>) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.c];
        for a in agents {
            out[self.cluster_of[a]].push(a);
        }
        out
    }
}

/// Uniformly random partition of `0..n` into `c` clusters whose sizes are
/// `floor(n/c)` or `ceil(n/c)`.
pub fn make_clusters<R: Rng + ?Sized>(n: usize, c: usize, rng: &mut R) -> Result<Clustering> {
    if c == 0 || c > n {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} agents into {c} clusters"
        )));
    }
    let mut agents: Vec<usize> = (0..n).collect();
    agents.shuffle(rng);
    let mut labels: Vec<usize> = (0..c).collect();
    labels.shuffle(rng);
    let mut cluster_of = vec![0; n];
    for (p, &a) in agents.iter().enumerate() {
        cluster_of[a] = labels[p % c];
    }
    Ok(Clustering { cluster_of, c })
}

/// Which candidates each reviewer grades.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    /// Indexed by reviewer agent id; each list is sorted ascending.
    reviewees: Vec<Vec<usize>>,
}

impl Assignment {
    pub fn from_lists(reviewees: Vec<Vec<usize>>) -> Self {
        let mut reviewees = reviewees;
        for list in &mut reviewees {
            list.sort_unstable();
        }
        Assignment { reviewees }
    }

    pub fn reviewees(&self, reviewer: usize) -> &[usize] {
        self.reviewees.get(reviewer).map_or(&[], Vec::as_slice)
    }

    /// Number of reviewer slots (one past the largest reviewer id).
    pub fn len(&self) -> usize {
        self.reviewees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviewees.iter().all(Vec::is_empty)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.reviewees
            .iter()
            .enumerate()
            .flat_map(|(r, list)| list.iter().map(move |&c| (r, c)))
    }

    /// Reviews received per agent id, for ids `0..n`.
    pub fn received_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for (_, c) in self.pairs() {
            counts[c] += 1;
        }
        counts
    }
}

/// Assigns `per_reviewer` distinct candidates to every reviewer.
///
/// A reviewer never reviews itself and, under a clustering, never reviews a
/// member of its own cluster. Received reviews are balanced to within one
/// whenever the eligibility structure allows it. Infeasible budgets fail
/// before anything is assigned.
pub fn assign_reviews<R: Rng + ?Sized>(
    reviewers: &[usize],
    candidates: &[usize],
    per_reviewer: usize,
    clustering: Option<&Clustering>,
    rng: &mut R,
) -> Result<Assignment> {
    check_distinct(reviewers, "reviewers")?;
    check_distinct(candidates, "candidates")?;
    if let Some(cl) = clustering {
        if let Some(&a) = reviewers.iter().chain(candidates).find(|&&a| a >= cl.num_agents()) {
            return Err(Error::InvalidInput(format!("agent {a} is not clustered")));
        }
    }
    let slots = reviewers.iter().copied().max().map_or(0, |m| m + 1);

    if clustering.is_none() && same_set(reviewers, candidates) {
        let lists = circulant(reviewers, candidates, per_reviewer, rng)?;
        return Ok(collect(slots, reviewers, lists));
    }

    let lists = balanced_assign(reviewers, candidates.len(), per_reviewer, rng, |r, ci| {
        let c = candidates[ci];
        c != r && clustering.is_none_or(|cl| cl.cluster_of(c) != cl.cluster_of(r))
    })?;
    let lists = lists
        .into_iter()
        .map(|l| l.into_iter().map(|ci| candidates[ci]).collect())
        .collect();
    Ok(collect(slots, reviewers, lists))
}

fn collect(slots: usize, reviewers: &[usize], lists: Vec<Vec<usize>>) -> Assignment {
    let mut reviewees = vec![Vec::new(); slots];
    for (&r, list) in reviewers.iter().zip(lists) {
        reviewees[r] = list;
    }
    Assignment::from_lists(reviewees)
}

fn check_distinct(agents: &[usize], what: &str) -> Result<()> {
    let mut sorted = agents.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!("duplicate entries in {what}")));
    }
    Ok(())
}

fn same_set(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Reviewers placed on a random cycle each review the next `m` agents.
/// Every agent receives exactly `m` reviews.
fn circulant<R: Rng + ?Sized>(
    reviewers: &[usize],
    candidates: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let s = candidates.len();
    if m > s.saturating_sub(1) {
        if let Some(&r) = reviewers.first() {
            return Err(Error::InfeasibleAssignment {
                reviewer: r,
                eligible: s.saturating_sub(1),
                needed: m,
            });
        }
    }
    let mut cycle = candidates.to_vec();
    cycle.shuffle(rng);
    let mut at = vec![0usize; reviewers.iter().copied().max().map_or(0, |x| x + 1)];
    for (p, &a) in cycle.iter().enumerate() {
        at[a] = p;
    }
    Ok(reviewers
        .iter()
        .map(|&r| (1..=m).map(|d| cycle[(at[r] + d) % s]).collect())
        .collect())
}

/// General balanced assignment over candidate indices `0..num_candidates`.
///
/// `eligible(reviewer_id, candidate_index)` encodes the constraints. Returns
/// one list of candidate indices per entry of `reviewers`.
///
/// Reviewers are filled greedily (least-loaded eligible candidates first,
/// random tie-break), then shortest-path moves shift reviews from overloaded
/// to underloaded candidates until loads differ by at most one or no move
/// exists.
pub(crate) fn balanced_assign<R, F>(
    reviewers: &[usize],
    num_candidates: usize,
    per_reviewer: usize,
    rng: &mut R,
    eligible: F,
) -> Result<Vec<Vec<usize>>>
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> bool,
{
    let nr = reviewers.len();
    let nc = num_candidates;
    let mut elig = vec![false; nr * nc];
    for (ri, &r) in reviewers.iter().enumerate() {
        let row = &mut elig[ri * nc..(ri + 1) * nc];
        let mut count = 0;
        for (ci, e) in row.iter_mut().enumerate() {
            *e = eligible(r, ci);
            count += usize::from(*e);
        }
        if count < per_reviewer {
            return Err(Error::InfeasibleAssignment {
                reviewer: r,
                eligible: count,
                needed: per_reviewer,
            });
        }
    }
    if per_reviewer == 0 || nr == 0 {
        return Ok(vec![Vec::new(); nr]);
    }

    let mut has = vec![false; nr * nc];
    let mut lists: Vec<Vec<usize>> = vec![Vec::with_capacity(per_reviewer); nr];
    let mut load = vec![0usize; nc];

    let mut order: Vec<usize> = (0..nr).collect();
    order.shuffle(rng);
    let mut bucket = Vec::with_capacity(nc);
    for &ri in &order {
        // Least-loaded eligible candidates first, uniformly among ties.
        let row = ri * nc;
        let mut need = per_reviewer;
        let mut level = 0;
        while need > 0 {
            bucket.clear();
            let mut next = usize::MAX;
            for ci in 0..nc {
                if !elig[row + ci] || has[row + ci] {
                    continue;
                }
                match load[ci].cmp(&level) {
                    std::cmp::Ordering::Equal => bucket.push(ci),
                    std::cmp::Ordering::Greater => next = next.min(load[ci]),
                    std::cmp::Ordering::Less => unreachable!("lower levels are exhausted"),
                }
            }
            let take = need.min(bucket.len());
            let (chosen, _) = bucket.partial_shuffle(rng, take);
            for &ci in chosen.iter() {
                has[row + ci] = true;
                load[ci] += 1;
                lists[ri].push(ci);
            }
            need -= take;
            if next == usize::MAX {
                break;
            }
            level = next;
        }
    }

    rebalance(nr, nc, &elig, &mut has, &mut lists, &mut load);

    for list in &mut lists {
        list.sort_unstable();
    }
    Ok(lists)
}

fn rebalance(
    nr: usize,
    nc: usize,
    elig: &[bool],
    has: &mut [bool],
    lists: &mut [Vec<usize>],
    load: &mut [usize],
) {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nc];
    let mut seen = vec![false; nc];
    let mut queue = VecDeque::new();
    loop {
        let min = *load.iter().min().unwrap_or(&0);
        let max = *load.iter().max().unwrap_or(&0);
        if max <= min + 1 {
            return;
        }
        let mut moved = false;
        for level in min..=max - 2 {
            // Multi-source BFS from candidates at `level` toward one whose
            // load is at least `level + 2`.
            parent.iter_mut().for_each(|p| *p = None);
            seen.iter_mut().for_each(|s| *s = false);
            queue.clear();
            for ci in 0..nc {
                if load[ci] == level {
                    seen[ci] = true;
                    queue.push_back(ci);
                }
            }
            let mut target = None;
            'bfs: while let Some(x) = queue.pop_front() {
                for ri in 0..nr {
                    if !elig[ri * nc + x] || has[ri * nc + x] {
                        continue;
                    }
                    for &y in &lists[ri] {
                        if seen[y] {
                            continue;
                        }
                        seen[y] = true;
                        parent[y] = Some((x, ri));
                        if load[y] >= level + 2 {
                            target = Some(y);
                            break 'bfs;
                        }
                        queue.push_back(y);
                    }
                }
            }
            if let Some(mut y) = target {
                load[y] -= 1;
                while let Some((x, ri)) = parent[y] {
                    // reviewer `ri` drops `y` and takes `x`
                    let slot = lists[ri].iter().position(|&c| c == y).expect("on path");
                    lists[ri][slot] = x;
                    has[ri * nc + y] = false;
                    has[ri * nc + x] = true;
                    y = x;
                }
                load[y] += 1;
                moved = true;
                break;
            }
        }
        if !moved {
            return;
        }
    }
}
