//! Single- and two-stage review pipelines.
//!
//! Two-stage runs spend `f` of each reviewer's `m` reviews on all
//! candidates, accept `h` outright, eliminate `l`, and spend the remaining
//! `m - f` reviews on the survivors before the mechanism picks `k - h` of
//! them. Every agent keeps reviewing in the second stage.
//!
//! For clustered mechanisms all accept/eliminate decisions are made inside
//! clusters, and the second-stage assignment is computed over anonymous
//! per-cluster slots that are then filled with each cluster's survivors in
//! tie-break order. Which reviewers grade a cluster's survivors therefore
//! depends only on survivor counts and on that cluster's own survivors,
//! never on who survived elsewhere.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assign::{assign_reviews, balanced_assign, make_clusters, Assignment, Clustering};
use crate::error::{Error, Result};
use crate::mechanisms::{
    cluster_shares, edp_select, even_quotas_in_order, mean_scores, normalize_profile,
    order_best_first, partition_select_with_quotas, randomized_round, vanilla_select,
    GradeProfile, Mechanism, QuotaVector, SelectionResult, TieBreak,
};
use crate::noise::{sample_profile, Dispersion, Ranking};
use crate::rng::{mix, Purpose, Streams};

/// Parameters of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageParams {
    /// Number of agents.
    pub n: usize,
    /// Number to select.
    pub k: usize,
    /// Reviews per reviewer, over both stages.
    pub m: usize,
    /// First-stage reviews per reviewer; 0 means a single stage.
    pub f: usize,
    /// Accepted outright after stage one.
    pub h: usize,
    /// Eliminated after stage one.
    pub l: usize,
    /// Cluster count for clustered mechanisms.
    pub c: usize,
    pub phi: Dispersion,
}

impl TwoStageParams {
    pub fn single_stage(n: usize, k: usize, m: usize, c: usize, phi: Dispersion) -> Self {
        TwoStageParams { n, k, m, f: 0, h: 0, l: 0, c, phi }
    }

    pub fn is_two_stage(&self) -> bool {
        self.f > 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let TwoStageParams { n, k, m, f, h, l, c, .. } = *self;
        if k == 0 || k >= n {
            return bad(format!("need 0 < k < n (k={k}, n={n})"));
        }
        if m == 0 {
            return bad("need at least one review per reviewer".into());
        }
        if c == 0 || c > n {
            return bad(format!("need 1 <= c <= n (c={c})"));
        }
        if f == 0 {
            if h != 0 || l != 0 {
                return bad(format!("single stage (f=0) cannot accept or eliminate (h={h}, l={l})"));
            }
            return Ok(());
        }
        if f >= m {
            return bad(format!("first stage must use fewer than m reviews (f={f}, m={m})"));
        }
        if h > k {
            return bad(format!("cannot accept more than k outright (h={h}, k={k})"));
        }
        if l > n - k {
            return bad(format!("cannot eliminate more than n-k (l={l}, n-k={})", n - k));
        }
        Ok(())
    }
}

/// What happened in stage one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTrace {
    pub stage1_scores: BTreeMap<usize, f64>,
    pub accepted_outright: Vec<usize>,
    pub eliminated: Vec<usize>,
    pub survivors: Vec<usize>,
    pub stage2_selected: Vec<usize>,
    pub accept_quotas: Option<QuotaVector>,
    pub eliminate_quotas: Option<QuotaVector>,
    pub stage2_quotas: Option<QuotaVector>,
}

/// Pipeline switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep survivors' stage-one grades in the final decision.
    pub pool_stage1: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { pool_stage1: true }
    }
}

/// Everything random about one trial, fixed before any mechanism runs.
#[derive(Debug, Clone)]
pub struct Trial {
    /// Inverse of each reviewer's reported ranking.
    positions: Vec<Vec<usize>>,
    clustering: Option<Clustering>,
    ties: TieBreak,
    streams: Streams,
}

impl Trial {
    /// `streams` feeds assignments, quota permutations and rounding.
    pub fn new(
        rankings: &[Ranking],
        clustering: Option<Clustering>,
        ties: TieBreak,
        streams: Streams,
    ) -> Result<Self> {
        let n = rankings.len();
        if let Some(r) = rankings.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "reviewer {r} ranks {} agents, expected {n}",
                rankings[r].len()
            )));
        }
        if let Some(cl) = &clustering {
            if cl.num_agents() != n {
                return Err(Error::InvalidInput(format!(
                    "clustering covers {} agents, expected {n}",
                    cl.num_agents()
                )));
            }
        }
        Ok(Trial {
            positions: rankings.iter().map(Ranking::positions).collect(),
            clustering,
            ties,
            streams,
        })
    }

    /// Samples rankings, clusters (when `c` is given) and tie priorities
    /// from `streams`.
    pub fn sample(n: usize, c: Option<usize>, phi: Dispersion, streams: Streams) -> Result<Self> {
        let rankings = sample_profile(n, phi, &mut streams.rng(Purpose::Rankings));
        let clustering = c
            .map(|c| make_clusters(n, c, &mut streams.rng(Purpose::Clusters)))
            .transpose()?;
        let ties = TieBreak::random(n, &mut streams.rng(Purpose::Ties));
        Trial::new(&rankings, clustering, ties, streams)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn clustering(&self) -> Option<&Clustering> {
        self.clustering.as_ref()
    }

    pub fn ties(&self) -> &TieBreak {
        &self.ties
    }

    pub fn streams(&self) -> &Streams {
        &self.streams
    }

    /// Hash of the clustering, reports and tie priorities. Two runs with
    /// equal fingerprints saw identical inputs.
    pub fn fingerprint(&self) -> u64 {
        let fold = |h: u64, x: usize| (h.rotate_left(5) ^ x as u64).wrapping_mul(0x517C_C1B7_2722_0A95);
        let mut h = fold(0, self.n());
        if let Some(cl) = &self.clustering {
            h = cl.labels().iter().fold(fold(h, cl.num_clusters()), |h, &g| fold(h, g));
        }
        h = (0..self.n()).fold(h, |h, a| fold(h, self.ties.rank(a)));
        h = self.positions.iter().flatten().fold(h, |h, &p| fold(h, p));
        mix(&[h])
    }

    /// Replaces `agent`'s reported ranking, everything else held fixed.
    pub fn set_report(&mut self, agent: usize, ranking: &Ranking) -> Result<()> {
        if ranking.len() != self.n() || agent >= self.n() {
            return Err(Error::InvalidInput(format!("bad report for agent {agent}")));
        }
        self.positions[agent] = ranking.positions();
        Ok(())
    }

    fn grade(&self, assignment: &Assignment) -> Result<GradeProfile> {
        GradeProfile::from_positions(assignment, &self.positions)
    }

    fn clustering_for(&self, mechanism: Mechanism, params: &TwoStageParams) -> Result<Option<&Clustering>> {
        if !mechanism.is_clustered() {
            return Ok(None);
        }
        let cl = self.clustering.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("{mechanism} needs a clustering"))
        })?;
        if cl.num_clusters() != params.c {
            return Err(Error::InvalidInput(format!(
                "trial has {} clusters but parameters ask for {}",
                cl.num_clusters(),
                params.c
            )));
        }
        Ok(Some(cl))
    }
}

fn check_trial(params: &TwoStageParams, trial: &Trial) -> Result<()> {
    params.validate()?;
    if trial.n() != params.n {
        return Err(Error::InvalidInput(format!(
            "trial has {} agents but parameters ask for {}",
            trial.n(),
            params.n
        )));
    }
    Ok(())
}

/// All `m` reviews in one round over every candidate.
pub fn run_single_stage(
    mechanism: Mechanism,
    params: &TwoStageParams,
    trial: &Trial,
) -> Result<SelectionResult> {
    check_trial(params, trial)?;
    let clustering = trial.clustering_for(mechanism, params)?;
    let agents: Vec<usize> = (0..params.n).collect();
    let assignment = assign_reviews(
        &agents,
        &agents,
        params.m,
        clustering,
        &mut trial.streams.rng(Purpose::AssignStage1),
    )?;
    let profile = trial.grade(&assignment)?;
    select(mechanism, &profile, clustering, &agents, params.k, trial, &mut QuotaDraws::new(trial))
}

/// Random draws shared by the quota logic of one run.
struct QuotaDraws {
    quotas: rand_chacha::ChaCha8Rng,
    rounding: rand_chacha::ChaCha8Rng,
}

impl QuotaDraws {
    fn new(trial: &Trial) -> Self {
        QuotaDraws {
            quotas: trial.streams.rng(Purpose::Quotas),
            rounding: trial.streams.rng(Purpose::Rounding),
        }
    }

    fn cluster_order(&mut self, c: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..c).collect();
        order.shuffle(&mut self.quotas);
        order
    }
}

fn select(
    mechanism: Mechanism,
    profile: &GradeProfile,
    clustering: Option<&Clustering>,
    candidates: &[usize],
    k: usize,
    trial: &Trial,
    draws: &mut QuotaDraws,
) -> Result<SelectionResult> {
    match (mechanism, clustering) {
        (Mechanism::Vanilla, _) => vanilla_select(profile, candidates, k, &trial.ties),
        (Mechanism::Partition, Some(cl)) => {
            let order = draws.cluster_order(cl.num_clusters());
            let quotas = even_quotas_in_order(k, &order);
            partition_select_with_quotas(profile, cl, candidates, quotas, &trial.ties)
        }
        (Mechanism::ExactDollarPartition, Some(cl)) => {
            edp_select(profile, cl, candidates, k, &mut draws.rounding, &trial.ties)
        }
        (m, None) => Err(Error::InvalidInput(format!("{m} needs a clustering"))),
    }
}

/// Runs one or two stages depending on `params.f`.
pub fn run(
    mechanism: Mechanism,
    params: &TwoStageParams,
    trial: &Trial,
    options: RunOptions,
) -> Result<(SelectionResult, Option<StageTrace>)> {
    if params.is_two_stage() {
        let (res, trace) = run_two_stage(mechanism, params, trial, options)?;
        Ok((res, Some(trace)))
    } else {
        Ok((run_single_stage(mechanism, params, trial)?, None))
    }
}

/// Stage-one decisions for one run.
struct Stage1Plan {
    scores: BTreeMap<usize, f64>,
    accepted: Vec<usize>,
    eliminated: Vec<usize>,
    survivors: Vec<usize>,
    accept_quotas: Option<QuotaVector>,
    eliminate_quotas: Option<QuotaVector>,
    /// Seats left for stage two, per cluster (Partition only).
    stage2_quotas: Option<QuotaVector>,
}

/// Stage-one ordering of candidates: one global order for Vanilla, one
/// order per cluster (best first) for clustered mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage1Order {
    Global(Vec<usize>),
    PerCluster(Vec<Vec<usize>>),
}

/// Orders candidates by stage-one score. Vanilla and Partition use mean raw
/// grades; EDP uses mean normalized grades. Clustered mechanisms never
/// compare candidates across clusters.
pub fn stage1_rank(
    mechanism: Mechanism,
    profile: &GradeProfile,
    clustering: Option<&Clustering>,
    candidates: &[usize],
    ties: &TieBreak,
) -> Result<Stage1Order> {
    let (order, _) = stage1_scores(mechanism, profile, candidates, ties);
    match (mechanism, clustering) {
        (Mechanism::Vanilla, _) => Ok(Stage1Order::Global(order)),
        (_, Some(cl)) => Ok(Stage1Order::PerCluster(cl.group(order))),
        (m, None) => Err(Error::InvalidInput(format!("{m} needs a clustering"))),
    }
}

fn stage1_scores(
    mechanism: Mechanism,
    profile: &GradeProfile,
    candidates: &[usize],
    ties: &TieBreak,
) -> (Vec<usize>, BTreeMap<usize, f64>) {
    let mut scored = if mechanism == Mechanism::ExactDollarPartition {
        mean_scores(&normalize_profile(&profile.restricted(candidates)), candidates)
    } else {
        mean_scores(profile, candidates)
    };
    let scores = scored.iter().map(|&(c, s, _)| (c, s)).collect();
    order_best_first(&mut scored, ties);
    (scored.into_iter().map(|x| x.0).collect(), scores)
}

/// Moves seats away from clusters over `capacity`, to clusters with room in
/// ascending id order.
fn cap_quotas(quotas: &mut QuotaVector, capacity: &[usize]) -> Result<()> {
    for g in 0..quotas.len() {
        while quotas.0[g] > capacity[g] {
            let to = (0..quotas.len())
                .find(|&h| quotas.0[h] < capacity[h])
                .ok_or(Error::InfeasibleQuota {
                    cluster: g,
                    quota: quotas.0[g],
                    available: capacity[g],
                })?;
            quotas.0[g] -= 1;
            quotas.0[to] += 1;
        }
    }
    Ok(())
}

fn plan_stage1(
    mechanism: Mechanism,
    params: &TwoStageParams,
    profile: &GradeProfile,
    clustering: Option<&Clustering>,
    trial: &Trial,
    draws: &mut QuotaDraws,
) -> Result<Stage1Plan> {
    let candidates: Vec<usize> = (0..params.n).collect();
    let (order, scores) = stage1_scores(mechanism, profile, &candidates, &trial.ties);
    let (h, l) = (params.h, params.l);

    let Some(cl) = clustering else {
        let accepted = order[..h].to_vec();
        let eliminated = order[order.len() - l..].to_vec();
        let survivors = order[h..order.len() - l].to_vec();
        return Ok(Stage1Plan {
            scores,
            accepted: sorted(accepted),
            eliminated: sorted(eliminated),
            survivors: sorted(survivors),
            accept_quotas: None,
            eliminate_quotas: None,
            stage2_quotas: None,
        });
    };

    let c = cl.num_clusters();
    let sizes = cl.sizes();
    let (accept, eliminate, stage2) = match mechanism {
        Mechanism::Partition => {
            // Final seats per cluster; accepted seats come out of them.
            let order = draws.cluster_order(c);
            let seats = even_quotas_in_order(params.k, &order);
            let accept = even_quotas_in_order(h, &order);
            let mut eliminate = even_quotas_in_order(l, &draws.cluster_order(c));
            let room: Vec<usize> = (0..c).map(|g| sizes[g] - seats[g]).collect();
            cap_quotas(&mut eliminate, &room)?;
            let stage2 = QuotaVector((0..c).map(|g| seats[g] - accept[g]).collect());
            (accept, eliminate, Some(stage2))
        }
        Mechanism::ExactDollarPartition => {
            // Accept in proportion to each cluster's seat share, eliminate
            // in proportion to its expected number of unselected members.
            let normalized = normalize_profile(profile);
            let shares = cluster_shares(&normalized, cl, &candidates, params.k);
            let k = params.k as f64;
            let accept_shares: Vec<f64> = shares.iter().map(|s| h as f64 * s / k).collect();
            let mut accept = randomized_round(&accept_shares, &mut draws.rounding)?;
            cap_quotas(&mut accept, &sizes)?;

            let weights: Vec<f64> = (0..c).map(|g| (sizes[g] as f64 - shares[g]).max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let elim_shares: Vec<f64> = if total > 0.0 {
                weights.iter().map(|w| l as f64 * w / total).collect()
            } else {
                vec![l as f64 / c as f64; c]
            };
            let mut eliminate = randomized_round(&elim_shares, &mut draws.rounding)?;
            let room: Vec<usize> = (0..c).map(|g| sizes[g] - accept[g]).collect();
            cap_quotas(&mut eliminate, &room)?;
            (accept, eliminate, None)
        }
        Mechanism::Vanilla => unreachable!("vanilla has no clustering here"),
    };

    let mut accepted = Vec::new();
    let mut eliminated = Vec::new();
    let mut survivors = Vec::new();
    for (g, members) in cl.group(order).into_iter().enumerate() {
        let (a, e) = (accept[g], eliminate[g]);
        let keep_end = members.len() - e;
        accepted.extend_from_slice(&members[..a]);
        survivors.extend_from_slice(&members[a..keep_end]);
        eliminated.extend_from_slice(&members[keep_end..]);
    }
    Ok(Stage1Plan {
        scores,
        accepted: sorted(accepted),
        eliminated: sorted(eliminated),
        survivors: sorted(survivors),
        accept_quotas: Some(accept),
        eliminate_quotas: Some(eliminate),
        stage2_quotas: stage2,
    })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Second-stage assignment for clustered mechanisms over per-cluster slots.
fn assign_stage2_slots<R: Rng + ?Sized>(
    cl: &Clustering,
    survivors: &[usize],
    per_reviewer: usize,
    ties: &TieBreak,
    rng: &mut R,
) -> Result<Assignment> {
    let n = cl.num_agents();
    let mut slot_agent = Vec::with_capacity(survivors.len());
    let mut slot_cluster = Vec::with_capacity(survivors.len());
    for (g, members) in cl.group(survivors.iter().copied()).into_iter().enumerate() {
        for a in ties.sorted(&members) {
            slot_agent.push(a);
            slot_cluster.push(g);
        }
    }
    let reviewers: Vec<usize> = (0..n).collect();
    let lists = balanced_assign(&reviewers, slot_agent.len(), per_reviewer, rng, |r, s| {
        slot_cluster[s] != cl.cluster_of(r)
    })?;
    Ok(Assignment::from_lists(
        lists
            .into_iter()
            .map(|l| l.into_iter().map(|s| slot_agent[s]).collect())
            .collect(),
    ))
}

/// The full two-stage pipeline. With `f = 0` this is a single-stage run
/// whose trace has every candidate surviving.
pub fn run_two_stage(
    mechanism: Mechanism,
    params: &TwoStageParams,
    trial: &Trial,
    options: RunOptions,
) -> Result<(SelectionResult, StageTrace)> {
    check_trial(params, trial)?;
    if !params.is_two_stage() {
        let res = run_single_stage(mechanism, params, trial)?;
        let trace = StageTrace {
            stage1_scores: res.scores.clone(),
            survivors: (0..params.n).collect(),
            stage2_selected: res.selected.clone(),
            stage2_quotas: res.quotas.clone(),
            ..StageTrace::default()
        };
        return Ok((res, trace));
    }
    let clustering = trial.clustering_for(mechanism, params)?;
    let agents: Vec<usize> = (0..params.n).collect();
    let mut draws = QuotaDraws::new(trial);

    let first = assign_reviews(
        &agents,
        &agents,
        params.f,
        clustering,
        &mut trial.streams.rng(Purpose::AssignStage1),
    )?;
    let profile1 = trial.grade(&first)?;
    let plan = plan_stage1(mechanism, params, &profile1, clustering, trial, &mut draws)?;

    let rest = params.m - params.f;
    let mut rng2 = trial.streams.rng(Purpose::AssignStage2);
    let second = match clustering {
        None => assign_reviews(&agents, &plan.survivors, rest, None, &mut rng2)?,
        Some(cl) => assign_stage2_slots(cl, &plan.survivors, rest, &trial.ties, &mut rng2)?,
    };
    let profile2 = trial.grade(&second)?;
    let pooled = if options.pool_stage1 {
        profile1.pooled(&profile2)
    } else {
        profile2
    }
    .restricted(&plan.survivors);

    let remaining = params.k - params.h;
    let stage2 = match (mechanism, clustering, &plan.stage2_quotas) {
        (Mechanism::Partition, Some(cl), Some(q)) => {
            partition_select_with_quotas(&pooled, cl, &plan.survivors, q.clone(), &trial.ties)?
        }
        _ => select(mechanism, &pooled, clustering, &plan.survivors, remaining, trial, &mut draws)?,
    };

    let mut selected = plan.accepted.clone();
    selected.extend_from_slice(&stage2.selected);
    selected.sort_unstable();
    let per_cluster = clustering.map(|cl| {
        let mut groups = cl.group(selected.iter().copied());
        groups.iter_mut().for_each(|g| g.sort_unstable());
        groups
    });
    let trace = StageTrace {
        stage1_scores: plan.scores,
        accepted_outright: plan.accepted,
        eliminated: plan.eliminated,
        survivors: plan.survivors,
        stage2_selected: stage2.selected.clone(),
        accept_quotas: plan.accept_quotas,
        eliminate_quotas: plan.eliminate_quotas,
        stage2_quotas: stage2.quotas.clone(),
    };
    let result = SelectionResult {
        selected,
        per_cluster,
        scores: stage2.scores,
        quotas: stage2.quotas,
        repairs: stage2.repairs,
    };
    Ok((result, trace))
}
