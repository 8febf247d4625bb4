mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use peer_select::assign::{assign_reviews, make_clusters, Clustering};
use peer_select::mechanisms::{
    cluster_shares, edp_select, grades_from_ranking, normalize_profile, partition_select,
    randomized_round, vanilla_select, GradeProfile, SelectionResult, TieBreak,
};
use peer_select::noise::{sample_profile, Dispersion, Ranking};

use common::top_k_oracle;

/// A profile of small integer grades so that means compare exactly.
fn profile_strategy(max_n: usize) -> impl Strategy<Value = (usize, GradeProfile, usize)> {
    (2..=max_n).prop_flat_map(|n| {
        let row = proptest::collection::btree_map(0..n, 0u8..6, 0..=n);
        (
            Just(n),
            proptest::collection::vec(row, n),
            1..=n,
        )
            .prop_map(|(n, rows, k)| {
                let rows = rows
                    .into_iter()
                    .map(|m: BTreeMap<usize, u8>| m.into_iter().map(|(c, g)| (c, g as f64)).collect())
                    .collect();
                (n, GradeProfile::from_rows(rows), k)
            })
    })
}

fn mean_scores(profile: &GradeProfile, n: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for row in profile.rows() {
        for &(c, g) in row {
            sum[c] += g;
            count[c] += 1;
        }
    }
    (0..n).map(|c| (count[c] > 0).then(|| sum[c] / count[c] as f64)).collect()
}

fn check_clustered(res: &SelectionResult, cl: &Clustering, k: usize) {
    assert_eq!(res.selected.len(), k);
    let per = res.per_cluster.as_ref().expect("clustered result");
    let quotas = res.quotas.as_ref().expect("quota vector");
    assert_eq!(quotas.total(), k);
    let mut flat: Vec<usize> = per.iter().flatten().copied().collect();
    flat.sort_unstable();
    assert_eq!(flat, res.selected);
    for (g, members) in per.iter().enumerate() {
        assert_eq!(members.len(), quotas[g]);
        assert!(members.iter().all(|&a| cl.cluster_of(a) == g));
    }
}

proptest! {
    #[test]
    fn vanilla_matches_sort_oracle((n, profile, k) in profile_strategy(8)) {
        let res = vanilla_select(&profile, &(0..n).collect::<Vec<_>>(), k, &TieBreak::by_index(n)).unwrap();
        prop_assert_eq!(res.selected, top_k_oracle(&mean_scores(&profile, n), k));
    }

    #[test]
    fn vanilla_ignores_affine_rescaling((n, profile, k) in profile_strategy(12), a in 1u8..7, b in 0u8..20) {
        let candidates: Vec<usize> = (0..n).collect();
        let ties = TieBreak::by_index(n);
        let base = vanilla_select(&profile, &candidates, k, &ties).unwrap();
        let scaled = profile.map_grades(|g| a as f64 * g + b as f64);
        prop_assert_eq!(base.selected, vanilla_select(&scaled, &candidates, k, &ties).unwrap().selected);
    }

    #[test]
    fn grades_decrease_along_the_ranking(order in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle(), mask in proptest::collection::vec(any::<bool>(), 30)) {
        let ranking = Ranking::new(order.clone()).unwrap();
        let reviewees: Vec<usize> = (0..30).filter(|&c| mask[c]).collect();
        let grades: BTreeMap<usize, f64> = grades_from_ranking(&ranking, &reviewees).unwrap().into_iter().collect();
        prop_assert_eq!(grades.len(), reviewees.len());
        let along: Vec<f64> = order.iter().filter_map(|c| grades.get(c).copied()).collect();
        prop_assert!(along.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn clustered_results_respect_quotas(n in 6usize..40, c in 2usize..5, m in 1usize..4, seed in any::<u64>(), p in 0.0f64..1.0) {
        prop_assume!(c <= n / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=n / 2);
        let cl = make_clusters(n, c, &mut rng).unwrap();
        let agents: Vec<usize> = (0..n).collect();
        prop_assume!(m <= n - cl.sizes().into_iter().max().unwrap());
        let a = assign_reviews(&agents, &agents, m, Some(&cl), &mut rng).unwrap();
        let rankings = sample_profile(n, Dispersion::new(p).unwrap(), &mut rng);
        let profile = GradeProfile::from_rankings(&a, &rankings).unwrap();
        let ties = TieBreak::random(n, &mut rng);

        let part = partition_select(&profile, &cl, &agents, k, &mut rng, &ties).unwrap();
        check_clustered(&part, &cl, k);
        let q = part.quotas.unwrap();
        prop_assert!(q.as_slice().iter().all(|&x| x == k / c || x == k / c + 1));

        let edp = edp_select(&profile, &cl, &agents, k, &mut rng, &ties).unwrap();
        check_clustered(&edp, &cl, k);
        if edp.repairs.is_empty() {
            let shares = cluster_shares(&normalize_profile(&profile), &cl, &agents, k);
            for (q, s) in edp.quotas.unwrap().as_slice().iter().zip(shares) {
                prop_assert!(*q == s.floor() as usize || *q == s.ceil() as usize, "{} vs {}", q, s);
            }
        }
    }

    #[test]
    fn normalized_reviewers_hand_out_one_unit((_, profile, _) in profile_strategy(10)) {
        for row in normalize_profile(&profile).rows().iter().filter(|r| !r.is_empty()) {
            let total: f64 = row.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn grade_examples() {
    let r = Ranking::new(vec![3, 0, 4, 1, 2]).unwrap();
    assert_eq!(grades_from_ranking(&r, &[0, 4]).unwrap(), vec![(0, 4.0), (4, 3.0)]);
    let id = Ranking::identity(3);
    assert_eq!(grades_from_ranking(&id, &[0, 1, 2]).unwrap(), vec![(0, 3.0), (1, 2.0), (2, 1.0)]);
    let g = grades_from_ranking(&r, &[3, 1]).unwrap();
    assert!(g.contains(&(3, 5.0)));
}

#[test]
fn vanilla_examples() {
    let ties = TieBreak::by_index(5);
    let all: Vec<usize> = (0..5).collect();
    let one = GradeProfile::from_rows(vec![vec![(0, 5.0), (1, 4.0), (2, 3.0), (3, 2.0), (4, 1.0)]]);
    assert_eq!(vanilla_select(&one, &all, 3, &ties).unwrap().selected, vec![0, 1, 2]);
    let none = GradeProfile::from_rows(vec![vec![]; 5]);
    assert_eq!(vanilla_select(&none, &all, 2, &ties).unwrap().selected, vec![0, 1]);

    // noiseless, everyone reviews everyone else
    let n = 9;
    let agents: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = assign_reviews(&agents, &agents, n - 1, None, &mut rng).unwrap();
    let profile = GradeProfile::from_rankings(&a, &vec![Ranking::identity(n); n]).unwrap();
    for k in 1..n {
        let res = vanilla_select(&profile, &agents, k, &TieBreak::random(n, &mut rng)).unwrap();
        assert_eq!(res.selected, (0..k).collect::<Vec<_>>());
    }
}

#[test]
fn partition_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let agents: Vec<usize> = (0..6).collect();
    let ties = TieBreak::by_index(6);
    let cl = Clustering::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
    // A = {0,1,2} graded by B, B = {3,4,5} graded by A
    let rows = vec![
        vec![(3, 3.0), (4, 2.0), (5, 1.0)],
        vec![(3, 3.0), (4, 2.0), (5, 1.0)],
        vec![(3, 3.0), (4, 2.0), (5, 1.0)],
        vec![(0, 3.0), (1, 2.0), (2, 1.0)],
        vec![(0, 3.0), (1, 2.0), (2, 1.0)],
        vec![(0, 3.0), (1, 2.0), (2, 1.0)],
    ];
    let profile = GradeProfile::from_rows(rows);
    let res = partition_select(&profile, &cl, &agents, 4, &mut rng, &ties).unwrap();
    assert_eq!(res.selected, vec![0, 1, 3, 4]);

    // true top 4 all in cluster 0
    let cl = Clustering::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
    let agents: Vec<usize> = (0..8).collect();
    let a = assign_reviews(&agents, &agents, 4, Some(&cl), &mut rng).unwrap();
    let profile = GradeProfile::from_rankings(&a, &vec![Ranking::identity(8); 8]).unwrap();
    let res = partition_select(&profile, &cl, &agents, 4, &mut rng, &TieBreak::by_index(8)).unwrap();
    assert_eq!(res.selected.iter().filter(|&&x| x < 4).count(), 2);

    let cl = make_clusters(30, 3, &mut rng).unwrap();
    let agents: Vec<usize> = (0..30).collect();
    let profile = GradeProfile::from_rows(vec![vec![]; 30]);
    let res = partition_select(&profile, &cl, &agents, 10, &mut rng, &TieBreak::by_index(30)).unwrap();
    let mut q = res.quotas.unwrap().0;
    q.sort_unstable();
    assert_eq!(q, vec![3, 3, 4]);
}

#[test]
fn edp_examples() {
    let p = GradeProfile::from_rows(vec![vec![(0, 3.0), (1, 1.0)], vec![(0, 0.0), (1, 0.0)]]);
    let norm = normalize_profile(&p);
    assert_eq!(norm.reviewer(0), &[(0, 0.75), (1, 0.25)]);
    assert_eq!(norm.reviewer(1), &[(0, 0.5), (1, 0.5)]);

    // points 0.5 / 0.3 / 0.2 of the total
    let cl = Clustering::new(vec![0, 1, 2], 3).unwrap();
    let rows = vec![vec![(0, 0.5), (1, 0.3), (2, 0.2)]];
    let shares = cluster_shares(&GradeProfile::from_rows(rows), &cl, &[0, 1, 2], 10);
    for (s, e) in shares.iter().zip([5.0, 3.0, 2.0]) {
        assert!((s - e).abs() < 1e-12);
    }
    let rows = vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)]];
    let shares = cluster_shares(&GradeProfile::from_rows(rows), &cl, &[0, 1, 2], 9);
    assert!(shares.iter().all(|s| (s - 3.0).abs() < 1e-12));
    let rows = vec![vec![(0, 1.0)]];
    assert_eq!(cluster_shares(&GradeProfile::from_rows(rows), &cl, &[0, 1, 2], 6), vec![6.0, 0.0, 0.0]);

    // equal-quality clusters, everyone grading alike
    let n = 12;
    let cl = Clustering::new((0..n).map(|a| a % 3).collect(), 3).unwrap();
    let agents: Vec<usize> = (0..n).collect();
    let rows = (0..n)
        .map(|r| agents.iter().filter(|&&c| c % 3 != r % 3).map(|&c| (c, 1.0)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let res = edp_select(&GradeProfile::from_rows(rows), &cl, &agents, 9, &mut rng, &TieBreak::by_index(n)).unwrap();
    assert_eq!(res.quotas.unwrap().0, vec![3, 3, 3]);

    // every point goes to cluster 0, which can hold the whole selection
    let rows = (0..n)
        .map(|r| if r % 3 == 0 { vec![] } else { agents.iter().filter(|&&c| c % 3 == 0).map(|&c| (c, 1.0 + c as f64)).collect() })
        .collect();
    let res = edp_select(&GradeProfile::from_rows(rows), &cl, &agents, 4, &mut rng, &TieBreak::by_index(n)).unwrap();
    assert_eq!(res.quotas.unwrap().0, vec![4, 0, 0]);
}

#[test]
fn rounding_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        assert_eq!(randomized_round(&[2.0, 3.0, 5.0], &mut rng).unwrap().0, vec![2, 3, 5]);
    }
    let draws = 100_000;
    let mut first = 0;
    for _ in 0..draws {
        let q = randomized_round(&[1.5, 1.5, 1.0], &mut rng).unwrap().0;
        assert!(q == vec![2, 1, 1] || q == vec![1, 2, 1], "{q:?}");
        first += usize::from(q[0] == 2);
    }
    assert!((first as f64 / draws as f64 - 0.5).abs() < 0.01);

    let draws = 200_000;
    let mut sums = [0usize; 3];
    for _ in 0..draws {
        let q = randomized_round(&[0.3, 0.3, 0.4], &mut rng).unwrap();
        assert_eq!(q.total(), 1);
        for g in 0..3 {
            sums[g] += q[g];
        }
    }
    for (s, e) in sums.iter().zip([0.3, 0.3, 0.4]) {
        assert!((*s as f64 / draws as f64 - e).abs() < 0.005);
    }
}
