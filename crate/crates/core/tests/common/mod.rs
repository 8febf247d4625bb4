//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use peer_select::noise::Ranking;

/// Discordant pairs by direct comparison of every pair.
pub fn brute_kendall(a: &[usize], b: &[usize]) -> u64 {
    let n = a.len();
    let (mut pa, mut pb) = (vec![0; n], vec![0; n]);
    for i in 0..n {
        pa[a[i]] = i;
        pb[b[i]] = i;
    }
    let mut count = 0;
    for x in 0..n {
        for y in x + 1..n {
            if (pa[x] < pa[y]) != (pb[x] < pb[y]) {
                count += 1;
            }
        }
    }
    count
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Lexicographic index of a permutation of `0..n`.
pub fn perm_index(p: &[usize]) -> usize {
    let n = p.len();
    let mut idx = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        idx = idx * (n - i) + smaller;
    }
    idx
}

pub fn random_ranking<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Ranking {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ranking::new(order).unwrap()
}

/// `P(Binomial(m, p) >= v)` summed term by term.
pub fn binomial_tail(m: u64, p: f64, v: u64) -> f64 {
    let mut total = 0.0;
    for j in v..=m {
        let mut c = 1.0;
        for i in 0..j {
            c *= (m - i) as f64 / (i + 1) as f64;
        }
        total += c * p.powi(j as i32) * (1.0 - p).powi((m - j) as i32);
    }
    total
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Sorted selection by descending score, then ascending index. Unscored
/// candidates come last.
pub fn top_k_oracle(scores: &[Option<f64>], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    let mut top = idx[..k].to_vec();
    top.sort_unstable();
    top
}
