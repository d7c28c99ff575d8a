//! Baselines: cluster-only (CLT), uniform random and exhaustive search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dust::{cluster_medoids, rank_candidates};
use super::pairwise::Pairwise;
use super::{check_inputs, Algorithm, DiverseResult, DiversifyParams, SelectedTuple};
use crate::error::{Error, Result};
use crate::serialize_embed::{Distance, EmbeddingMatrix};

/// Largest number of subsets the exhaustive search will enumerate.
pub const BRUTE_FORCE_GUARD: u128 = 1_000_000;

/// Clusters the whole pool into exactly `k` groups and returns the ranked
/// medoids; no pruning, no over-clustering.
pub fn clt(queries: &EmbeddingMatrix, tuples: &EmbeddingMatrix, params: &DiversifyParams) -> Result<DiverseResult> {
    check_inputs(queries, tuples, params)?;
    let all: Vec<usize> = (0..tuples.len()).collect();
    let medoids = cluster_medoids(tuples, &all, params.k, params.distance);
    let ranked = rank_candidates(queries, tuples, &medoids, params.distance);
    Ok(DiverseResult {
        algorithm: Algorithm::Clt,
        params: params.clone(),
        selected: ranked
            .into_iter()
            .map(|r| SelectedTuple {
                id: tuples.id(r.index).clone(),
                index: r.index,
                rank_score: r.rank_score,
                tie_score: r.tie_score,
            })
            .collect(),
    })
}

/// `k` distinct pool rows drawn uniformly; the same seed gives the same draw.
pub fn random_select(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BruteForceObjective {
    /// Average diversity: `(Σ_q Σ_t δ + Σ_{i<j} δ(t_i, t_j)) / (n + k)`.
    MaxSum,
    /// Min diversity: smallest query-to-tuple or tuple-to-tuple distance.
    MaxMin,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u128::MAX / 1_000_000 {
            return u128::MAX;
        }
    }
    c
}

/// Exhaustive optimum of `objective` over all `k`-subsets of the pool.
/// Subsets are visited in lexicographic order and only a strictly better
/// score replaces the incumbent. Fails fast when `C(|pool|, k)` exceeds
/// [`BRUTE_FORCE_GUARD`].
pub fn brute_force_best(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    k: usize,
    objective: BruteForceObjective,
    distance: Distance,
) -> Result<(Vec<usize>, f64)> {
    let params = DiversifyParams {
        k,
        s: None,
        distance,
        ..DiversifyParams::default()
    };
    check_inputs(queries, tuples, &params)?;
    let n = tuples.len();
    let count = binomial(n, k);
    if count > BRUTE_FORCE_GUARD {
        return Err(Error::GuardExceeded(count));
    }
    let cross = Pairwise::new(distance, tuples, queries);
    let within = Pairwise::within(distance, tuples);
    let q_sum: Vec<f64> = (0..n).map(|t| (0..queries.len()).map(|q| cross.get(t, q)).sum()).collect();
    let q_min: Vec<f64> = (0..n)
        .map(|t| (0..queries.len()).map(|q| cross.get(t, q)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut pair = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            pair[i * n + j] = within.get(i, j);
        }
    }
    let denom = (queries.len() + k) as f64;
    let score = |c: &[usize]| -> f64 {
        match objective {
            BruteForceObjective::MaxSum => {
                let mut s: f64 = c.iter().map(|&i| q_sum[i]).sum();
                for (a, &i) in c.iter().enumerate() {
                    for &j in &c[a + 1..] {
                        s += pair[i * n + j];
                    }
                }
                s / denom
            }
            BruteForceObjective::MaxMin => {
                let mut m = c.iter().map(|&i| q_min[i]).fold(f64::INFINITY, f64::min);
                for (a, &i) in c.iter().enumerate() {
                    for &j in &c[a + 1..] {
                        m = m.min(pair[i * n + j]);
                    }
                }
                m
            }
        }
    };
    let mut c: Vec<usize> = (0..k).collect();
    let mut best = (score(&c), c.clone());
    loop {
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
        let s = score(&c);
        if s > best.0 {
            best = (s, c.clone());
        }
    }
    Ok((best.1, best.0))
}
