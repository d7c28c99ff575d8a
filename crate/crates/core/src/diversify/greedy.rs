//! Max-sum relevance/diversity selection: the GMC greedy construction and
//! the GNE randomized-restart local search.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::check_inputs;
use super::pairwise::{query_scores, Pairwise};
use super::DiversifyParams;
use crate::error::Result;
use crate::serialize_embed::{Distance, EmbeddingMatrix};

/// Lambda under which the GMC objective is proportional to the average
/// diversity score for `k` picks against `n_queries` query tuples.
pub fn max_sum_lambda(k: usize, n_queries: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let km1 = (k - 1) as f64;
    km1 / (km1 + 2.0 * n_queries as f64)
}

/// `(k - 1)(1 - λ) Σ rel(t) + 2λ Σ_{i<j} δ(t_i, t_j)` where `rel` is the
/// mean distance to the query tuples.
pub fn gmc_objective(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    selected: &[usize],
    lambda: f64,
    distance: Distance,
) -> f64 {
    let cross = Pairwise::new(distance, tuples, queries);
    let within = Pairwise::within(distance, tuples);
    let rel: Vec<f64> = selected
        .iter()
        .map(|&i| query_scores(&cross, i, queries.len()).1)
        .collect();
    objective(selected, &rel, &within, lambda)
}

fn objective(selected: &[usize], rel: &[f64], pw: &Pairwise<'_>, lambda: f64) -> f64 {
    let k = selected.len();
    let mut pairs = 0.0;
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            pairs += pw.get(i, j);
        }
    }
    let rel_sum: f64 = rel.iter().sum();
    k.saturating_sub(1) as f64 * (1.0 - lambda) * rel_sum + 2.0 * lambda * pairs
}

struct State<'a> {
    k: usize,
    lambda: f64,
    rel: Vec<f64>,
    pw: Pairwise<'a>,
    /// Per tuple, its `k - 1` largest distances to other tuples, descending.
    top: Vec<Vec<(f64, usize)>>,
}

impl<'a> State<'a> {
    fn new(queries: &'a EmbeddingMatrix, tuples: &'a EmbeddingMatrix, params: &DiversifyParams) -> Self {
        let n = tuples.len();
        let k = params.k;
        let cross = Pairwise::new(params.distance, tuples, queries);
        let rel = (0..n).map(|i| query_scores(&cross, i, queries.len()).1).collect();
        let pw = Pairwise::within(params.distance, tuples);
        let keep = k.saturating_sub(1);
        let mut top = Vec::with_capacity(n);
        let mut row: Vec<(f64, usize)> = Vec::with_capacity(n);
        for i in 0..n {
            if keep == 0 {
                top.push(Vec::new());
                continue;
            }
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| (pw.get(i, j), j)));
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
            if row.len() > keep {
                row.select_nth_unstable_by(keep - 1, by_dist);
                row.truncate(keep);
            }
            row.sort_by(by_dist);
            top.push(row.clone());
        }
        Self {
            k,
            lambda: params.lambda,
            rel,
            pw,
            top,
        }
    }

    fn n(&self) -> usize {
        self.rel.len()
    }

    /// Marginal contribution of `t` given `picked` selected tuples whose
    /// distances to `t` sum to `sum_r`.
    fn mmc(&self, t: usize, picked: usize, sum_r: f64, in_r: &[bool]) -> f64 {
        if self.k == 1 {
            return self.rel[t];
        }
        let want = self.k - picked - 1;
        let future: f64 = self.top[t]
            .iter()
            .filter(|(_, j)| !in_r[*j])
            .take(want)
            .map(|(d, _)| d)
            .sum();
        (1.0 - self.lambda) * self.rel[t] + self.lambda / (self.k - 1) as f64 * (sum_r + future)
    }

    fn add(&self, t: usize, sum_r: &mut [f64]) {
        for (u, s) in sum_r.iter_mut().enumerate() {
            *s += self.pw.get(u, t);
        }
    }

    /// Greedy construction; `choose` picks from the candidates sorted by
    /// decreasing marginal contribution.
    fn construct(&self, mut choose: impl FnMut(&[(f64, usize)]) -> usize) -> (Vec<usize>, Vec<f64>) {
        let n = self.n();
        let mut in_r = vec![false; n];
        let mut sum_r = vec![0.0; n];
        let mut selected = Vec::with_capacity(self.k);
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n);
        for picked in 0..self.k {
            scored.clear();
            scored.extend(
                (0..n)
                    .filter(|&t| !in_r[t])
                    .map(|t| (self.mmc(t, picked, sum_r[t], &in_r), t)),
            );
            let pos = choose(&scored);
            let t = scored[pos].1;
            in_r[t] = true;
            selected.push(t);
            self.add(t, &mut sum_r);
        }
        (selected, sum_r)
    }

    /// Best-improvement swaps until no swap raises the objective.
    fn local_search(&self, selected: &mut [usize], sum_r: &mut [f64]) {
        let n = self.n();
        let k = self.k as f64;
        let mut in_r = vec![false; n];
        selected.iter().for_each(|&i| in_r[i] = true);
        loop {
            let mut best = (1e-12, usize::MAX, usize::MAX);
            for (slot, &i) in selected.iter().enumerate() {
                for j in (0..n).filter(|&j| !in_r[j]) {
                    let delta = (k - 1.0) * (1.0 - self.lambda) * (self.rel[j] - self.rel[i])
                        + 2.0 * self.lambda * ((sum_r[j] - self.pw.get(j, i)) - sum_r[i]);
                    if delta > best.0 {
                        best = (delta, slot, j);
                    }
                }
            }
            if best.1 == usize::MAX {
                break;
            }
            let (slot, j) = (best.1, best.2);
            let i = selected[slot];
            for (u, s) in sum_r.iter_mut().enumerate() {
                *s += self.pw.get(u, j) - self.pw.get(u, i);
            }
            in_r[i] = false;
            in_r[j] = true;
            selected[slot] = j;
        }
    }

    fn objective(&self, selected: &[usize]) -> f64 {
        let rel: Vec<f64> = selected.iter().map(|&i| self.rel[i]).collect();
        objective(selected, &rel, &self.pw, self.lambda)
    }
}

fn argmax(scored: &[(f64, usize)]) -> usize {
    let mut best = 0;
    for (pos, s) in scored.iter().enumerate().skip(1) {
        if s.0 > scored[best].0 {
            best = pos;
        }
    }
    best
}

/// Greedy marginal contribution: `k` rounds, each adding the tuple with
/// the largest marginal contribution (ties to the lowest pool row).
pub fn gmc(queries: &EmbeddingMatrix, tuples: &EmbeddingMatrix, params: &DiversifyParams) -> Result<Vec<usize>> {
    check_inputs(queries, tuples, params)?;
    let state = State::new(queries, tuples, params);
    Ok(state.construct(argmax).0)
}

/// Greedy randomized construction from a restricted candidate list followed
/// by swap local search, repeated `iterations` times; keeps the best
/// objective (earliest on ties). Deterministic for a fixed seed.
pub fn gne(queries: &EmbeddingMatrix, tuples: &EmbeddingMatrix, params: &DiversifyParams) -> Result<Vec<usize>> {
    check_inputs(queries, tuples, params)?;
    let state = State::new(queries, tuples, params);
    if params.k == 1 {
        // The objective is identically zero; fall back to relevance.
        return Ok(state.construct(argmax).0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..params.iterations {
        let (mut selected, mut sum_r) = state.construct(|scored| {
            let mut order: Vec<usize> = (0..scored.len()).collect();
            let by_score = |&a: &usize, &b: &usize| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b));
            let rcl = params.rcl_size.min(order.len());
            if rcl < order.len() {
                order.select_nth_unstable_by(rcl - 1, by_score);
                order.truncate(rcl);
            }
            order.sort_by(by_score);
            order[rng.gen_range(0..rcl)]
        });
        state.local_search(&mut selected, &mut sum_r);
        let f = state.objective(&selected);
        if best.as_ref().map_or(true, |(bf, _)| f > *bf) {
            best = Some((f, selected));
        }
    }
    Ok(best.expect("at least one iteration").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lake_model::TupleRef;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            (0..rows.len()).map(|i| TupleRef::new("t", i)).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            "test",
        )
        .unwrap()
    }

    fn params(k: usize, lambda: f64) -> DiversifyParams {
        DiversifyParams {
            k,
            s: None,
            lambda,
            distance: Distance::Euclidean,
            ..DiversifyParams::default()
        }
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 0..n {
            for mut rest in combinations(n - first - 1, k - 1) {
                rest.iter_mut().for_each(|x| *x += first + 1);
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    #[test]
    fn gmc_steps_on_a_line() {
        // Query at 0, pool at 1, 2, 3, 10, 11 on a line; λ = 0.5, k = 3.
        // Step 1: mmc(t) = 0.5 rel + 0.25 (two largest distances to others).
        //   t=10: 5 + 0.25 (9 + 8) = 9.25; t=11: 5.5 + 0.25 (10 + 9) = 10.25;
        //   t=1: 0.5 + 0.25 (10 + 9) = 5.25.  Pick 11.
        // Step 2: mmc(t) = 0.5 rel + 0.25 (δ(t, 11) + largest other).
        //   t=1: 0.5 + 0.25 (10 + 9) = 5.25; t=10: 5 + 0.25 (1 + 9) = 7.5;
        //   t=2: 1 + 0.25 (9 + 8) = 5.25.  Pick 10.
        // Step 3: mmc(t) = 0.5 rel + 0.25 (δ(t, 11) + δ(t, 10)).
        //   t=1: 0.5 + 0.25 (19) = 5.25; t=3: 1.5 + 0.25 (15) = 5.25;
        //   t=2: 1 + 0.25 (17) = 5.25. All tie; the lowest row wins.
        let q = matrix(&[&[0.0]]);
        let t = matrix(&[&[1.0], &[2.0], &[3.0], &[10.0], &[11.0]]);
        assert_eq!(gmc(&q, &t, &params(3, 0.5)).unwrap(), vec![4, 3, 0]);
    }

    #[test]
    fn k_one_picks_most_relevant() {
        let q = matrix(&[&[0.0]]);
        let t = matrix(&[&[1.0], &[-4.0], &[3.0]]);
        assert_eq!(gmc(&q, &t, &params(1, 0.5)).unwrap(), vec![1]);
        assert_eq!(gne(&q, &t, &params(1, 0.5)).unwrap(), vec![1]);
    }

    #[test]
    fn objective_matches_definition() {
        let q = matrix(&[&[0.0], &[1.0]]);
        let t = matrix(&[&[2.0], &[5.0], &[-1.0]]);
        // rel = (1.5, 4.5, 1.5); pairs 3 + 3 + 6 = 12; k = 3, λ = 0.25.
        let f = gmc_objective(&q, &t, &[0, 1, 2], 0.25, Distance::Euclidean);
        assert!((f - (2.0 * 0.75 * 7.5 + 0.5 * 12.0)).abs() < 1e-12);
    }

    #[test]
    fn gne_reaches_exhaustive_objective_on_small_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..20 {
            let qs: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let ts: Vec<Vec<f64>> = (0..9).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let q = matrix(&qs.iter().map(Vec::as_slice).collect::<Vec<_>>());
            let t = matrix(&ts.iter().map(Vec::as_slice).collect::<Vec<_>>());
            let mut p = params(3, 0.5);
            p.iterations = 50;
            let best = combinations(9, 3)
                .iter()
                .map(|c| gmc_objective(&q, &t, c, 0.5, Distance::Euclidean))
                .fold(f64::NEG_INFINITY, f64::max);
            let got = gmc_objective(&q, &t, &gne(&q, &t, &p).unwrap(), 0.5, Distance::Euclidean);
            assert!(got <= best + 1e-9);
            if got >= best - 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 16, "hits {hits}");
    }

    #[test]
    fn gne_is_deterministic_per_seed() {
        let q = matrix(&[&[0.0, 0.0]]);
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let t = matrix(&rows.iter().map(Vec::as_slice).collect::<Vec<_>>());
        let p = params(5, 0.5);
        assert_eq!(gne(&q, &t, &p).unwrap(), gne(&q, &t, &p).unwrap());
    }

    #[test]
    fn max_sum_lambda_makes_objective_proportional() {
        // With λ = (k-1)/(k-1+2n), F = 2(k-1)/(k-1+2n) · (Σ_q Σ_t δ + Σ_pairs δ).
        let q = matrix(&[&[0.0], &[1.0]]);
        let t = matrix(&[&[2.0], &[5.0], &[-1.0]]);
        let lam = max_sum_lambda(3, 2);
        let f = gmc_objective(&q, &t, &[0, 1, 2], lam, Distance::Euclidean);
        let raw = (2.0 + 1.0) + (5.0 + 4.0) + (1.0 + 2.0) + 12.0;
        assert!((f - 2.0 * 2.0 / 6.0 * raw).abs() < 1e-12);
    }
}
