//! DUST: prune the pool, cluster the survivors, rank cluster medoids by
//! distance to the query, keep the top `k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hac::{average_linkage, cut, medoid};
use super::pairwise::{query_scores, Condensed, Pairwise};
use super::{check_inputs, Algorithm, DiverseResult, DiversifyParams, SelectedTuple};
use crate::error::Result;
use crate::lake_model::TupleRef;
use crate::serialize_embed::{norm, Distance, EmbeddingMatrix};

/// Keeps the `s` tuples farthest from the mean embedding of their own source
/// table, returned in pool order. Ties are broken by tuple id.
pub fn prune_tuples(tuples: &EmbeddingMatrix, s: usize, distance: Distance) -> Vec<usize> {
    let n = tuples.len();
    if s >= n {
        return (0..n).collect();
    }
    let mut by_table: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        by_table.entry(tuples.id(i).table.as_str()).or_default().push(i);
    }
    let mut score = vec![0.0; n];
    for rows in by_table.values() {
        let mut mean = vec![0.0; tuples.dim()];
        for &i in rows {
            mean.iter_mut().zip(tuples.row(i)).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
        let degenerate = distance == Distance::Cosine && norm(&mean) == 0.0;
        for &i in rows {
            // A table whose rows cancel out has no direction; every row is
            // treated as orthogonal to it.
            score[i] = if degenerate {
                1.0
            } else {
                distance.eval(&mean, tuples.row(i))
            };
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        score[b]
            .total_cmp(&score[a])
            .then_with(|| tuples.id(a).cmp(tuples.id(b)))
    });
    order.truncate(s);
    order.sort_unstable();
    order
}

/// Average-linkage clustering of `candidates` into `n_clusters` groups
/// (clamped to the candidate count); returns one medoid per group.
pub fn cluster_medoids(
    tuples: &EmbeddingMatrix,
    candidates: &[usize],
    n_clusters: usize,
    distance: Distance,
) -> Vec<usize> {
    let n = candidates.len();
    let n_clusters = n_clusters.clamp(1.min(n), n);
    if n_clusters == n {
        return candidates.to_vec();
    }
    let pw = Pairwise::within(distance, tuples);
    let merges = average_linkage(Condensed::build(&pw, candidates));
    cut(n, &merges, n_clusters)
        .iter()
        .map(|g| {
            let members: Vec<usize> = g.iter().map(|&i| candidates[i]).collect();
            medoid(&pw, &members)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub index: usize,
    pub rank_score: f64,
    pub tie_score: f64,
}

/// Orders candidates by distance to the closest query tuple, descending,
/// then by mean distance to the query tuples, descending, then by id.
pub fn rank_by_query_distances(ids: &[TupleRef], query_distances: &[Vec<f64>]) -> Vec<Ranked> {
    let mut ranked: Vec<Ranked> = query_distances
        .iter()
        .enumerate()
        .map(|(index, ds)| Ranked {
            index,
            rank_score: ds.iter().copied().fold(f64::INFINITY, f64::min),
            tie_score: ds.iter().sum::<f64>() / ds.len() as f64,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.rank_score
            .total_cmp(&a.rank_score)
            .then(b.tie_score.total_cmp(&a.tie_score))
            .then_with(|| ids[a.index].cmp(&ids[b.index]))
    });
    ranked
}

/// Ranks pool rows `candidates` against the query; `index` in the result is
/// a pool row.
pub fn rank_candidates(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    candidates: &[usize],
    distance: Distance,
) -> Vec<Ranked> {
    let pw = Pairwise::new(distance, tuples, queries);
    let mut ranked: Vec<Ranked> = candidates
        .iter()
        .map(|&i| {
            let (rank_score, tie_score) = query_scores(&pw, i, queries.len());
            Ranked {
                index: i,
                rank_score,
                tie_score,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.rank_score
            .total_cmp(&a.rank_score)
            .then(b.tie_score.total_cmp(&a.tie_score))
            .then_with(|| tuples.id(a.index).cmp(tuples.id(b.index)))
    });
    ranked
}

pub fn diversify_dust(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    params: &DiversifyParams,
) -> Result<DiverseResult> {
    check_inputs(queries, tuples, params)?;
    let pruned = match params.s {
        Some(s) => prune_tuples(tuples, s, params.distance),
        None => (0..tuples.len()).collect(),
    };
    let n_clusters = params.k.saturating_mul(params.p).min(pruned.len());
    let medoids = cluster_medoids(tuples, &pruned, n_clusters, params.distance);
    let mut ranked = rank_candidates(queries, tuples, &medoids, params.distance);
    ranked.truncate(params.k);
    Ok(DiverseResult {
        algorithm: Algorithm::Dust,
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

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(table_rows: &[(&str, &[f64])]) -> EmbeddingMatrix {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let ids = table_rows
            .iter()
            .map(|(t, _)| {
                let c = counts.entry(t).or_default();
                *c += 1;
                TupleRef::new(*t, *c - 1)
            })
            .collect();
        EmbeddingMatrix::new(ids, table_rows.iter().map(|(_, r)| r.to_vec()).collect(), "test").unwrap()
    }

    #[test]
    fn ranking_golden_from_distances() {
        // Two query tuples; rows are t1..t6 with distances chosen so that
        // (min, mean) = t2 (0.4, 0.5), t3 (0.4, 0.49), t4 (0.4, 0.48),
        // t5 (0.01, 0.46), t6 (0, 0.45); t1 is the clear leader.
        let ids: Vec<TupleRef> = (1..=6).map(|i| TupleRef::new("t", i)).collect();
        let d = vec![
            vec![0.9, 0.95],
            vec![0.4, 0.6],
            vec![0.58, 0.4],
            vec![0.4, 0.56],
            vec![0.01, 0.91],
            vec![0.9, 0.0],
        ];
        let order: Vec<usize> = rank_by_query_distances(&ids, &d).iter().map(|r| r.index + 1).collect();
        assert_eq!(order, vec![1, 2, 3, 4, 5, 6]);
        let r = rank_by_query_distances(&ids, &d);
        assert_eq!((r[1].rank_score, r[1].tie_score), (0.4, 0.5));
        assert_eq!(r[5].rank_score, 0.0);
    }

    #[test]
    fn ranking_golden_from_embeddings() {
        // Manhattan geometry with integer coordinates makes every score
        // exact: q1 = (0, 0), q2 = (90, 0).
        let q = matrix(&[("q", &[0.0, 0.0]), ("q", &[90.0, 0.0])]);
        let t = matrix(&[
            ("t", &[0.0, 1.0]),  // (1, 91)
            ("t", &[37.0, 3.0]), // (40, 56)
            ("t", &[35.0, 5.0]), // (40, 60)
            ("t", &[0.0, 0.0]),  // (0, 90)
            ("t", &[36.0, 4.0]), // (40, 58)
        ]);
        let r = rank_candidates(&q, &t, &[0, 1, 2, 3, 4], Distance::Manhattan);
        let order: Vec<usize> = r.iter().map(|x| x.index).collect();
        assert_eq!(order, vec![2, 4, 1, 0, 3]);
        assert_eq!((r[0].rank_score, r[0].tie_score), (40.0, 50.0));
        assert_eq!((r[2].rank_score, r[2].tie_score), (40.0, 48.0));
        assert_eq!(r[4].rank_score, 0.0);
    }

    #[test]
    fn exact_ties_fall_back_to_id() {
        let q = matrix(&[("q", &[0.0])]);
        let t = matrix(&[("b", &[1.0]), ("a", &[1.0]), ("a", &[-1.0])]);
        let r = rank_candidates(&q, &t, &[0, 1, 2], Distance::Euclidean);
        let ids: Vec<String> = r.iter().map(|x| t.id(x.index).to_string()).collect();
        assert_eq!(ids, vec!["a#0", "a#1", "b#0"]);
    }

    #[test]
    fn prune_keeps_outliers_of_each_table() {
        // Mean of the three rows points along (1.707, 1.707)/3; the diagonal
        // row is closest to it and is dropped.
        let t = matrix(&[
            ("a", &[1.0, 0.0]),
            ("a", &[0.0, 1.0]),
            ("a", &[std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]),
        ]);
        assert_eq!(prune_tuples(&t, 2, Distance::Cosine), vec![0, 1]);
        assert_eq!(prune_tuples(&t, 3, Distance::Cosine), vec![0, 1, 2]);
        assert_eq!(prune_tuples(&t, 10, Distance::Cosine), vec![0, 1, 2]);
    }

    #[test]
    fn prune_scores_against_own_table_mean() {
        // Table b's rows are identical, so they sit on their mean (score 0),
        // while table a's rows are spread out.
        let t = matrix(&[
            ("a", &[1.0, 0.0]),
            ("b", &[1.0, 1.0]),
            ("a", &[0.0, 1.0]),
            ("b", &[1.0, 1.0]),
        ]);
        assert_eq!(prune_tuples(&t, 2, Distance::Cosine), vec![0, 2]);
    }

    #[test]
    fn prune_zero_mean_table_scores_one() {
        let t = matrix(&[("a", &[1.0, 0.0]), ("a", &[-1.0, 0.0]), ("b", &[0.0, 1.0]), ("b", &[0.1, 1.0])]);
        let kept = prune_tuples(&t, 2, Distance::Cosine);
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn medoids_one_per_cluster() {
        let t = matrix(&[
            ("a", &[1.0, 0.0]),
            ("a", &[0.99, 0.1]),
            ("a", &[0.98, 0.12]),
            ("a", &[0.0, 1.0]),
            ("a", &[0.1, 0.99]),
        ]);
        let m = cluster_medoids(&t, &[0, 1, 2, 3, 4], 2, Distance::Cosine);
        assert_eq!(m, vec![1, 3]);
        assert_eq!(cluster_medoids(&t, &[0, 1, 2], 5, Distance::Cosine), vec![0, 1, 2]);
    }

    #[test]
    fn dust_end_to_end_prefers_far_tuples() {
        let q = matrix(&[("q", &[1.0, 0.0, 0.0]), ("q", &[0.95, 0.05, 0.0])]);
        let t = matrix(&[
            ("a", &[1.0, 0.01, 0.0]),
            ("a", &[0.0, 1.0, 0.0]),
            ("b", &[0.0, 0.0, 1.0]),
            ("b", &[0.0, 0.02, 1.0]),
            ("c", &[0.99, 0.0, 0.02]),
        ]);
        let params = DiversifyParams {
            k: 2,
            s: None,
            ..DiversifyParams::default()
        };
        let r = diversify_dust(&q, &t, &params).unwrap();
        let mut got = r.indices();
        got.sort_unstable();
        assert_eq!(got.len(), 2);
        assert!(got.contains(&1));
        assert!(got.contains(&2) || got.contains(&3));
        assert!(r.selected.windows(2).all(|w| w[0].rank_score >= w[1].rank_score));
    }
}
