//! Cannot-link constrained average-linkage clustering on Euclidean distance,
//! silhouette scoring, and cluster-count selection.
//!
//! Merging is greedy and deterministic: each step joins the closest pair of
//! clusters that share no source table, preferring the smallest slot pair on
//! ties. Because the step taken never depends on the target count, the run
//! to `n` clusters is a prefix of the run to `n - 1`, so one merge sequence
//! serves every cut.

use std::collections::BTreeSet;

use super::provider::ColumnVector;
use crate::error::{Error, Result};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Full merge sequence of the constrained agglomeration.
#[derive(Debug, Clone)]
pub struct MergeSequence {
    n_points: usize,
    /// `(kept slot, absorbed slot, linkage distance)`
    merges: Vec<(usize, usize, f64)>,
}

impl MergeSequence {
    /// `groups[i]` identifies the table that point `i` comes from; points
    /// sharing a group never end up in one cluster.
    pub fn build(points: &[&[f64]], groups: &[usize]) -> Self {
        assert_eq!(points.len(), groups.len());
        let n = points.len();
        let mut dist = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(points[i], points[j]);
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        let mut size = vec![1usize; n];
        let mut tables: Vec<BTreeSet<usize>> = groups.iter().map(|&g| BTreeSet::from([g])).collect();
        let mut active = vec![true; n];
        let mut merges = Vec::new();

        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..n {
                if !active[i] {
                    continue;
                }
                for j in (i + 1)..n {
                    if !active[j] || !tables[i].is_disjoint(&tables[j]) {
                        continue;
                    }
                    let d = dist[i][j];
                    if best.map_or(true, |(_, _, bd)| d < bd) {
                        best = Some((i, j, d));
                    }
                }
            }
            let Some((i, j, d)) = best else { break };
            let (si, sj) = (size[i] as f64, size[j] as f64);
            for k in 0..n {
                if active[k] && k != i && k != j {
                    let nd = (si * dist[i][k] + sj * dist[j][k]) / (si + sj);
                    dist[i][k] = nd;
                    dist[k][i] = nd;
                }
            }
            active[j] = false;
            size[i] += size[j];
            let absorbed = std::mem::take(&mut tables[j]);
            tables[i].extend(absorbed);
            merges.push((i, j, d));
        }
        Self { n_points: n, merges }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Fewest clusters the constrained run can reach.
    pub fn min_reachable(&self) -> usize {
        self.n_points - self.merges.len()
    }

    /// Flat labels for `n` clusters, numbered by first appearance.
    pub fn labels(&self, n: usize) -> Result<Vec<usize>> {
        if n == 0 || n > self.n_points {
            return Err(Error::InvalidParams(format!(
                "cluster count {n} outside 1..={}",
                self.n_points
            )));
        }
        if n < self.min_reachable() {
            return Err(Error::ConstraintInfeasible {
                requested: n,
                reachable: self.min_reachable(),
            });
        }
        let mut owner: Vec<usize> = (0..self.n_points).collect();
        for &(keep, absorbed, _) in &self.merges[..self.n_points - n] {
            for o in owner.iter_mut() {
                if *o == absorbed {
                    *o = keep;
                }
            }
        }
        Ok(canonical_labels(&owner))
    }
}

pub(crate) fn canonical_labels(owner: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    owner
        .iter()
        .map(|o| {
            let next = map.len();
            *map.entry(*o).or_insert(next)
        })
        .collect()
}

fn table_groups(vectors: &[ColumnVector]) -> Vec<usize> {
    let mut names: Vec<&str> = Vec::new();
    vectors
        .iter()
        .map(|v| match names.iter().position(|n| *n == v.column.table) {
            Some(p) => p,
            None => {
                names.push(&v.column.table);
                names.len() - 1
            }
        })
        .collect()
}

pub fn merge_sequence(vectors: &[ColumnVector]) -> MergeSequence {
    let points: Vec<&[f64]> = vectors.iter().map(|v| v.vec.as_slice()).collect();
    MergeSequence::build(&points, &table_groups(vectors))
}

/// Cluster labels for `n_clusters` under the same-table cannot-link rule.
pub fn constrained_agglomerative(vectors: &[ColumnVector], n_clusters: usize) -> Result<Vec<usize>> {
    merge_sequence(vectors).labels(n_clusters)
}

/// Mean silhouette on Euclidean distance; singleton points score 0.
pub fn silhouette(points: &[&[f64]], labels: &[usize]) -> Result<f64> {
    assert_eq!(points.len(), labels.len());
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let n_clusters = counts.iter().filter(|&&c| c > 0).count();
    if n_clusters < 2 {
        return Err(Error::SilhouetteUndefined(n_clusters));
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        if counts[labels[i]] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += euclidean(points[i], points[j]);
            }
        }
        let a = sums[labels[i]] / (counts[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone)]
pub struct ClusterChoice {
    pub n_clusters: usize,
    pub labels: Vec<usize>,
    pub silhouette: f64,
    /// `(n, silhouette)` for every feasible candidate count, ascending.
    pub scores: Vec<(usize, f64)>,
}

/// Picks the cluster count in `[max(2, largest table width), |vectors| - 1]`
/// maximizing silhouette; ties go to fewer clusters.
pub fn select_cluster_count(vectors: &[ColumnVector]) -> Result<ClusterChoice> {
    let n = vectors.len();
    if n < 3 {
        return Err(Error::InvalidParams(format!(
            "cluster-count selection needs at least 3 vectors, got {n}"
        )));
    }
    let groups = table_groups(vectors);
    let widest = {
        let mut counts = std::collections::HashMap::new();
        groups.iter().for_each(|g| *counts.entry(g).or_insert(0usize) += 1);
        counts.values().copied().max().unwrap_or(1)
    };
    let seq = merge_sequence(vectors);
    let points: Vec<&[f64]> = vectors.iter().map(|v| v.vec.as_slice()).collect();
    let lo = 2.max(widest).max(seq.min_reachable());
    let mut best: Option<ClusterChoice> = None;
    let mut scores = Vec::new();
    for k in lo..n {
        let labels = seq.labels(k)?;
        let s = silhouette(&points, &labels)?;
        scores.push((k, s));
        if best.as_ref().map_or(true, |b| s > b.silhouette) {
            best = Some(ClusterChoice {
                n_clusters: k,
                labels,
                silhouette: s,
                scores: Vec::new(),
            });
        }
    }
    let mut best = best.ok_or(Error::NoFeasibleClusterCount)?;
    best.scores = scores;
    Ok(best)
}
