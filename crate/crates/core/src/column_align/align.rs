//! Holistic alignment of candidate-table columns to query columns, outer
//! union into a tuple pool, and pair-based alignment scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cluster::{merge_sequence, select_cluster_count};
use super::provider::{embed_column, ColumnProvider, ColumnVector, EmbedMode};
use super::tokens::TokenCorpus;
use crate::error::{Error, Result};
use crate::lake_model::{Cell, ColumnRef, Table, TupleRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCluster {
    pub anchor: ColumnRef,
    pub header: String,
    pub members: Vec<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub query_table: String,
    /// One per query column, in query-column order.
    pub clusters: Vec<AlignedCluster>,
    pub discarded: Vec<ColumnRef>,
    /// Cluster count chosen before discarding.
    pub n_clusters: usize,
    pub silhouette: Option<f64>,
}

impl AlignmentMap {
    pub fn headers(&self) -> Vec<String> {
        self.clusters.iter().map(|c| c.header.clone()).collect()
    }

    /// Slot of the cluster containing `col`, if it is aligned.
    pub fn slot_of(&self, col: &ColumnRef) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| &c.anchor == col || c.members.contains(col))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alignment map serializes")
    }
}

/// Aligns the columns of `lake` (already chosen as union candidates) to the
/// columns of `query`.
pub fn align_columns(
    query: &Table,
    lake: &[Table],
    provider: &dyn ColumnProvider,
    mode: EmbedMode,
) -> Result<AlignmentMap> {
    let tables: Vec<&Table> = std::iter::once(query).chain(lake.iter()).collect();
    let columns: Vec<(ColumnRef, Vec<Cell>)> = tables
        .iter()
        .flat_map(|t| (0..t.num_columns()).map(move |j| (t.column_ref(j), t.column_values(j))))
        .collect();
    let corpus = TokenCorpus::from_columns(columns.iter().map(|(_, v)| v.as_slice()));
    let vectors: Vec<ColumnVector> = columns
        .iter()
        .map(|(c, v)| embed_column(c, v, provider, mode, &corpus))
        .collect::<Result<_>>()?;
    if let Some(first) = vectors.first() {
        let d = first.vec.len();
        if let Some(bad) = vectors.iter().find(|v| v.vec.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.vec.len(),
            });
        }
    }
    let (labels, n_clusters, silhouette) = cluster_columns(&vectors)?;
    Ok(build_map(query, &vectors, &labels, n_clusters, silhouette))
}

fn cluster_columns(vectors: &[ColumnVector]) -> Result<(Vec<usize>, usize, Option<f64>)> {
    match select_cluster_count(vectors) {
        Ok(choice) => Ok((choice.labels, choice.n_clusters, Some(choice.silhouette))),
        Err(Error::InvalidParams(_)) | Err(Error::NoFeasibleClusterCount) => {
            // Too few columns for a silhouette search: merge as far as the
            // cannot-link rule allows.
            let seq = merge_sequence(vectors);
            let n = seq.min_reachable();
            Ok((seq.labels(n)?, n, None))
        }
        Err(e) => Err(e),
    }
}

fn build_map(
    query: &Table,
    vectors: &[ColumnVector],
    labels: &[usize],
    n_clusters: usize,
    silhouette: Option<f64>,
) -> AlignmentMap {
    let mut groups: BTreeMap<usize, Vec<&ColumnRef>> = BTreeMap::new();
    for (v, &l) in vectors.iter().zip(labels) {
        groups.entry(l).or_default().push(&v.column);
    }
    let mut by_anchor: BTreeMap<usize, Vec<ColumnRef>> = BTreeMap::new();
    let mut discarded = Vec::new();
    for members in groups.values() {
        let (q, rest): (Vec<&ColumnRef>, Vec<&ColumnRef>) =
            members.iter().partition(|c| c.table == query.name);
        match q.first() {
            None => discarded.extend(rest.into_iter().cloned()),
            Some(anchor) => {
                by_anchor.insert(anchor.index, rest.into_iter().cloned().collect());
                // More than one query column in a cluster cannot happen under
                // the cannot-link rule; split them into their own anchors.
                for extra in q.iter().skip(1) {
                    log::warn!("query column {extra} shared a cluster; splitting");
                    by_anchor.insert(extra.index, Vec::new());
                }
            }
        }
    }
    let clusters = (0..query.num_columns())
        .map(|j| AlignedCluster {
            anchor: query.column_ref(j),
            header: query.headers[j].clone(),
            members: by_anchor.remove(&j).unwrap_or_default(),
        })
        .collect();
    discarded.sort();
    AlignmentMap {
        query_table: query.name.clone(),
        clusters,
        discarded,
        n_clusters,
        silhouette,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionedTuple {
    pub source: TupleRef,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionedTupleSet {
    pub schema: Vec<ColumnRef>,
    pub headers: Vec<String>,
    pub tuples: Vec<UnionedTuple>,
}

impl UnionedTupleSet {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Query rows under the same schema, for embedding alongside the pool.
    pub fn query_tuples(query: &Table) -> Vec<UnionedTuple> {
        query
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| UnionedTuple {
                source: TupleRef::new(query.name.clone(), i),
                cells: r.clone(),
            })
            .collect()
    }
}

/// Projects every lake row onto query-column order, padding unaligned slots
/// with null. Query rows are not part of the pool.
pub fn outer_union(query: &Table, lake: &[Table], map: &AlignmentMap) -> UnionedTupleSet {
    let width = query.num_columns();
    let mut tuples = Vec::new();
    for t in lake {
        let mut source_col: Vec<Option<usize>> = vec![None; width];
        for (slot, cl) in map.clusters.iter().enumerate() {
            if let Some(m) = cl.members.iter().find(|m| m.table == t.name) {
                source_col[slot] = Some(m.index);
            }
        }
        for (i, row) in t.rows.iter().enumerate() {
            let cells = source_col
                .iter()
                .map(|c| c.and_then(|j| row.get(j).cloned().flatten()))
                .collect();
            tuples.push(UnionedTuple {
                source: TupleRef::new(t.name.clone(), i),
                cells,
            });
        }
    }
    UnionedTupleSet {
        schema: map.clusters.iter().map(|c| c.anchor.clone()).collect(),
        headers: map.headers(),
        tuples,
    }
}

pub type AlignmentPair = (ColumnRef, ColumnRef);

fn ordered(a: &ColumnRef, b: &ColumnRef) -> AlignmentPair {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn pairs_of_groups<'a>(groups: impl Iterator<Item = (&'a ColumnRef, &'a [ColumnRef])>) -> BTreeSet<AlignmentPair> {
    let mut out = BTreeSet::new();
    for (anchor, members) in groups {
        if members.is_empty() {
            out.insert(ordered(anchor, anchor));
        }
        for (i, m) in members.iter().enumerate() {
            out.insert(ordered(anchor, m));
            for o in &members[i + 1..] {
                out.insert(ordered(m, o));
            }
        }
    }
    out
}

/// Alignment pairs of a map: anchor-member pairs, member-member pairs within a
/// cluster, and a self-pair for every anchor with no members.
pub fn alignment_pairs(map: &AlignmentMap) -> BTreeSet<AlignmentPair> {
    pairs_of_groups(map.clusters.iter().map(|c| (&c.anchor, c.members.as_slice())))
}

/// Ground-truth pair set for one query, closing the listed column pairs
/// transitively. Groups without a query column are ignored.
pub fn truth_pairs(query: &Table, listed: &[[ColumnRef; 2]]) -> BTreeSet<AlignmentPair> {
    let mut ids: BTreeMap<ColumnRef, usize> = BTreeMap::new();
    for c in query.column_refs() {
        let n = ids.len();
        ids.entry(c).or_insert(n);
    }
    for [a, b] in listed {
        for c in [a, b] {
            let n = ids.len();
            ids.entry(c.clone()).or_insert(n);
        }
    }
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for [a, b] in listed {
        let (ra, rb) = (find(&mut parent, ids[a]), find(&mut parent, ids[b]));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut groups: BTreeMap<usize, Vec<ColumnRef>> = BTreeMap::new();
    for (c, &i) in &ids {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(c.clone());
    }
    let mut anchored: Vec<(ColumnRef, Vec<ColumnRef>)> = Vec::new();
    for (_, cols) in groups {
        let (q, rest): (Vec<ColumnRef>, Vec<ColumnRef>) =
            cols.into_iter().partition(|c| c.table == query.name);
        if let Some(anchor) = q.first() {
            anchored.push((anchor.clone(), rest));
        }
    }
    pairs_of_groups(anchored.iter().map(|(a, m)| (a, m.as_slice())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn prf(predicted: &BTreeSet<AlignmentPair>, truth: &BTreeSet<AlignmentPair>) -> Prf {
    let hits = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        hits / truth.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

pub fn alignment_prf(predicted: &AlignmentMap, truth: &BTreeSet<AlignmentPair>) -> Prf {
    prf(&alignment_pairs(predicted), truth)
}
