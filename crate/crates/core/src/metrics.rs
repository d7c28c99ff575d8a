//! Diversity scores, per-query winner tallies and novel-value counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lake_model::Cell;
use crate::serialize_embed::{Distance, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub average: f64,
    pub min: f64,
    pub n: usize,
    pub k: usize,
}

fn check(queries: &[&[f64]], selected: &[&[f64]]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::Empty("query tuples"));
    }
    if selected.is_empty() {
        return Err(Error::Empty("selected tuples"));
    }
    let d = queries[0].len();
    if let Some(bad) = queries.iter().chain(selected).find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    Ok(())
}

/// `[Σ_i Σ_j δ(q_i, t_j) + Σ_{i<j} δ(t_i, t_j)] / (n + k)`. Distances among
/// query tuples are not counted.
pub fn average_diversity(queries: &[&[f64]], selected: &[&[f64]], distance: Distance) -> Result<f64> {
    check(queries, selected)?;
    let mut total = 0.0;
    for q in queries {
        for t in selected {
            total += distance.eval(q, t);
        }
    }
    for (i, a) in selected.iter().enumerate() {
        for b in &selected[i + 1..] {
            total += distance.eval(a, b);
        }
    }
    Ok(total / (queries.len() + selected.len()) as f64)
}

/// Smallest query-to-selected or selected-to-selected distance.
pub fn min_diversity(queries: &[&[f64]], selected: &[&[f64]], distance: Distance) -> Result<f64> {
    check(queries, selected)?;
    let mut min = f64::INFINITY;
    for q in queries {
        for t in selected {
            min = min.min(distance.eval(q, t));
        }
    }
    for (i, a) in selected.iter().enumerate() {
        for b in &selected[i + 1..] {
            min = min.min(distance.eval(a, b));
        }
    }
    Ok(min)
}

/// Both scores for pool rows `indices` against every query row.
pub fn diversity_score(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    indices: &[usize],
    distance: Distance,
) -> Result<DiversityScore> {
    let q: Vec<&[f64]> = queries.rows().collect();
    let s: Vec<&[f64]> = indices.iter().map(|&i| tuples.row(i)).collect();
    Ok(DiversityScore {
        average: average_diversity(&q, &s, distance)?,
        min: min_diversity(&q, &s, distance)?,
        n: q.len(),
        k: s.len(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wins {
    pub average: usize,
    pub min: usize,
    /// Wins shared with another method.
    pub average_ties: usize,
    pub min_ties: usize,
}

/// Counts, per method, the queries on which it has the highest Average and
/// the highest Min Diversity. Exactly equal best scores credit every tied
/// method and are counted again under the tie fields.
pub fn winner_tally(
    per_query: &BTreeMap<String, BTreeMap<String, DiversityScore>>,
    methods: &[String],
) -> Result<BTreeMap<String, Wins>> {
    let mut tally: BTreeMap<String, Wins> = methods.iter().map(|m| (m.clone(), Wins::default())).collect();
    for (query, scores) in per_query {
        let mut row = Vec::with_capacity(methods.len());
        for m in methods {
            let s = scores.get(m).ok_or_else(|| Error::MissingScore {
                query: query.clone(),
                method: m.clone(),
            })?;
            row.push((m, s));
        }
        for by_average in [true, false] {
            let pick = |s: &DiversityScore| if by_average { s.average } else { s.min };
            let best = row.iter().map(|(_, s)| pick(s)).fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<&String> = row.iter().filter(|(_, s)| pick(s) == best).map(|(m, _)| *m).collect();
            let tied = (winners.len() > 1) as usize;
            for m in winners {
                let w = tally.get_mut(m).expect("method registered");
                if by_average {
                    w.average += 1;
                    w.average_ties += tied;
                } else {
                    w.min += 1;
                    w.min_ties += tied;
                }
            }
        }
    }
    Ok(tally)
}

fn normalize(v: &str) -> String {
    v.trim().to_lowercase()
}

/// Distinct non-null values in `selected` that do not occur in `query`,
/// comparing trimmed, case-folded text.
pub fn novel_values(query: &[Cell], selected: &[Cell]) -> usize {
    let known: BTreeSet<String> = query.iter().flatten().map(|v| normalize(v)).collect();
    selected
        .iter()
        .flatten()
        .map(|v| normalize(v))
        .filter(|v| !v.is_empty() && !known.contains(v))
        .collect::<BTreeSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C: Distance = Distance::Cosine;

    #[test]
    fn worked_example() {
        let q: [&[f64]; 1] = [&[1.0, 0.0]];
        let s: [&[f64]; 2] = [&[0.0, 1.0], &[-1.0, 0.0]];
        assert!((average_diversity(&q, &s, C).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(min_diversity(&q, &s, C).unwrap(), 1.0);
    }

    #[test]
    fn single_pick_halves_distance() {
        let q: [&[f64]; 1] = [&[1.0, 0.0]];
        let s: [&[f64]; 1] = [&[0.0, 1.0]];
        assert_eq!(average_diversity(&q, &s, C).unwrap(), 0.5);
        assert_eq!(min_diversity(&q, &s, C).unwrap(), 1.0);
    }

    #[test]
    fn copies_of_the_query_score_zero() {
        let q: [&[f64]; 1] = [&[0.3, 0.4]];
        let s: [&[f64]; 2] = [&[0.3, 0.4], &[0.3, 0.4]];
        assert_eq!(average_diversity(&q, &s, C).unwrap(), 0.0);
        assert_eq!(min_diversity(&q, &s, C).unwrap(), 0.0);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let q: [&[f64]; 1] = [&[1.0]];
        assert!(average_diversity(&q, &[], C).is_err());
        assert!(min_diversity(&[], &q, C).is_err());
    }

    fn score(avg: f64, min: f64) -> DiversityScore {
        DiversityScore { average: avg, min, n: 1, k: 1 }
    }

    #[test]
    fn tally_credits_ties() {
        let methods: Vec<String> = ["dust", "gmc"].map(String::from).to_vec();
        let mut per_query = BTreeMap::new();
        per_query.insert("q1".to_string(), BTreeMap::from([("dust".to_string(), score(0.9, 0.2)), ("gmc".to_string(), score(0.8, 0.2))]));
        per_query.insert("q2".to_string(), BTreeMap::from([("dust".to_string(), score(0.5, 0.1)), ("gmc".to_string(), score(0.7, 0.3))]));
        let t = winner_tally(&per_query, &methods).unwrap();
        assert_eq!(t["dust"], Wins { average: 1, min: 1, average_ties: 0, min_ties: 1 });
        assert_eq!(t["gmc"], Wins { average: 1, min: 2, average_ties: 0, min_ties: 1 });

        per_query.get_mut("q2").unwrap().remove("gmc");
        assert!(matches!(winner_tally(&per_query, &methods), Err(Error::MissingScore { .. })));
    }

    #[test]
    fn novel_value_count() {
        let q: Vec<Cell> = vec![Some("a".into()), Some("b".into())];
        let s: Vec<Cell> = vec![Some("b".into()), Some("c".into()), Some("c".into()), None];
        assert_eq!(novel_values(&q, &s), 1);
        assert_eq!(novel_values(&q, &[]), 0);
        assert_eq!(novel_values(&q, &[Some(" A ".into())]), 0);
    }

    fn naive_pairs(q: &[Vec<f64>], s: &[Vec<f64>]) -> Vec<f64> {
        let mut all: Vec<&Vec<f64>> = q.iter().collect();
        all.extend(s);
        let mut out = Vec::new();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if i < q.len() && j < q.len() {
                    continue;
                }
                let (a, b) = (all[i], all[j]);
                let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.push(1.0 - dot / (na * nb));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(
            q in prop::collection::vec(prop::collection::vec(0.1f64..1.0, 3), 1..4),
            s in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..6),
        ) {
            prop_assume!(s.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)));
            let qr: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
            let mut sr: Vec<&[f64]> = s.iter().map(Vec::as_slice).collect();
            let avg = average_diversity(&qr, &sr, C).unwrap();
            let min = min_diversity(&qr, &sr, C).unwrap();
            let pairs = naive_pairs(&q, &s);
            prop_assert!((avg - pairs.iter().sum::<f64>() / (q.len() + s.len()) as f64).abs() < 1e-9);
            prop_assert!(pairs.iter().all(|&d| min <= d + 1e-9));
            sr.reverse();
            prop_assert!((average_diversity(&qr, &sr, C).unwrap() - avg).abs() < 1e-12);
            prop_assert_eq!(min_diversity(&qr, &sr, C).unwrap(), min);
            let mut dup = sr.clone();
            dup.push(sr[0]);
            prop_assert_eq!(min_diversity(&qr, &dup, C).unwrap(), 0.0);
        }
    }
}
