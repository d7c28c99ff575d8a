//! Experiment suites: p-sweep, pruning ablation, runtime scaling and the
//! novel-values case study.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{prepare_query, run_algorithm, PreparedQuery};
use super::synthetic::{generate, SyntheticInstance, SyntheticSpec};
use crate::column_align::EmbedMode;
use crate::diversify::{diversify, diversify_dust, rank_candidates, Algorithm, DiversifyParams};
use crate::error::{Error, Result};
use crate::lake_model::Table;
use crate::metrics::{diversity_score, novel_values};
use crate::serialize_embed::TupleProvider;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub mean_average: f64,
    pub mean_min: f64,
    /// Percent change from the previous row; absent on the first row or
    /// when the previous mean is zero.
    pub average_change_pct: Option<f64>,
    pub min_change_pct: Option<f64>,
}

fn pct(prev: f64, cur: f64) -> Option<f64> {
    (prev != 0.0).then(|| (cur - prev) / prev * 100.0)
}

/// Mean DUST diversity across `instances` for each `p`.
pub fn sweep_p(instances: &[SyntheticInstance], params: &DiversifyParams, p_values: &[usize]) -> Result<Vec<SweepRow>> {
    if instances.is_empty() {
        return Err(Error::Empty("instances"));
    }
    if p_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("p values must be strictly ascending".into()));
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for &p in p_values {
        let params = DiversifyParams { p, ..params.clone() };
        let (mut avg, mut min) = (0.0, 0.0);
        for inst in instances {
            let r = diversify_dust(&inst.queries, &inst.tuples, &params)?;
            let s = diversity_score(&inst.queries, &inst.tuples, &r.indices(), params.distance)?;
            avg += s.average;
            min += s.min;
        }
        let n = instances.len() as f64;
        let (mean_average, mean_min) = (avg / n, min / n);
        let prev = rows.last();
        rows.push(SweepRow {
            p,
            mean_average,
            mean_min,
            average_change_pct: prev.and_then(|r| pct(r.mean_average, mean_average)),
            min_change_pct: prev.and_then(|r| pct(r.mean_min, mean_min)),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` is no pruning.
    pub s: Option<usize>,
    pub seconds: f64,
    pub average: f64,
    pub min: f64,
}

/// DUST wall time and diversity for each pruning budget.
pub fn ablate_pruning(inst: &SyntheticInstance, params: &DiversifyParams, s_values: &[Option<usize>]) -> Result<Vec<AblationRow>> {
    let all: Vec<DiversifyParams> = s_values
        .iter()
        .map(|&s| DiversifyParams { s, ..params.clone() })
        .collect();
    for p in &all {
        p.validate()?;
    }
    let mut rows = Vec::new();
    for p in all {
        let t0 = Instant::now();
        let r = diversify_dust(&inst.queries, &inst.tuples, &p)?;
        let seconds = t0.elapsed().as_secs_f64();
        let score = diversity_score(&inst.queries, &inst.tuples, &r.indices(), p.distance)?;
        rows.push(AblationRow {
            s: p.s,
            seconds,
            average: score.average,
            min: score.min,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleAxis {
    /// Number of candidate tuples handed to the algorithm.
    S,
    K,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub algorithm: Algorithm,
    pub x: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub axis: ScaleAxis,
    pub rows: Vec<ScaleRow>,
    /// Log-log slope of seconds against `x` per algorithm; `None` when it
    /// cannot be fitted.
    pub exponents: Vec<(Algorithm, Option<f64>)>,
}

/// Least-squares slope of `ln y` on `ln x`. Needs two distinct positive
/// `x` values and positive `y`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Times each algorithm along `axis`. For [`ScaleAxis::S`] each value is
/// the pool size of a fresh instance drawn from `base`; DUST applies its
/// own pruning budget while the other algorithms see the whole pool. For
/// [`ScaleAxis::K`] the pool is fixed at `base.n_tuples`. Each point keeps
/// the fastest of `repeats` runs.
pub fn scale_runtime(
    base: &SyntheticSpec,
    algorithms: &[Algorithm],
    axis: ScaleAxis,
    values: &[usize],
    params: &DiversifyParams,
    repeats: usize,
) -> Result<ScaleReport> {
    let fixed = match axis {
        ScaleAxis::K => Some(generate(base)?),
        ScaleAxis::S => None,
    };
    let mut rows = Vec::new();
    for &x in values {
        let owned;
        let (inst, params) = match axis {
            ScaleAxis::S => {
                owned = generate(&SyntheticSpec { n_tuples: x, ..base.clone() })?;
                (&owned, params.clone())
            }
            ScaleAxis::K => (fixed.as_ref().unwrap(), DiversifyParams { k: x, ..params.clone() }),
        };
        params.validate()?;
        for &alg in algorithms {
            let mut best = f64::INFINITY;
            for _ in 0..repeats.max(1) {
                let t0 = Instant::now();
                match alg {
                    Algorithm::Dust => diversify(alg, &inst.queries, &inst.tuples, &params)?,
                    _ => diversify(alg, &inst.queries, &inst.tuples, &DiversifyParams { s: None, ..params.clone() })?,
                };
                best = best.min(t0.elapsed().as_secs_f64());
            }
            rows.push(ScaleRow {
                algorithm: alg,
                x,
                seconds: best,
            });
        }
    }
    let exponents = algorithms
        .iter()
        .map(|&a| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.algorithm == a)
                .map(|r| (r.x as f64, r.seconds))
                .collect();
            (a, loglog_slope(&pts))
        })
        .collect();
    Ok(ScaleReport { axis, rows, exponents })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMethod {
    Algorithm(Algorithm),
    /// The `k` tuples closest on average to the query tuples.
    TopSimilar,
}

impl CaseMethod {
    pub fn name(&self) -> String {
        match self {
            CaseMethod::Algorithm(a) => a.to_string(),
            CaseMethod::TopSimilar => "top_similar".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub method: String,
    pub k: usize,
    pub column: String,
    pub novel_values: usize,
}

/// Pool rows most similar to the query, by mean distance then id.
pub fn top_similar(prepared: &PreparedQuery, k: usize, params: &DiversifyParams) -> Vec<usize> {
    let all: Vec<usize> = (0..prepared.pool.len()).collect();
    let mut ranked = rank_candidates(&prepared.queries, &prepared.pool, &all, params.distance);
    ranked.sort_by(|a, b| {
        a.tie_score
            .total_cmp(&b.tie_score)
            .then_with(|| prepared.pool.id(a.index).cmp(prepared.pool.id(b.index)))
    });
    ranked.into_iter().take(k).map(|r| r.index).collect()
}

/// Novel values contributed per query column by each method at each `k`.
/// Columns are query headers; an empty list means every column.
pub fn case_study_prepared(
    prepared: &PreparedQuery,
    methods: &[CaseMethod],
    ks: &[usize],
    columns: &[String],
    params: &DiversifyParams,
) -> Result<Vec<CaseRow>> {
    let query = &prepared.query;
    let slots: Vec<usize> = if columns.is_empty() {
        (0..query.num_columns()).collect()
    } else {
        columns
            .iter()
            .map(|c| {
                query
                    .headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::UnknownColumn(c.clone()))
            })
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for m in methods {
        for &k in ks {
            let selected: Vec<usize> = if k == 0 {
                Vec::new()
            } else {
                match m {
                    CaseMethod::TopSimilar => top_similar(prepared, k, params),
                    CaseMethod::Algorithm(a) => {
                        let p = DiversifyParams {
                            k,
                            s: params.s.map(|s| s.max(k * params.p)),
                            ..params.clone()
                        };
                        run_algorithm(*a, &prepared.queries, &prepared.pool, &p)?.indices()
                    }
                }
            };
            for &j in &slots {
                let picked: Vec<_> = selected.iter().map(|&i| prepared.pool_cells[i][j].clone()).collect();
                rows.push(CaseRow {
                    method: m.name(),
                    k,
                    column: query.headers[j].clone(),
                    novel_values: novel_values(&query.column_values(j), &picked),
                });
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
pub fn case_study(
    query: &Table,
    lake: &[Table],
    candidates: Option<&[String]>,
    provider: &dyn TupleProvider,
    methods: &[CaseMethod],
    ks: &[usize],
    columns: &[String],
    params: &DiversifyParams,
) -> Result<Vec<CaseRow>> {
    let prepared = prepare_query(query, lake, candidates, provider, EmbedMode::Column, 10)?;
    case_study_prepared(&prepared, methods, ks, columns, params)
}
