//! Benchmark summaries in the shape of a method × {#Average, #Min, time}
//! table, as JSON and CSV. Wall times go to a separate file so the score
//! reports are byte-identical across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{run_algorithm, write_text, PipelineReport};
use super::synthetic::{generate, SyntheticSpec};
use crate::diversify::{Algorithm, DiversifyParams};
use crate::error::Result;
use crate::metrics::{diversity_score, winner_tally, DiversityScore, Wins};

pub const SUMMARY_CSV_HEADER: &str = "method,average_wins,min_wins,average_ties,min_ties,queries";
pub const PER_QUERY_CSV_HEADER: &str = "query,method,average,min,n,k";
pub const TIMINGS_CSV_HEADER: &str = "method,mean_diversify_seconds,mean_total_seconds,queries";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<String>,
    pub per_query: BTreeMap<String, BTreeMap<String, DiversityScore>>,
    pub failures: BTreeMap<String, String>,
    pub tally: BTreeMap<String, Wins>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Per method: summed diversification seconds, summed total seconds,
    /// query count.
    pub per_method: BTreeMap<String, (f64, f64, usize)>,
}

impl Timings {
    fn add(&mut self, method: &str, diversify: f64, total: f64) {
        let e = self.per_method.entry(method.to_string()).or_default();
        e.0 += diversify;
        e.1 += total;
        e.2 += 1;
    }

    pub fn csv(&self, methods: &[String]) -> String {
        let mut out = format!("{TIMINGS_CSV_HEADER}\n");
        for m in methods {
            let (d, t, n) = self.per_method.get(m).copied().unwrap_or_default();
            let denom = n.max(1) as f64;
            writeln!(out, "{m},{},{},{n}", d / denom, t / denom).unwrap();
        }
        out
    }
}

impl BenchReport {
    fn build(
        methods: Vec<String>,
        per_query: BTreeMap<String, BTreeMap<String, DiversityScore>>,
        failures: BTreeMap<String, String>,
    ) -> Result<Self> {
        let tally = winner_tally(&per_query, &methods)?;
        Ok(Self {
            methods,
            per_query,
            failures,
            tally,
        })
    }

    pub fn from_pipeline(report: &PipelineReport) -> Result<(Self, Timings)> {
        let methods: Vec<String> = report.algorithms.iter().map(|a| a.to_string()).collect();
        let mut per_query = BTreeMap::new();
        let mut failures = BTreeMap::new();
        let mut timings = Timings::default();
        for q in &report.queries {
            match &q.outcome {
                Ok(run) => {
                    let scores = run
                        .runs
                        .iter()
                        .map(|r| {
                            let m = r.result.algorithm.to_string();
                            timings.add(&m, r.diversify_seconds, r.total_seconds);
                            (m, r.score)
                        })
                        .collect();
                    per_query.insert(q.query.clone(), scores);
                }
                Err(e) => {
                    failures.insert(q.query.clone(), e.clone());
                }
            }
        }
        Ok((Self::build(methods, per_query, failures)?, timings))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for m in &self.methods {
            let w = self.tally.get(m).copied().unwrap_or_default();
            writeln!(
                out,
                "{m},{},{},{},{},{}",
                w.average,
                w.min,
                w.average_ties,
                w.min_ties,
                self.per_query.len()
            )
            .unwrap();
        }
        out
    }

    pub fn per_query_csv(&self) -> String {
        let mut out = format!("{PER_QUERY_CSV_HEADER}\n");
        for (q, scores) in &self.per_query {
            for m in &self.methods {
                if let Some(s) = scores.get(m) {
                    writeln!(out, "{q},{m},{},{},{},{}", s.average, s.min, s.n, s.k).unwrap();
                }
            }
        }
        out
    }

    /// Writes `summary.json`, `summary.csv`, `per_query.csv` and
    /// `timings.csv` into `dir`.
    pub fn write(&self, timings: &Timings, dir: &Path) -> Result<()> {
        write_text(&dir.join("summary.json"), &self.to_json())?;
        write_text(&dir.join("summary.csv"), &self.summary_csv())?;
        write_text(&dir.join("per_query.csv"), &self.per_query_csv())?;
        write_text(&dir.join("timings.csv"), &timings.csv(&self.methods))
    }
}

/// Runs `algorithms` on one generated instance per setting; query names are
/// `synthetic<seed>`.
pub fn bench_synthetic(
    specs: &[SyntheticSpec],
    algorithms: &[Algorithm],
    params: &DiversifyParams,
) -> Result<(BenchReport, Timings)> {
    let methods: Vec<String> = algorithms.iter().map(|a| a.to_string()).collect();
    let mut per_query = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut timings = Timings::default();
    for spec in specs {
        let name = format!("synthetic{}", spec.seed);
        let inst = generate(spec)?;
        let mut scores = BTreeMap::new();
        let mut failed = None;
        for &a in algorithms {
            let t0 = Instant::now();
            match run_algorithm(a, &inst.queries, &inst.tuples, params) {
                Ok(r) => {
                    let secs = t0.elapsed().as_secs_f64();
                    timings.add(a.name(), secs, secs);
                    scores.insert(a.to_string(), diversity_score(&inst.queries, &inst.tuples, &r.indices(), params.distance)?);
                }
                Err(e) => {
                    failed = Some(format!("{a}: {e}"));
                    break;
                }
            }
        }
        match failed {
            Some(e) => {
                failures.insert(name, e);
            }
            None => {
                per_query.insert(name, scores);
            }
        }
    }
    Ok((BenchReport::build(methods, per_query, failures)?, timings))
}
