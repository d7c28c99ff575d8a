//! Experiment harness: the end-to-end pipeline, synthetic instance
//! generators, experiment suites and report writers.

mod experiments;
mod pipeline;
mod report;
mod synthetic;

pub use experiments::{
    ablate_pruning, case_study, case_study_prepared, loglog_slope, scale_runtime, sweep_p, top_similar, AblationRow,
    CaseMethod, CaseRow, ScaleAxis, ScaleReport, ScaleRow, SweepRow,
};
pub use pipeline::{
    prepare_query, result_json, run_algorithm, run_pipeline, search_tables, serialize_query_and_pool, union_csv,
    AlgorithmRun, PipelineReport, PreparedQuery, ProviderChoice, QueryOutcome, QueryRun, RunConfig,
};
pub use report::{
    bench_synthetic, BenchReport, Timings, PER_QUERY_CSV_HEADER, SUMMARY_CSV_HEADER, TIMINGS_CSV_HEADER,
};
pub use synthetic::{
    alignment_benchmark, generate, table_name, AlignmentBenchmark, AlignmentSpec, SyntheticInstance, SyntheticSpec,
};

use std::fmt::Write as _;

/// CSV text for rows that serialize as flat records.
pub fn rows_csv<T: serde::Serialize>(rows: &[T]) -> crate::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|source| crate::Error::Csv {
            path: "report".into(),
            source,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `algorithm,x,seconds` rows followed by nothing else; exponents are
/// reported separately by [`scale_exponents_csv`].
pub fn scale_csv(report: &ScaleReport) -> String {
    let mut out = String::from("algorithm,x,seconds\n");
    for r in &report.rows {
        writeln!(out, "{},{},{}", r.algorithm, r.x, r.seconds).unwrap();
    }
    out
}

pub fn scale_exponents_csv(report: &ScaleReport) -> String {
    let mut out = String::from("algorithm,exponent\n");
    for (a, e) in &report.exponents {
        match e {
            Some(v) => writeln!(out, "{a},{v}").unwrap(),
            None => writeln!(out, "{a},n/a").unwrap(),
        }
    }
    out
}
