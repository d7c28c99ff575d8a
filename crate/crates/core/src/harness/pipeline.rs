//! End-to-end run: candidate tables, column alignment, outer union,
//! tuple embedding and diversification, one query at a time.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::column_align::{
    align_columns, embed_column, outer_union, AlignmentMap, ColumnProvider, EmbedMode, HashedBagProvider,
    TokenCorpus, UnionedTupleSet,
};
use crate::diversify::{diversify, prune_tuples, Algorithm, DiverseResult, DiversifyParams};
use crate::error::{Error, Result};
use crate::lake_model::{validate_query, Cell, Manifest, Table};
use crate::metrics::{diversity_score, DiversityScore};
use crate::serialize_embed::{
    cosine_similarity, embed_tuples, serialize_tuple, write_embeddings_jsonl, EmbeddingMatrix, HashedPairProvider,
    JsonlTupleProvider, SerializedTuple, TupleProvider,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderChoice {
    Builtin,
    /// A JSON Lines file, or a directory holding `<query>.jsonl` per query.
    Import(PathBuf),
}

impl FromStr for ProviderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "builtin" {
            return Ok(Self::Builtin);
        }
        match s.strip_prefix("import:") {
            Some(p) if !p.is_empty() => Ok(Self::Import(PathBuf::from(p))),
            _ => Err(Error::InvalidParams(format!(
                "provider must be `builtin` or `import:<path>`, got {s:?}"
            ))),
        }
    }
}

impl ProviderChoice {
    pub fn for_query(&self, query: &str) -> Result<Box<dyn TupleProvider>> {
        match self {
            Self::Builtin => Ok(Box::new(HashedPairProvider::default())),
            Self::Import(p) if p.is_dir() => Ok(Box::new(JsonlTupleProvider::load(&p.join(format!("{query}.jsonl")))?)),
            Self::Import(p) => Ok(Box::new(JsonlTupleProvider::load(p)?)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub provider: ProviderChoice,
    pub align_mode: EmbedMode,
    pub params: DiversifyParams,
    pub algorithms: Vec<Algorithm>,
    pub out_dir: Option<PathBuf>,
    /// Tables kept by the built-in candidate scorer when the manifest lists
    /// no candidates for a query.
    pub search_top: usize,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            provider: ProviderChoice::Builtin,
            align_mode: EmbedMode::Column,
            params: DiversifyParams::default(),
            algorithms: vec![Algorithm::Dust],
            out_dir: None,
            search_top: 10,
        }
    }
}

/// Ranks lake tables by the mean, over query columns, of the best cosine
/// similarity to any of the table's columns. Returns at most `top` names
/// with positive score, best first, ties by name.
pub fn search_tables(query: &Table, lake: &[Table], top: usize) -> Result<Vec<String>> {
    let provider = HashedBagProvider::default();
    let lake: Vec<&Table> = lake.iter().filter(|t| t.name != query.name).collect();
    let all_columns: Vec<Vec<Cell>> = std::iter::once(query)
        .chain(lake.iter().copied())
        .flat_map(|t| (0..t.num_columns()).map(move |j| t.column_values(j)))
        .collect();
    let corpus = TokenCorpus::from_columns(all_columns.iter().map(Vec::as_slice));
    let embed_all = |t: &Table| -> Result<Vec<Vec<f64>>> {
        (0..t.num_columns())
            .map(|j| embed_column(&t.column_ref(j), &t.column_values(j), &provider, EmbedMode::Column, &corpus).map(|c| c.vec))
            .collect()
    };
    let qv = embed_all(query)?;
    let mut scored = Vec::new();
    for t in lake {
        let tv = embed_all(t)?;
        let mut total = 0.0;
        for q in &qv {
            let best = tv
                .iter()
                .filter_map(|v| cosine_similarity(q, v).ok())
                .fold(0.0f64, f64::max);
            total += best;
        }
        let score = total / qv.len().max(1) as f64;
        if score > 0.0 {
            scored.push((score, t.name.clone()));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(top).map(|(_, n)| n).collect())
}

/// Everything between the raw tables and diversification for one query.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub query: Table,
    pub candidates: Vec<String>,
    pub alignment: AlignmentMap,
    pub union: UnionedTupleSet,
    /// Serialized pool tuples, aligned with `pool` rows.
    pub pool_serialized: Vec<SerializedTuple>,
    /// Cells of each pool row under the query schema.
    pub pool_cells: Vec<Vec<Cell>>,
    pub queries: EmbeddingMatrix,
    pub pool: EmbeddingMatrix,
}

/// Serializes the query rows and the unioned pool under the query headers.
/// Pool tuples with every slot null carry no content and are left out.
pub fn serialize_query_and_pool(query: &Table, union: &UnionedTupleSet) -> (Vec<SerializedTuple>, Vec<SerializedTuple>, Vec<Vec<Cell>>) {
    let q = UnionedTupleSet::query_tuples(query)
        .into_iter()
        .map(|t| serialize_tuple(t.source, &t.cells, &union.headers))
        .collect();
    let mut pool = Vec::new();
    let mut cells = Vec::new();
    for t in &union.tuples {
        if t.cells.iter().all(Option::is_none) {
            log::debug!("skipping {}: no aligned values", t.source);
            continue;
        }
        pool.push(serialize_tuple(t.source.clone(), &t.cells, &union.headers));
        cells.push(t.cells.clone());
    }
    (q, pool, cells)
}

pub fn prepare_query(
    query: &Table,
    lake: &[Table],
    candidates: Option<&[String]>,
    provider: &dyn TupleProvider,
    align_mode: EmbedMode,
    search_top: usize,
) -> Result<PreparedQuery> {
    validate_query(query)?;
    let names = match candidates {
        Some(c) => c.to_vec(),
        None => search_tables(query, lake, search_top)?,
    };
    let by_name: BTreeMap<&str, &Table> = lake.iter().map(|t| (t.name.as_str(), t)).collect();
    let tables: Vec<Table> = names
        .iter()
        .map(|n| {
            by_name
                .get(n.as_str())
                .map(|t| (*t).clone())
                .ok_or_else(|| Error::Malformed(format!("candidate table {n:?} is not in the lake")))
        })
        .collect::<Result<_>>()?;
    let column_provider: &dyn ColumnProvider = &HashedBagProvider::default();
    let alignment = align_columns(query, &tables, column_provider, align_mode)?;
    let union = outer_union(query, &tables, &alignment);
    let (q_ser, pool_serialized, pool_cells) = serialize_query_and_pool(query, &union);
    let queries = embed_tuples(&q_ser, provider)?;
    let pool = embed_tuples(&pool_serialized, provider)?;
    Ok(PreparedQuery {
        query: query.clone(),
        candidates: names,
        alignment,
        union,
        pool_serialized,
        pool_cells,
        queries,
        pool,
    })
}

/// Runs one algorithm on a pool. Baselines get the same pruning as DUST so
/// every method sees the same candidates.
pub fn run_algorithm(
    algorithm: Algorithm,
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    params: &DiversifyParams,
) -> Result<DiverseResult> {
    match (algorithm, params.s) {
        (Algorithm::Dust, _) | (_, None) => diversify(algorithm, queries, pool, params),
        (_, Some(s)) => {
            params.validate()?;
            let kept = prune_tuples(pool, s, params.distance);
            let sub = pool.select(&kept);
            let mut r = diversify(algorithm, queries, &sub, params)?;
            for t in &mut r.selected {
                t.index = kept[t.index];
            }
            Ok(r)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmRun {
    pub result: DiverseResult,
    pub score: DiversityScore,
    pub diversify_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryRun {
    pub candidates: Vec<String>,
    pub pool_size: usize,
    pub runs: Vec<AlgorithmRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryOutcome {
    pub query: String,
    pub outcome: std::result::Result<QueryRun, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub algorithms: Vec<Algorithm>,
    pub queries: Vec<QueryOutcome>,
}

impl PipelineReport {
    pub fn failures(&self) -> Vec<(&str, &str)> {
        self.queries
            .iter()
            .filter_map(|q| q.outcome.as_ref().err().map(|e| (q.query.as_str(), e.as_str())))
            .collect()
    }
}

/// Export form of a result: algorithm, parameters, selected tuples with
/// their scores, and the diversity metrics.
pub fn result_json(result: &DiverseResult, score: &DiversityScore) -> serde_json::Value {
    json!({
        "algorithm": result.algorithm,
        "params": result.params,
        "selected": result.selected.iter().map(|s| json!({
            "table": s.id.table,
            "row": s.id.row,
            "rank_score": s.rank_score,
            "tie_score": s.tie_score,
        })).collect::<Vec<_>>(),
        "metrics": score,
    })
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Rows of the union written as CSV, prefixed by their source tuple.
pub fn union_csv(union: &UnionedTupleSet, limit: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["source_table".to_string(), "source_row".to_string()];
    header.extend(union.headers.iter().cloned());
    let csv_err = |source| Error::Csv {
        path: "union".into(),
        source,
    };
    w.write_record(&header).map_err(csv_err)?;
    for t in union.tuples.iter().take(limit) {
        let mut rec = vec![t.source.table.clone(), t.source.row.to_string()];
        rec.extend(t.cells.iter().map(|c| c.clone().unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const UNION_SAMPLE_ROWS: usize = 100;

fn write_artifacts(dir: &Path, prepared: &PreparedQuery, runs: &[AlgorithmRun]) -> Result<()> {
    write_text(&dir.join("alignment.json"), &prepared.alignment.to_json())?;
    write_text(&dir.join("union_sample.csv"), &union_csv(&prepared.union, UNION_SAMPLE_ROWS)?)?;
    let mut buf = Vec::new();
    write_embeddings_jsonl(&prepared.pool, &mut buf).map_err(io_err(dir))?;
    write_text(&dir.join("embeddings.jsonl"), &String::from_utf8(buf).expect("json is utf-8"))?;
    for r in runs {
        let text = serde_json::to_string_pretty(&result_json(&r.result, &r.score)).expect("result serializes");
        write_text(&dir.join(format!("{}.json", r.result.algorithm)), &text)?;
    }
    Ok(())
}

fn run_query(
    config: &RunConfig,
    query: &Table,
    lake: &[Table],
    candidates: Option<&[String]>,
) -> Result<QueryRun> {
    let start = Instant::now();
    let provider = config.provider.for_query(&query.name)?;
    let prepared = prepare_query(query, lake, candidates, provider.as_ref(), config.align_mode, config.search_top)?;
    let prep_seconds = start.elapsed().as_secs_f64();
    let mut runs = Vec::new();
    for &alg in &config.algorithms {
        let t0 = Instant::now();
        let result = run_algorithm(alg, &prepared.queries, &prepared.pool, &config.params)?;
        let diversify_seconds = t0.elapsed().as_secs_f64();
        let score = diversity_score(&prepared.queries, &prepared.pool, &result.indices(), config.params.distance)?;
        runs.push(AlgorithmRun {
            result,
            score,
            diversify_seconds,
            total_seconds: prep_seconds + diversify_seconds,
        });
    }
    if let Some(out) = &config.out_dir {
        write_artifacts(&out.join(&query.name), &prepared, &runs)?;
    }
    Ok(QueryRun {
        candidates: prepared.candidates,
        pool_size: prepared.pool.len(),
        runs,
    })
}

/// Runs every query in the manifest. Manifest and configuration problems
/// are returned as errors; a failure inside one query is recorded in the
/// report and the remaining queries still run.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineReport> {
    config.params.validate()?;
    if config.algorithms.is_empty() {
        return Err(Error::InvalidParams("no algorithms requested".into()));
    }
    let manifest = Manifest::load(&config.manifest)?;
    let (queries, lake) = manifest.load_tables()?;
    let mut outcomes = Vec::new();
    for q in &queries {
        let candidates = manifest.candidates.get(&q.name).map(Vec::as_slice);
        let outcome = run_query(config, q, &lake, candidates).map_err(|e| {
            log::warn!("query {} failed: {e}", q.name);
            e.to_string()
        });
        outcomes.push(QueryOutcome {
            query: q.name.clone(),
            outcome,
        });
    }
    Ok(PipelineReport {
        algorithms: config.algorithms.clone(),
        queries: outcomes,
    })
}
