//! Seeded synthetic instances: Gaussian-mixture tuple embeddings with
//! planted duplicates, and text tables with known column alignments.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lake_model::{write_table, ColumnRef, Manifest, Table, TableRole, TupleRef};
use crate::serialize_embed::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_tuples: usize,
    pub n_tables: usize,
    pub n_components: usize,
    /// Standard deviation of tuples around their component center.
    pub noise: f64,
    /// Fraction of pool tuples that are exact copies of a query tuple or of
    /// an earlier pool tuple.
    pub duplicate_fraction: f64,
    pub n_query: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 32,
            n_tuples: 2000,
            n_tables: 20,
            n_components: 40,
            noise: 0.35,
            duplicate_fraction: 0.0,
            n_query: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub queries: EmbeddingMatrix,
    pub tuples: EmbeddingMatrix,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn around(rng: &mut ChaCha8Rng, center: &[f64], noise: f64) -> Vec<f64> {
    center
        .iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(rng);
            c + noise * z
        })
        .collect()
}

pub fn table_name(i: usize) -> String {
    format!("lake{i:03}")
}

/// Query tuples come from component 0; pool tuples from uniformly chosen
/// components, each component feeding one table.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    if spec.dim == 0 || spec.n_tables == 0 || spec.n_components == 0 || spec.n_query == 0 {
        return Err(Error::InvalidParams("synthetic instance sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.duplicate_fraction) {
        return Err(Error::InvalidParams("duplicate fraction outside [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.n_components).map(|_| gaussian(&mut rng, spec.dim)).collect();
    let queries: Vec<Vec<f64>> = (0..spec.n_query)
        .map(|_| around(&mut rng, &centers[0], spec.noise))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n_tuples);
    let mut ids = Vec::with_capacity(spec.n_tuples);
    let mut next_row = vec![0usize; spec.n_tables];
    let mut originals: Vec<usize> = Vec::new();
    for _ in 0..spec.n_tuples {
        let dup = rng.gen::<f64>() < spec.duplicate_fraction;
        let (vec, table) = if dup {
            let table = rng.gen_range(0..spec.n_tables);
            if originals.is_empty() || rng.gen_bool(0.5) {
                (queries[rng.gen_range(0..queries.len())].clone(), table)
            } else {
                (rows[*originals.choose(&mut rng).unwrap()].clone(), table)
            }
        } else {
            let c = rng.gen_range(0..spec.n_components);
            originals.push(rows.len());
            (around(&mut rng, &centers[c], spec.noise), c % spec.n_tables)
        };
        ids.push(TupleRef::new(table_name(table), next_row[table]));
        next_row[table] += 1;
        rows.push(vec);
    }
    let query_ids = (0..spec.n_query).map(|i| TupleRef::new("query", i)).collect();
    Ok(SyntheticInstance {
        queries: EmbeddingMatrix::new(query_ids, queries, "synthetic")?,
        tuples: EmbeddingMatrix::new(ids, rows, "synthetic")?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSpec {
    pub n_base: usize,
    pub lake_per_base: usize,
    pub columns: usize,
    pub rows: usize,
    pub vocabulary: usize,
    /// Probability that a cell token is replaced by a token from a shared
    /// noise vocabulary.
    pub noise: f64,
    pub seed: u64,
}

impl Default for AlignmentSpec {
    fn default() -> Self {
        Self {
            n_base: 5,
            lake_per_base: 4,
            columns: 4,
            rows: 30,
            vocabulary: 40,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Text tables with planted alignments.
#[derive(Debug, Clone)]
pub struct AlignmentBenchmark {
    pub queries: Vec<Table>,
    pub lake: Vec<Table>,
    pub candidates: BTreeMap<String, Vec<String>>,
    pub truth: Vec<[ColumnRef; 2]>,
}

const HEADER_WORDS: [&str; 8] = ["name", "city", "owner", "kind", "code", "region", "label", "group"];

/// Each base table has columns with disjoint token vocabularies. Its query
/// keeps every column; each lake table takes a shuffled subset of at least
/// two columns and fresh rows.
pub fn alignment_benchmark(spec: &AlignmentSpec) -> Result<AlignmentBenchmark> {
    if spec.columns < 2 || spec.rows < 3 || spec.vocabulary == 0 {
        return Err(Error::InvalidParams("alignment benchmark too small".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise_vocab: Vec<String> = (0..spec.vocabulary).map(|w| format!("noise{w}")).collect();
    let cell = |rng: &mut ChaCha8Rng, b: usize, c: usize| -> String {
        (0..2)
            .map(|_| {
                if rng.gen::<f64>() < spec.noise {
                    noise_vocab.choose(rng).unwrap().clone()
                } else {
                    format!("b{b}c{c}w{}", rng.gen_range(0..spec.vocabulary))
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = AlignmentBenchmark {
        queries: Vec::new(),
        lake: Vec::new(),
        candidates: BTreeMap::new(),
        truth: Vec::new(),
    };
    for b in 0..spec.n_base {
        let qname = format!("query{b}");
        let headers: Vec<String> = (0..spec.columns)
            .map(|c| format!("{} {c}", HEADER_WORDS[c % HEADER_WORDS.len()]))
            .collect();
        let rows: Vec<Vec<String>> = (0..spec.rows)
            .map(|_| (0..spec.columns).map(|c| cell(&mut rng, b, c)).collect())
            .collect();
        out.queries.push(Table::from_raw(&qname, TableRole::Query, &headers, &rows)?);
        let mut names = Vec::new();
        for l in 0..spec.lake_per_base {
            let name = format!("base{b}_part{l}");
            let mut cols: Vec<usize> = (0..spec.columns).collect();
            cols.shuffle(&mut rng);
            cols.truncate(rng.gen_range(2..=spec.columns));
            let headers: Vec<String> = cols.iter().map(|&c| format!("attr{c}_{l}")).collect();
            let rows: Vec<Vec<String>> = (0..spec.rows)
                .map(|_| cols.iter().map(|&c| cell(&mut rng, b, c)).collect())
                .collect();
            out.lake.push(Table::from_raw(&name, TableRole::Lake, &headers, &rows)?);
            for (j, &c) in cols.iter().enumerate() {
                out.truth.push([ColumnRef::new(&qname, c), ColumnRef::new(&name, j)]);
            }
            names.push(name);
        }
        out.candidates.insert(qname, names);
    }
    Ok(out)
}

impl AlignmentBenchmark {
    fn write_csv(&self, t: &Table, dir: &Path) -> Result<std::path::PathBuf> {
        let file = format!("{}.csv", t.name);
        write_table(t, &dir.join(&file))?;
        Ok(file.into())
    }

    /// Writes every table as CSV plus `manifest.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut manifest = Manifest {
            candidates: self.candidates.clone(),
            alignment_ground_truth: Some(self.truth.clone()),
            ..Manifest::default()
        };
        for t in &self.queries {
            manifest.query_tables.push(self.write_csv(t, dir)?);
        }
        for t in &self.lake {
            manifest.lake_tables.push(self.write_csv(t, dir)?);
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        std::fs::write(&path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}
