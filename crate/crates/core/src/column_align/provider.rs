//! Column embedding providers.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokens::{tfidf_select_tokens, tokenize, TokenCorpus, WeightedToken, MAX_COLUMN_TOKENS};
use crate::error::{Error, Result};
use crate::hashing::{bucket, l2_normalize};
use crate::lake_model::{Cell, ColumnRef};

pub const DEFAULT_COLUMN_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    /// Mean of one vector per cell.
    Cell,
    /// One vector over the TF-IDF-selected tokens of the whole column.
    #[default]
    Column,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnVector {
    pub column: ColumnRef,
    pub vec: Vec<f64>,
}

pub trait ColumnProvider {
    fn dim(&self) -> usize;

    fn embed_tokens(&self, tokens: &[WeightedToken]) -> Result<Vec<f64>>;

    fn embed_column(
        &self,
        _column: &ColumnRef,
        values: &[Cell],
        corpus: &TokenCorpus,
        mode: EmbedMode,
    ) -> Result<Vec<f64>> {
        match mode {
            EmbedMode::Column => {
                self.embed_tokens(&tfidf_select_tokens(values, corpus, MAX_COLUMN_TOKENS))
            }
            EmbedMode::Cell => {
                let mut acc = vec![0.0; self.dim()];
                let mut n = 0usize;
                for v in values.iter().flatten() {
                    let toks: Vec<WeightedToken> = tokenize(v)
                        .map(|t| {
                            let weight = corpus.idf(&t);
                            WeightedToken { token: t, weight }
                        })
                        .collect();
                    let cell = self.embed_tokens(&toks)?;
                    check_dim(self.dim(), cell.len())?;
                    acc.iter_mut().zip(&cell).for_each(|(a, c)| *a += c);
                    n += 1;
                }
                if n > 0 {
                    acc.iter_mut().for_each(|a| *a /= n as f64);
                }
                Ok(acc)
            }
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Hashed bag of tokens weighted by the supplied token weights, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBagProvider {
    dim: usize,
}

impl HashedBagProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }
}

impl Default for HashedBagProvider {
    fn default() -> Self {
        Self::new(DEFAULT_COLUMN_DIM)
    }
}

impl ColumnProvider for HashedBagProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_tokens(&self, tokens: &[WeightedToken]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        for t in tokens {
            v[bucket(&t.token, self.dim)] += t.weight;
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ColumnRecord {
    table: String,
    index: usize,
    vec: Vec<f64>,
}

/// Pre-computed column vectors read from JSON Lines
/// `{"table": str, "index": int, "vec": [float]}`.
#[derive(Debug, Clone)]
pub struct JsonlColumnProvider {
    dim: usize,
    vectors: HashMap<ColumnRef, Vec<f64>>,
}

impl JsonlColumnProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn from_reader(reader: impl BufRead, context: &str) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: context.into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ColumnRecord = serde_json::from_str(&line).map_err(|source| Error::Json {
                context: format!("{context}:{}", lineno + 1),
                source,
            })?;
            let d = *dim.get_or_insert(rec.vec.len());
            check_dim(d, rec.vec.len())?;
            let col = ColumnRef::new(rec.table, rec.index);
            if rec.vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(col.to_string()));
            }
            vectors.insert(col, rec.vec);
        }
        let dim = dim.ok_or(Error::Empty("column embedding file"))?;
        Ok(Self { dim, vectors })
    }
}

impl ColumnProvider for JsonlColumnProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_tokens(&self, _tokens: &[WeightedToken]) -> Result<Vec<f64>> {
        Err(Error::Malformed(
            "imported column embeddings cannot embed free text".into(),
        ))
    }

    fn embed_column(
        &self,
        column: &ColumnRef,
        _values: &[Cell],
        _corpus: &TokenCorpus,
        _mode: EmbedMode,
    ) -> Result<Vec<f64>> {
        self.vectors
            .get(column)
            .cloned()
            .ok_or_else(|| Error::MissingColumnEmbedding(column.clone()))
    }
}

/// Embeds one column and checks the provider's output contract.
pub fn embed_column(
    column: &ColumnRef,
    values: &[Cell],
    provider: &dyn ColumnProvider,
    mode: EmbedMode,
    corpus: &TokenCorpus,
) -> Result<ColumnVector> {
    let vec = provider.embed_column(column, values, corpus, mode)?;
    check_dim(provider.dim(), vec.len())?;
    if vec.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(column.to_string()));
    }
    Ok(ColumnVector {
        column: column.clone(),
        vec,
    })
}
