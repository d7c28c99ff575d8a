//! Tuple embedding matrices, providers and the JSON Lines exchange formats.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::distance::norm;
use super::ser::SerializedTuple;
use crate::column_align::tokenize;
use crate::error::{Error, Result};
use crate::hashing::{bucket, l2_normalize};
use crate::lake_model::TupleRef;

pub const DEFAULT_TUPLE_DIM: usize = 256;
/// Width of imported transformer embeddings.
pub const TRANSFORMER_DIM: usize = 768;

/// Row-major `|ids| x dim` matrix of tuple embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<TupleRef>,
    data: Vec<f64>,
    dim: usize,
    pub provider_tag: String,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<TupleRef>, rows: Vec<Vec<f64>>, provider_tag: impl Into<String>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::InvalidParams(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        let mut seen = HashSet::new();
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(id.to_string()));
            }
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.clone()));
            }
            data.extend_from_slice(row);
        }
        if !rows.is_empty() && dim == 0 {
            return Err(Error::InvalidParams("embedding dimension is zero".into()));
        }
        Ok(Self {
            ids,
            data,
            dim,
            provider_tag: provider_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[TupleRef] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &TupleRef {
        &self.ids[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn position(&self, id: &TupleRef) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            data,
            dim: self.dim,
            provider_tag: self.provider_tag.clone(),
        }
    }

    /// Errors on the first all-zero row; cosine distance needs a direction.
    pub fn ensure_nonzero(&self) -> Result<()> {
        match (0..self.len()).find(|&i| norm(self.row(i)) == 0.0) {
            Some(i) => Err(Error::Provider {
                id: self.ids[i].clone(),
                reason: "zero vector".into(),
            }),
            None => Ok(()),
        }
    }
}

pub trait TupleProvider {
    fn dim(&self) -> usize;
    fn tag(&self) -> &str;
    fn embed(&self, tuple: &SerializedTuple) -> Result<Vec<f64>>;
}

/// Hashed bag of `(header token, value token)` pairs, L2-normalized. The
/// feature multiset ignores column order, so shuffled columns embed
/// identically.
#[derive(Debug, Clone)]
pub struct HashedPairProvider {
    dim: usize,
}

impl HashedPairProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }
}

impl Default for HashedPairProvider {
    fn default() -> Self {
        Self::new(DEFAULT_TUPLE_DIM)
    }
}

impl TupleProvider for HashedPairProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> &str {
        "builtin-hashed-pairs"
    }

    fn embed(&self, tuple: &SerializedTuple) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        for (h, val) in &tuple.segments {
            let htoks: Vec<String> = tokenize(h).collect();
            for vt in tokenize(val) {
                for ht in &htoks {
                    v[bucket(&format!("{ht}\u{1f}{vt}"), self.dim)] += 1.0;
                }
            }
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderRecord {
    dim: usize,
    provider: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TupleRecord {
    table: String,
    row: usize,
    vec: Vec<f64>,
}

/// Vectors imported from a JSON Lines file whose first line is
/// `{"dim": int, "provider": str}` followed by `{"table", "row", "vec"}`
/// records.
#[derive(Debug, Clone)]
pub struct JsonlTupleProvider {
    dim: usize,
    tag: String,
    vectors: HashMap<TupleRef, Vec<f64>>,
}

impl JsonlTupleProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn from_reader(reader: impl BufRead, context: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let json_err = |lineno: usize| {
            let context = format!("{context}:{}", lineno + 1);
            move |source| Error::Json { context, source }
        };
        let io_err = |source| Error::Io {
            path: context.into(),
            source,
        };
        let header: HeaderRecord = loop {
            let (n, line) = lines.next().ok_or(Error::Empty("embedding file header"))?;
            let line = line.map_err(io_err)?;
            if !line.trim().is_empty() {
                break serde_json::from_str(&line).map_err(json_err(n))?;
            }
        };
        if header.dim == 0 {
            return Err(Error::InvalidParams("embedding header declares dim 0".into()));
        }
        let mut vectors = HashMap::new();
        for (n, line) in lines {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TupleRecord = serde_json::from_str(&line).map_err(json_err(n))?;
            if rec.vec.len() != header.dim {
                return Err(Error::DimensionMismatch {
                    expected: header.dim,
                    found: rec.vec.len(),
                });
            }
            vectors.insert(TupleRef::new(rec.table, rec.row), rec.vec);
        }
        Ok(Self {
            dim: header.dim,
            tag: header.provider,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl TupleProvider for JsonlTupleProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, tuple: &SerializedTuple) -> Result<Vec<f64>> {
        self.vectors
            .get(&tuple.source)
            .cloned()
            .ok_or_else(|| Error::MissingTupleEmbedding(tuple.source.clone()))
    }
}

/// Embeds tuples in order; the first failure aborts the batch and names the
/// offending tuple.
pub fn embed_tuples(tuples: &[SerializedTuple], provider: &dyn TupleProvider) -> Result<EmbeddingMatrix> {
    let mut rows = Vec::with_capacity(tuples.len());
    for t in tuples {
        let v = provider.embed(t).map_err(|e| match e {
            Error::MissingTupleEmbedding(_) | Error::Provider { .. } => e,
            other => Error::Provider {
                id: t.source.clone(),
                reason: other.to_string(),
            },
        })?;
        if v.len() != provider.dim() {
            return Err(Error::Provider {
                id: t.source.clone(),
                reason: format!("dimension {} != {}", v.len(), provider.dim()),
            });
        }
        if norm(&v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Provider {
                id: t.source.clone(),
                reason: "zero or non-finite vector".into(),
            });
        }
        rows.push(v);
    }
    EmbeddingMatrix::new(
        tuples.iter().map(|t| t.source.clone()).collect(),
        rows,
        provider.tag(),
    )
}

pub fn write_embeddings_jsonl(m: &EmbeddingMatrix, mut w: impl Write) -> std::io::Result<()> {
    let header = HeaderRecord {
        dim: m.dim(),
        provider: m.provider_tag.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for i in 0..m.len() {
        let rec = TupleRecord {
            table: m.id(i).table.clone(),
            row: m.id(i).row,
            vec: m.row(i).to_vec(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRecord {
    line: usize,
    table: String,
    row: usize,
}

/// Writes one serialized tuple per line plus an index file mapping each line
/// number to its source tuple.
pub fn export_serialized(
    tuples: &[SerializedTuple],
    mut text: impl Write,
    mut index: impl Write,
) -> std::io::Result<()> {
    for (line, t) in tuples.iter().enumerate() {
        writeln!(text, "{}", t.text)?;
        let rec = IndexRecord {
            line,
            table: t.source.table.clone(),
            row: t.source.row,
        };
        writeln!(index, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

/// Reads a serialized-tuple export back as `(text, source)` pairs.
pub fn read_serialized(text: impl BufRead, index: impl BufRead) -> Result<Vec<(String, TupleRef)>> {
    let io_err = |source| Error::Io {
        path: "serialized export".into(),
        source,
    };
    let lines: Vec<String> = text.lines().collect::<std::io::Result<_>>().map_err(io_err)?;
    let mut out = Vec::with_capacity(lines.len());
    for (n, rec) in index.lines().enumerate() {
        let rec = rec.map_err(io_err)?;
        if rec.trim().is_empty() {
            continue;
        }
        let rec: IndexRecord = serde_json::from_str(&rec).map_err(|source| Error::Json {
            context: format!("index line {}", n + 1),
            source,
        })?;
        let line = lines
            .get(rec.line)
            .ok_or_else(|| Error::Malformed(format!("index points past line {}", rec.line)))?;
        out.push((line.clone(), TupleRef::new(rec.table, rec.row)));
    }
    Ok(out)
}
