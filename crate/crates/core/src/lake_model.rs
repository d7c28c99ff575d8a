//! Tables, column and tuple references, and the benchmark manifest.
//!
//! A [`Table`] is immutable once loaded: every row has exactly one cell per
//! column, cells are nullable text, and headers are unique after
//! case-folding. Nothing here infers numeric types.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell spellings that load as null.
pub const NULL_SPELLINGS: [&str; 5] = ["", "nan", "NaN", "null", "NULL"];

/// Smallest query table accepted by [`validate_query`].
pub const MIN_QUERY_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRole {
    Query,
    Lake,
}

/// A column addressed lake-wide by owning table and 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub index: usize,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, index: usize) -> Self {
        Self {
            table: table.into(),
            index,
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.c{}", self.table, self.index)
    }
}

/// A row addressed lake-wide. Ordering is lexicographic on `(table, row)`,
/// which every tie-break in the crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TupleRef {
    pub table: String,
    pub row: usize,
}

impl TupleRef {
    pub fn new(table: impl Into<String>, row: usize) -> Self {
        Self {
            table: table.into(),
            row,
        }
    }
}

impl fmt::Display for TupleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.table, self.row)
    }
}

pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub role: TableRole,
    /// Display headers, trimmed. Missing headers are `col<index>`.
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Builds a table from raw string cells, applying the same cell and
    /// header normalization as [`load_table`].
    pub fn from_raw<S: AsRef<str>>(
        name: impl Into<String>,
        role: TableRole,
        headers: &[S],
        rows: &[Vec<S>],
    ) -> Result<Self> {
        let name = name.into();
        let headers = normalize_headers(headers.iter().map(|h| h.as_ref()), Path::new(&name))?;
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(Error::RaggedRow {
                    path: PathBuf::from(&name),
                    row: i,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
            out.push(row.iter().map(|c| normalize_cell(c.as_ref())).collect());
        }
        Ok(Self {
            name,
            role,
            headers,
            rows: out,
        })
    }

    pub fn num_columns(&self) -> usize {
        self.headers.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_ref(&self, index: usize) -> ColumnRef {
        ColumnRef::new(self.name.clone(), index)
    }

    pub fn column_refs(&self) -> Vec<ColumnRef> {
        (0..self.num_columns()).map(|j| self.column_ref(j)).collect()
    }

    /// `t_i[c_j]`; `None` both for null cells and out-of-range indices.
    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows.get(row)?.get(col)?.as_deref()
    }

    pub fn column_values(&self, col: usize) -> Vec<Cell> {
        self.rows.iter().map(|r| r[col].clone()).collect()
    }

    pub fn header_key(&self, col: usize) -> String {
        header_key(&self.headers[col])
    }
}

pub fn header_key(header: &str) -> String {
    header.trim().to_lowercase()
}

fn normalize_cell(raw: &str) -> Cell {
    let v = raw.trim();
    if NULL_SPELLINGS.contains(&v) {
        None
    } else {
        Some(v.to_string())
    }
}

fn normalize_headers<'a>(raw: impl Iterator<Item = &'a str>, path: &Path) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, h) in raw.enumerate() {
        let h = h.trim();
        let h = if h.is_empty() {
            format!("col{i}")
        } else {
            h.to_string()
        };
        if !seen.insert(header_key(&h)) {
            return Err(Error::DuplicateHeader {
                path: path.to_path_buf(),
                header: h,
            });
        }
        out.push(h);
    }
    Ok(out)
}

/// Loads a delimited text table with a mandatory header row. The table is
/// named after the file stem.
pub fn load_table(path: &Path, role: TableRole) -> Result<Table> {
    load_table_with_delimiter(path, role, b',')
}

pub fn load_table_with_delimiter(path: &Path, role: TableRole, delimiter: u8) -> Result<Table> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = normalize_headers(reader.headers().map_err(csv_err)?.iter(), path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: i,
                expected: headers.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(normalize_cell).collect());
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Table {
        name,
        role,
        headers,
        rows,
    })
}

/// Writes a table as CSV; nulls are written as empty cells.
pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&table.headers).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Removes columns whose every cell is null. Idempotent.
pub fn drop_null_columns(table: &Table) -> Table {
    let keep: Vec<usize> = (0..table.num_columns())
        .filter(|&j| table.rows.iter().any(|r| r[j].is_some()))
        .collect();
    Table {
        name: table.name.clone(),
        role: table.role,
        headers: keep.iter().map(|&j| table.headers[j].clone()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| keep.iter().map(|&j| r[j].clone()).collect())
            .collect(),
    }
}

pub fn validate_query(table: &Table) -> Result<()> {
    if table.num_rows() < MIN_QUERY_ROWS {
        return Err(Error::QueryTooSmall {
            table: table.name.clone(),
            rows: table.num_rows(),
        });
    }
    Ok(())
}

/// Benchmark manifest. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub query_tables: Vec<PathBuf>,
    pub lake_tables: Vec<PathBuf>,
    #[serde(default)]
    pub candidates: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub alignment_ground_truth: Option<Vec<[ColumnRef; 2]>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads every table named in the manifest, normalized and with all-null
    /// columns removed.
    pub fn load_tables(&self) -> Result<(Vec<Table>, Vec<Table>)> {
        let load = |p: &PathBuf, role| {
            load_table(&self.resolve(p), role).map(|t| drop_null_columns(&t))
        };
        let queries = self
            .query_tables
            .iter()
            .map(|p| load(p, TableRole::Query))
            .collect::<Result<Vec<_>>>()?;
        let lake = self
            .lake_tables
            .iter()
            .map(|p| load(p, TableRole::Lake))
            .collect::<Result<Vec<_>>>()?;
        Ok((queries, lake))
    }
}
