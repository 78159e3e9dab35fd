//! Score columns and the persisted score table.
//!
//! On disk a table is a CSV file (`id` plus one column per method) and a JSON
//! sidecar next to it (`<stem>.meta.json`) holding each column's ranking
//! direction, declared range and the flags that produced it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PairId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" | "higher_better" => Ok(Direction::HigherBetter),
            "lower" | "lower_better" => Ok(Direction::LowerBetter),
            other => Err(Error::domain(format!("unknown direction `{other}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HigherBetter => "higher_better",
            Direction::LowerBetter => "lower_better",
        })
    }
}

/// One score per corpus pair, indexed by pair id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreColumn {
    pub method: String,
    pub direction: Direction,
    pub range: Option<(f64, f64)>,
    pub scores: Vec<f64>,
    /// Settings that affect the ranking (side, metric, model parameters, input digests...).
    pub flags: BTreeMap<String, String>,
}

impl ScoreColumn {
    pub fn new(method: impl Into<String>, direction: Direction, scores: Vec<f64>) -> Self {
        ScoreColumn {
            method: method.into(),
            direction,
            range: None,
            scores,
            flags: BTreeMap::new(),
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn with_flag(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.flags.insert(key.into(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: PairId) -> Option<f64> {
        self.scores.get(id).copied()
    }

    /// Checks finiteness and the declared range.
    pub fn validate(&self) -> Result<()> {
        for (id, &s) in self.scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite { row: id + 1 });
            }
            if let Some((lo, hi)) = self.range {
                if s < lo || s > hi {
                    return Err(Error::OutOfRange { id, score: s, lo, hi });
                }
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> ColumnMeta {
        ColumnMeta {
            name: self.method.clone(),
            direction: self.direction,
            range: self.range.map(|(lo, hi)| [lo, hi]),
            flags: self.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub flags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableMeta {
    version: u32,
    n_docs: usize,
    fingerprint: String,
    columns: Vec<ColumnMeta>,
}

/// Hex SHA-256 of the canonical (sorted-key) JSON form of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).and_then(|v| serde_json::to_vec(&v));
    let bytes = canonical.expect("fingerprint input serializes to JSON");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 of a file's bytes, used to record inputs by content.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    n_docs: usize,
    columns: Vec<ScoreColumn>,
}

impl ScoreTable {
    pub fn new(n_docs: usize) -> Self {
        ScoreTable {
            n_docs,
            columns: Vec::new(),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn columns(&self) -> &[ScoreColumn] {
        &self.columns
    }

    pub fn column(&self, method: &str) -> Result<&ScoreColumn> {
        self.columns
            .iter()
            .find(|c| c.method == method)
            .ok_or_else(|| Error::UnknownColumn(method.to_owned()))
    }

    pub fn contains(&self, method: &str) -> bool {
        self.columns.iter().any(|c| c.method == method)
    }

    /// Adds a column; an existing column of the same name is replaced only with `force`.
    pub fn insert(&mut self, column: ScoreColumn, force: bool) -> Result<()> {
        if column.len() != self.n_docs {
            return Err(Error::domain(format!(
                "column `{}` has {} scores for {} pairs",
                column.method,
                column.len(),
                self.n_docs
            )));
        }
        if column.method.is_empty() || column.method == "id" || column.method.contains([',', '"', '\n']) {
            return Err(Error::domain(format!("invalid column name {:?}", column.method)));
        }
        column.validate()?;
        match self.columns.iter_mut().find(|c| c.method == column.method) {
            Some(_) if !force => Err(Error::ColumnExists(column.method)),
            Some(slot) => {
                *slot = column;
                Ok(())
            }
            None => {
                self.columns.push(column);
                Ok(())
            }
        }
    }

    /// Fingerprint over every column's ranking-relevant metadata.
    pub fn fingerprint(&self) -> String {
        let mut metas: Vec<ColumnMeta> = self.columns.iter().map(ScoreColumn::metadata).collect();
        metas.sort_by(|a, b| a.name.cmp(&b.name));
        fingerprint(&metas)
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let stem = csv_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scores".to_owned());
        csv_path.with_file_name(format!("{stem}.meta.json"))
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut out = BufWriter::new(file);
        write!(out, "id")?;
        for c in &self.columns {
            write!(out, ",{}", c.method)?;
        }
        writeln!(out)?;
        for id in 0..self.n_docs {
            write!(out, "{id}")?;
            for c in &self.columns {
                write!(out, ",{:?}", c.scores[id])?;
            }
            writeln!(out)?;
        }
        out.flush()?;

        let meta = TableMeta {
            version: 1,
            n_docs: self.n_docs,
            fingerprint: self.fingerprint(),
            columns: self.columns.iter().map(ScoreColumn::metadata).collect(),
        };
        let sidecar = Self::sidecar_path(csv_path);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let sidecar = Self::sidecar_path(csv_path);
        let meta_text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: TableMeta = serde_json::from_str(&meta_text)?;

        let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let headers = reader.headers()?.clone();
        let names: Vec<&str> = headers.iter().skip(1).collect();
        let expected: Vec<&str> = meta.columns.iter().map(|c| c.name.as_str()).collect();
        if headers.get(0) != Some("id") || names != expected {
            return Err(Error::domain("score table header does not match its sidecar"));
        }
        let mut scores: Vec<Vec<f64>> = vec![Vec::with_capacity(meta.n_docs); names.len()];
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |reason: &str| Error::Malformed {
                row: row + 2,
                reason: reason.to_owned(),
            };
            let id: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad id"))?;
            if id != row {
                return Err(bad("ids must be dense and ordered"));
            }
            for (col, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field.parse().map_err(|_| bad("bad score"))?;
                scores.get_mut(col).ok_or_else(|| bad("too many fields"))?.push(v);
            }
        }
        let mut table = ScoreTable::new(meta.n_docs);
        for (cm, s) in meta.columns.into_iter().zip(scores) {
            table.insert(
                ScoreColumn {
                    method: cm.name,
                    direction: cm.direction,
                    range: cm.range.map(|[lo, hi]| (lo, hi)),
                    scores: s,
                    flags: cm.flags,
                },
                false,
            )?;
        }
        Ok(table)
    }
}
