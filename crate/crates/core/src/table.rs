//! Loosely-typed CSV tables for externally supplied inputs (accuracy
//! tables, transfer matrices, score tables picked by column name).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{AbxError, Result};
use crate::selection::{CheckpointSeries, PairMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(|c| c.trim().to_string()).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { headers, rows })
    }

    pub fn has(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AbxError::Table(format!("no column {name:?} (have {:?})", self.headers)))
    }

    /// Keeps rows where every `(column, value)` filter matches.
    pub fn filter(&self, filters: &[(String, String)]) -> Result<Table> {
        let idx: Vec<(usize, &str)> = filters
            .iter()
            .map(|(c, v)| Ok((self.column(c)?, v.as_str())))
            .collect::<Result<_>>()?;
        Ok(Table {
            headers: self.headers.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| idx.iter().all(|(i, v)| r[*i] == *v))
                .cloned()
                .collect(),
        })
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        let s = &self.rows[row][col];
        s.parse()
            .map_err(|_| AbxError::Table(format!("row {}: {:?} is not a number", row + 1, s)))
    }

    /// Mean of `value` per key, where the key is the tuple of `keys` columns.
    /// Repeated keys (e.g. several probe seeds) are averaged.
    pub fn mean_by(&self, keys: &[&str], value: &str) -> Result<BTreeMap<Vec<String>, f64>> {
        let ki: Vec<usize> = keys.iter().map(|k| self.column(k)).collect::<Result<_>>()?;
        let vi = self.column(value)?;
        let mut acc: BTreeMap<Vec<String>, (f64, usize)> = BTreeMap::new();
        for (r, row) in self.rows.iter().enumerate() {
            let key = ki.iter().map(|&i| row[i].clone()).collect();
            let v = self.f64_at(r, vi)?;
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        Ok(acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| AbxError::Table(format!("{s:?} is not a checkpoint number")))
}

/// `language, checkpoint, <value>` → series per language.
pub fn checkpoint_series(table: &Table, value: &str) -> Result<CheckpointSeries> {
    let mut out: CheckpointSeries = BTreeMap::new();
    for (k, v) in table.mean_by(&["language", "checkpoint"], value)? {
        out.entry(k[0].clone()).or_default().insert(parse_u64(&k[1])?, v);
    }
    Ok(out)
}

/// `language, <value>` → value per language.
pub fn language_values(table: &Table, value: &str) -> Result<BTreeMap<String, f64>> {
    Ok(table
        .mean_by(&["language"], value)?
        .into_iter()
        .map(|(k, v)| (k[0].clone(), v))
        .collect())
}

/// Pair-keyed values from `source,target` or `lang1,lang2` columns.
pub fn pair_values(table: &Table, value: &str) -> Result<PairMatrix> {
    let keys: [&str; 2] = if table.has("source") && table.has("target") {
        ["source", "target"]
    } else {
        ["lang1", "lang2"]
    };
    Ok(table
        .mean_by(&keys, value)?
        .into_iter()
        .map(|(k, v)| ((k[0].clone(), k[1].clone()), v))
        .collect())
}
