//! Preliminary component estimates: an `N × H` matrix per window, and a long
//! table keyed by `(series_id, date)` for CSV exchange.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMatrix {
    names: Vec<String>,
    /// `estimates[i][j]` is component `i` at horizon step `j`.
    estimates: Vec<Vec<f64>>,
}

impl ComponentMatrix {
    pub fn new(names: Vec<String>, estimates: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() < 2 {
            return Err(CoreError::domain("need at least two components"));
        }
        if names.len() != estimates.len() {
            return Err(CoreError::domain(format!(
                "{} names for {} component rows",
                names.len(),
                estimates.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(CoreError::domain(format!("duplicate component name `{n}`")));
            }
        }
        let h = estimates[0].len();
        if h == 0 || estimates.iter().any(|r| r.len() != h) {
            return Err(CoreError::domain("component rows must share a nonzero horizon"));
        }
        if estimates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::domain("component estimates must be finite"));
        }
        Ok(Self { names, estimates })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_components(&self) -> usize {
        self.names.len()
    }

    pub fn horizon(&self) -> usize {
        self.estimates[0].len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.estimates[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.estimates
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.estimates[i][j]
    }

    /// Column `j`: all components at one horizon step.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.estimates.iter().map(|r| r[j]).collect()
    }

    /// Plain additive combination `Σ_i l̂_i` per step.
    pub fn additive(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|j| self.estimates.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Long-format component estimates: per series, a date-indexed row of `N`
/// values. CSV layout `series_id,date,<name_1>,...,<name_N>`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentTable {
    names: Vec<String>,
    rows: BTreeMap<String, BTreeMap<NaiveDate, Vec<f64>>>,
}

impl ComponentTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            rows: BTreeMap::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn series_ids(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, series_id: &str, date: NaiveDate, values: Vec<f64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(CoreError::domain(format!(
                "expected {} component values, got {}",
                self.names.len(),
                values.len()
            )));
        }
        self.rows
            .entry(series_id.to_string())
            .or_default()
            .insert(date, values);
        Ok(())
    }

    /// Inserts a whole matrix whose horizon step `j` falls on `dates[j]`.
    pub fn insert_matrix(&mut self, series_id: &str, dates: &[NaiveDate], m: &ComponentMatrix) -> Result<()> {
        if m.names() != self.names.as_slice() {
            return Err(CoreError::domain("component names differ from table"));
        }
        if dates.len() != m.horizon() {
            return Err(CoreError::domain("date count differs from horizon"));
        }
        for (j, d) in dates.iter().enumerate() {
            self.insert(series_id, *d, m.column(j))?;
        }
        Ok(())
    }

    /// Assembles the matrix for the given dates; every date must be present.
    pub fn matrix(&self, series_id: &str, dates: &[NaiveDate]) -> Result<ComponentMatrix> {
        let series = self.rows.get(series_id).ok_or_else(|| {
            CoreError::domain(format!("no component estimates for series `{series_id}`"))
        })?;
        let mut est = vec![Vec::with_capacity(dates.len()); self.names.len()];
        for d in dates {
            let v = series.get(d).ok_or_else(|| {
                CoreError::domain(format!("no component estimates for `{series_id}` on {d}"))
            })?;
            for (i, x) in v.iter().enumerate() {
                est[i].push(*x);
            }
        }
        ComponentMatrix::new(self.names.clone(), est)
    }

    pub fn contains(&self, series_id: &str, dates: &[NaiveDate]) -> bool {
        self.rows
            .get(series_id)
            .is_some_and(|s| dates.iter().all(|d| s.contains_key(d)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["series_id".to_string(), "date".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (id, series) in &self.rows {
            for (d, vals) in series {
                let mut rec = vec![id.clone(), d.to_string()];
                rec.extend(vals.iter().map(|v| v.to_string()));
                wr.write_record(&rec)?;
            }
        }
        wr.flush().map_err(|e| CoreError::domain(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        let f = std::fs::File::create(p).map_err(|e| CoreError::io(p, e))?;
        self.write_csv(f)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() < 4 || &headers[0] != "series_id" || &headers[1] != "date" {
            return Err(CoreError::Schema(
                "component CSV needs `series_id,date` followed by at least two components".into(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut table = Self::new(names);
        for (k, rec) in rd.records().enumerate() {
            let row = k + 2;
            let rec = rec?;
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| CoreError::Parse {
                row,
                column: "date".into(),
                message: e.to_string(),
            })?;
            let mut vals = Vec::with_capacity(table.names.len());
            for (c, cell) in rec.iter().enumerate().skip(2) {
                let v: f64 = cell.trim().parse().map_err(|_| CoreError::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(CoreError::Parse {
                        row,
                        column: headers[c].to_string(),
                        message: "non-finite value".into(),
                    });
                }
                vals.push(v);
            }
            table.insert(&rec[0], date, vals)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let f = std::fs::File::open(p).map_err(|e| CoreError::io(p, e))?;
        Self::read_csv(f)
    }
}
