//! Panel data model and CSV ingestion.
//!
//! A [`PanelDataset`] holds one [`SeriesRecord`] per series id. Every record
//! is a daily, gap-free [`TimeSeries`] with one [`Covariates`] row per date.
//! Missing days are rejected at load time rather than imputed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Observations of one series on consecutive calendar days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(CoreError::domain(format!(
                "series `{id}`: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::domain(format!(
                    "series `{id}`: dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::domain(format!(
                "series `{id}`: non-finite value at {}",
                dates[pos]
            )));
        }
        Ok(Self { id, dates, values })
    }

    /// Daily series starting at `start`.
    pub fn daily(id: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let dates = (0..values.len())
            .map(|k| start + chrono::Duration::days(k as i64))
            .collect();
        Self::new(id, dates, values)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_contiguous(&self) -> bool {
        self.dates
            .windows(2)
            .all(|w| (w[1] - w[0]).num_days() == 1)
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// Calendar fields derived from a date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    /// Monday = 0.
    pub weekday: u32,
}

impl From<NaiveDate> for Calendar {
    fn from(d: NaiveDate) -> Self {
        Calendar {
            year: d.year(),
            month: d.month(),
            day: d.day(),
            weekday: d.weekday().num_days_from_monday(),
        }
    }
}

/// Per-date exogenous fields. `None` categoricals mean "no promotion" and
/// "no festival".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub price: Option<f64>,
    pub reference_price: Option<f64>,
    pub promo_type: Option<String>,
    pub festival_level: Option<String>,
}

impl Covariates {
    pub fn is_promo(&self) -> bool {
        self.promo_type.is_some()
    }

    pub fn is_festival(&self) -> bool {
        self.festival_level.is_some()
    }

    /// Relative discount `1 - price / reference_price`, 0 when unknown.
    pub fn discount(&self) -> f64 {
        match (self.price, self.reference_price) {
            (Some(p), Some(r)) if r > 0.0 => 1.0 - p / r,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub series: TimeSeries,
    pub covariates: Vec<Covariates>,
}

impl SeriesRecord {
    pub fn new(series: TimeSeries, covariates: Vec<Covariates>) -> Result<Self> {
        if covariates.len() != series.len() {
            return Err(CoreError::domain(format!(
                "series `{}`: {} covariate rows for {} observations",
                series.id(),
                covariates.len(),
                series.len()
            )));
        }
        Ok(Self { series, covariates })
    }

    /// A record with empty covariates on every date.
    pub fn bare(series: TimeSeries) -> Self {
        let covariates = vec![Covariates::default(); series.len()];
        Self { series, covariates }
    }

    pub fn id(&self) -> &str {
        self.series.id()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Declared vocabularies for the categorical covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub promo_types: Vec<String>,
    pub festival_levels: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            promo_types: ["direct", "seckill", "threshold", "bundle"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            festival_levels: ["S", "A", "B"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn promo_index(&self, name: &str) -> Option<usize> {
        self.promo_types.iter().position(|p| p == name)
    }

    pub fn festival_index(&self, name: &str) -> Option<usize> {
        self.festival_levels.iter().position(|p| p == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    records: Vec<SeriesRecord>,
    vocabulary: Vocabulary,
}

impl PanelDataset {
    pub fn new(records: Vec<SeriesRecord>, vocabulary: Vocabulary) -> Result<Self> {
        let mut seen = HashMap::new();
        for (k, r) in records.iter().enumerate() {
            if let Some(prev) = seen.insert(r.id().to_string(), k) {
                return Err(CoreError::domain(format!(
                    "series id `{}` appears twice (records {prev} and {k})",
                    r.id()
                )));
            }
            for c in &r.covariates {
                if let Some(p) = &c.promo_type {
                    if vocabulary.promo_index(p).is_none() {
                        return Err(CoreError::domain(format!("unknown promo type `{p}`")));
                    }
                }
                if let Some(f) = &c.festival_level {
                    if vocabulary.festival_index(f).is_none() {
                        return Err(CoreError::domain(format!("unknown festival level `{f}`")));
                    }
                }
            }
        }
        Ok(Self {
            records,
            vocabulary,
        })
    }

    pub fn records(&self) -> &[SeriesRecord] {
        &self.records
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SeriesRecord> {
        self.records.iter().find(|r| r.id() == id)
    }

    pub fn total_points(&self) -> usize {
        self.records.iter().map(|r| r.len()).sum()
    }
}

/// Column mapping for [`load_panel_csv`]. Covariate columns set to `Some`
/// are required to be present in the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub series_id: String,
    pub date: String,
    pub value: String,
    pub price: Option<String>,
    pub reference_price: Option<String>,
    pub promo_type: Option<String>,
    pub festival_level: Option<String>,
    pub vocabulary: Vocabulary,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            series_id: "series_id".into(),
            date: "date".into(),
            value: "value".into(),
            price: None,
            reference_price: None,
            promo_type: None,
            festival_level: None,
            vocabulary: Vocabulary::default(),
        }
    }
}

impl CsvSchema {
    /// Standard column names, declaring whichever optional covariates the
    /// header actually carries.
    pub fn detect(headers: &[&str]) -> Self {
        let has = |n: &str| headers.contains(&n);
        let opt = |n: &str| has(n).then(|| n.to_string());
        CsvSchema {
            price: opt("price"),
            reference_price: opt("reference_price"),
            promo_type: opt("promo_type"),
            festival_level: opt("festival_level"),
            ..CsvSchema::default()
        }
    }

    pub fn detect_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        Ok(Self::detect(&names))
    }
}

struct Row {
    line: usize,
    date: NaiveDate,
    value: f64,
    cov: Covariates,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CoreError::Schema(format!("missing column `{name}`")))
}

fn parse_f64(raw: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| CoreError::Parse {
        row: line,
        column: column.to_string(),
        message: format!("`{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CoreError::Parse {
            row: line,
            column: column.to_string(),
            message: "non-finite value".into(),
        });
    }
    Ok(v)
}

fn parse_category(raw: &str, vocab: &[String], line: usize, column: &str) -> Result<Option<String>> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    if vocab.iter().any(|v| v == t) {
        Ok(Some(t.to_string()))
    } else {
        Err(CoreError::Parse {
            row: line,
            column: column.to_string(),
            message: format!("`{t}` not in declared vocabulary {vocab:?}"),
        })
    }
}

/// Loads and validates a long-format panel CSV.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn load_panel_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    read_panel_csv(file, schema)
}

pub fn read_panel_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let i_id = column_index(&headers, &schema.series_id)?;
    let i_date = column_index(&headers, &schema.date)?;
    let i_value = column_index(&headers, &schema.value)?;
    let opt_idx = |c: &Option<String>| -> Result<Option<usize>> {
        c.as_deref().map(|n| column_index(&headers, n)).transpose()
    };
    let i_price = opt_idx(&schema.price)?;
    let i_ref = opt_idx(&schema.reference_price)?;
    let i_promo = opt_idx(&schema.promo_type)?;
    let i_fest = opt_idx(&schema.festival_level)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let id = field(i_id).to_string();
        if id.is_empty() {
            return Err(CoreError::Parse {
                row: line,
                column: schema.series_id.clone(),
                message: "empty series id".into(),
            });
        }
        let date = NaiveDate::parse_from_str(field(i_date), "%Y-%m-%d").map_err(|e| {
            CoreError::Parse {
                row: line,
                column: schema.date.clone(),
                message: format!("`{}`: {e}", field(i_date)),
            }
        })?;
        let value = parse_f64(field(i_value), line, &schema.value)?;
        let opt_num = |i: Option<usize>, col: &Option<String>| -> Result<Option<f64>> {
            match i {
                Some(i) if !field(i).trim().is_empty() => {
                    Ok(Some(parse_f64(field(i), line, col.as_deref().unwrap_or(""))?))
                }
                _ => Ok(None),
            }
        };
        let cov = Covariates {
            price: opt_num(i_price, &schema.price)?,
            reference_price: opt_num(i_ref, &schema.reference_price)?,
            promo_type: match i_promo {
                Some(i) => parse_category(
                    field(i),
                    &schema.vocabulary.promo_types,
                    line,
                    schema.promo_type.as_deref().unwrap_or(""),
                )?,
                None => None,
            },
            festival_level: match i_fest {
                Some(i) => parse_category(
                    field(i),
                    &schema.vocabulary.festival_levels,
                    line,
                    schema.festival_level.as_deref().unwrap_or(""),
                )?,
                None => None,
            },
        };
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(Row {
            line,
            date,
            value,
            cov,
        });
    }

    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let mut rows = groups.remove(&id).unwrap_or_default();
        rows.sort_by_key(|r| (r.date, r.line));
        for w in rows.windows(2) {
            let gap = (w[1].date - w[0].date).num_days();
            if gap == 0 {
                return Err(CoreError::Integrity {
                    row: w[1].line.max(w[0].line),
                    message: format!("duplicate ({id}, {}) row", w[1].date),
                });
            }
            if gap > 1 {
                return Err(CoreError::Integrity {
                    row: w[1].line,
                    message: format!(
                        "series `{id}` has a {}-day gap before {}; missing days are not imputed",
                        gap - 1,
                        w[1].date
                    ),
                });
            }
        }
        let dates = rows.iter().map(|r| r.date).collect();
        let values = rows.iter().map(|r| r.value).collect();
        let covariates = rows.into_iter().map(|r| r.cov).collect();
        let series = TimeSeries::new(id, dates, values)?;
        records.push(SeriesRecord::new(series, covariates)?);
    }
    PanelDataset::new(records, schema.vocabulary.clone())
}

/// Writes the panel in the long CSV layout read by [`load_panel_csv`],
/// always including every covariate column.
pub fn write_panel_csv<W: std::io::Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "series_id",
        "date",
        "value",
        "price",
        "reference_price",
        "promo_type",
        "festival_level",
    ])?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in ds.records() {
        for ((d, v), c) in r
            .series
            .dates()
            .iter()
            .zip(r.series.values())
            .zip(&r.covariates)
        {
            w.write_record([
                r.id().to_string(),
                d.format("%Y-%m-%d").to_string(),
                v.to_string(),
                num(c.price),
                num(c.reference_price),
                c.promo_type.clone().unwrap_or_default(),
                c.festival_level.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| CoreError::io("<writer>", e))?;
    Ok(())
}

/// Per-series summary used by the `ingest` command.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesSummary {
    pub series_id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub points: usize,
    pub mean: f64,
    pub promo_days: usize,
    pub festival_days: usize,
}

pub fn summarize(ds: &PanelDataset) -> Vec<SeriesSummary> {
    ds.records()
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| SeriesSummary {
            series_id: r.id().to_string(),
            start: r.series.dates()[0],
            end: *r.series.dates().last().unwrap(),
            points: r.len(),
            mean: crate::stats::mean(r.series.values()),
            promo_days: r.covariates.iter().filter(|c| c.is_promo()).count(),
            festival_days: r.covariates.iter().filter(|c| c.is_festival()).count(),
        })
        .collect()
}

/// Festival levels present on each date, keyed by date, across the panel.
pub fn festival_calendar(ds: &PanelDataset) -> BTreeMap<NaiveDate, String> {
    let mut cal = BTreeMap::new();
    for r in ds.records() {
        for (d, c) in r.series.dates().iter().zip(&r.covariates) {
            if let Some(l) = &c.festival_level {
                cal.entry(*d).or_insert_with(|| l.clone());
            }
        }
    }
    cal
}
