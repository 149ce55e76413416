//! Reader for the UCI `LD2011_2014.txt` export: semicolon separated, decimal
//! comma, one column per client at 15 minute resolution. Rows are summed to
//! daily totals. A reading stamped `00:00` closes the previous day.

use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};

use crate::error::{CoreError, Result};
use crate::panel::{PanelDataset, SeriesRecord, TimeSeries, Vocabulary};

/// Which client columns to keep.
#[derive(Debug, Clone, Default)]
pub enum ClientSelection {
    #[default]
    All,
    /// The first `n` client columns in file order.
    First(usize),
    Named(Vec<String>),
}

pub fn load_electricity(path: impl AsRef<Path>, clients: &ClientSelection) -> Result<PanelDataset> {
    let p = path.as_ref();
    if !p.exists() {
        return Err(CoreError::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "electricity file not found; download LD2011_2014.txt from the UCI \
                 ElectricityLoadDiagrams20112014 dataset and pass its path",
            ),
        });
    }
    let f = std::fs::File::open(p).map_err(|e| CoreError::io(p, e))?;
    read_electricity(std::io::BufReader::new(f), clients)
}

pub fn read_electricity<R: Read>(reader: R, clients: &ClientSelection) -> Result<PanelDataset> {
    let mut rd = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.len() < 2 {
        return Err(CoreError::Schema("expected a timestamp column followed by client columns".into()));
    }
    let all: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, h)| (i, h.trim_matches('"').to_string()))
        .collect();
    let cols: Vec<(usize, String)> = match clients {
        ClientSelection::All => all,
        ClientSelection::First(n) => all.into_iter().take(*n).collect(),
        ClientSelection::Named(names) => {
            let mut out = Vec::new();
            for n in names {
                let hit = all.iter().find(|(_, h)| h == n).ok_or_else(|| {
                    CoreError::Schema(format!("client column `{n}` not in file"))
                })?;
                out.push(hit.clone());
            }
            out
        }
    };

    let mut days: Vec<NaiveDate> = Vec::new();
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (k, rec) in rd.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        let stamp = rec[0].trim_matches('"');
        let ts = NaiveDateTime::parse_from_str(stamp, "%Y-%m-%d %H:%M:%S").map_err(|e| {
            CoreError::Parse {
                row,
                column: "timestamp".into(),
                message: e.to_string(),
            }
        })?;
        let day = (ts - Duration::minutes(1)).date();
        match days.last() {
            Some(&d) if d == day => {}
            Some(&d) if day <= d => {
                return Err(CoreError::Integrity {
                    row,
                    message: format!("timestamp {stamp} goes backwards"),
                })
            }
            _ => {
                days.push(day);
                for s in &mut sums {
                    s.push(0.0);
                }
            }
        }
        for (slot, (c, name)) in cols.iter().enumerate() {
            let cell = rec.get(*c).unwrap_or("").trim();
            let v: f64 = if cell.is_empty() {
                0.0
            } else {
                cell.replace(',', ".").parse().map_err(|_| CoreError::Parse {
                    row,
                    column: name.clone(),
                    message: format!("`{cell}` is not a number"),
                })?
            };
            *sums[slot].last_mut().expect("day pushed above") += v;
        }
    }
    let records = cols
        .into_iter()
        .zip(sums)
        .map(|((_, name), values)| {
            TimeSeries::new(name, days.clone(), values).map(SeriesRecord::bare)
        })
        .collect::<Result<Vec<_>>>()?;
    PanelDataset::new(records, Vocabulary::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\"\";\"MT_001\";\"MT_002\"\n\
\"2011-01-01 00:15:00\";1;0,5\n\
\"2011-01-01 12:00:00\";2;1,5\n\
\"2011-01-02 00:00:00\";3;0\n\
\"2011-01-02 00:15:00\";10;2,25\n";

    #[test]
    fn aggregates_to_days() {
        let ds = read_electricity(SAMPLE.as_bytes(), &ClientSelection::All).unwrap();
        assert_eq!(ds.len(), 2);
        let a = ds.get("MT_001").unwrap();
        assert_eq!(a.series.values(), &[6.0, 10.0]);
        let b = ds.get("MT_002").unwrap();
        assert_eq!(b.series.values(), &[2.0, 2.25]);
        assert_eq!(a.series.dates()[0], NaiveDate::from_ymd_opt(2011, 1, 1).unwrap());
    }

    #[test]
    fn client_selection() {
        let ds = read_electricity(SAMPLE.as_bytes(), &ClientSelection::First(1)).unwrap();
        assert_eq!(ds.len(), 1);
        let ds = read_electricity(SAMPLE.as_bytes(), &ClientSelection::Named(vec!["MT_002".into()])).unwrap();
        assert_eq!(ds.records()[0].id(), "MT_002");
        assert!(read_electricity(SAMPLE.as_bytes(), &ClientSelection::Named(vec!["MT_9".into()])).is_err());
    }

    #[test]
    fn missing_file_is_instructive() {
        let err = load_electricity("/nonexistent/LD2011_2014.txt", &ClientSelection::All).unwrap_err();
        assert!(err.to_string().contains("LD2011_2014"));
    }
}
