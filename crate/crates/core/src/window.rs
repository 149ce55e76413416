//! Fixed-length history/horizon windows cut from a panel.

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::panel::{Covariates, PanelDataset, SeriesRecord};

/// `T` history observations ending at the anchor, plus `H` future covariate
/// rows. `target` carries the `H` future observations when they are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWindow {
    pub series_id: String,
    pub series_index: usize,
    /// Index (within the series) of the last history observation.
    pub anchor: usize,
    pub history_dates: Vec<NaiveDate>,
    pub history: Vec<f64>,
    pub history_covariates: Vec<Covariates>,
    pub future_dates: Vec<NaiveDate>,
    pub future_covariates: Vec<Covariates>,
    pub target: Option<Vec<f64>>,
}

impl ForecastWindow {
    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn horizon(&self) -> usize {
        self.future_dates.len()
    }

    pub fn anchor_date(&self) -> NaiveDate {
        *self.history_dates.last().expect("window with empty history")
    }

    pub fn target(&self) -> Result<&[f64]> {
        self.target
            .as_deref()
            .ok_or_else(|| CoreError::domain(format!("window {} has no target", self.series_id)))
    }

    /// Mean of the history plus one; the per-window scale used by the
    /// stage-2 network.
    pub fn scale(&self) -> f64 {
        crate::stats::mean(&self.history) + 1.0
    }
}

/// Cuts the window anchored at `anchor` from a record.
///
/// The target is filled when the `H` future observations lie inside the
/// series. Future covariates beyond the end of the series are an error.
pub fn window_at(
    record: &SeriesRecord,
    series_index: usize,
    anchor: usize,
    history_len: usize,
    horizon: usize,
) -> Result<ForecastWindow> {
    if history_len == 0 || horizon == 0 {
        return Err(CoreError::domain("history length and horizon must be positive"));
    }
    if anchor + 1 < history_len {
        return Err(CoreError::domain(format!(
            "anchor {anchor} leaves fewer than {history_len} history points"
        )));
    }
    if anchor + horizon >= record.len() {
        return Err(CoreError::domain(format!(
            "series `{}`: horizon {horizon} after anchor {anchor} runs past {} points",
            record.id(),
            record.len()
        )));
    }
    let lo = anchor + 1 - history_len;
    let hi = anchor + 1;
    let dates = record.series.dates();
    let values = record.series.values();
    Ok(ForecastWindow {
        series_id: record.id().to_string(),
        series_index,
        anchor,
        history_dates: dates[lo..hi].to_vec(),
        history: values[lo..hi].to_vec(),
        history_covariates: record.covariates[lo..hi].to_vec(),
        future_dates: dates[hi..hi + horizon].to_vec(),
        future_covariates: record.covariates[hi..hi + horizon].to_vec(),
        target: Some(values[hi..hi + horizon].to_vec()),
    })
}

/// Deployment window: the last `history_len` observations with future
/// covariates supplied by the caller (no target).
pub fn forecast_window(
    record: &SeriesRecord,
    series_index: usize,
    history_len: usize,
    future_covariates: Vec<Covariates>,
) -> Result<ForecastWindow> {
    let n = record.len();
    if n < history_len || history_len == 0 {
        return Err(CoreError::domain(format!(
            "series `{}` has {n} points, need {history_len}",
            record.id()
        )));
    }
    let lo = n - history_len;
    let last = record.series.dates()[n - 1];
    let future_dates = (1..=future_covariates.len())
        .map(|k| last + chrono::Duration::days(k as i64))
        .collect();
    Ok(ForecastWindow {
        series_id: record.id().to_string(),
        series_index,
        anchor: n - 1,
        history_dates: record.series.dates()[lo..].to_vec(),
        history: record.series.values()[lo..].to_vec(),
        history_covariates: record.covariates[lo..].to_vec(),
        future_dates,
        future_covariates,
        target: None,
    })
}

/// Admissible anchors of a series of length `n`: every index leaving `T`
/// history points and `H` future points.
pub fn admissible_anchors(n: usize, history_len: usize, horizon: usize) -> std::ops::Range<usize> {
    if history_len == 0 || n < history_len + horizon {
        return 0..0;
    }
    (history_len - 1)..(n - horizon)
}

/// Samples up to `samples_per_series` windows per series, uniformly without
/// replacement over admissible anchors. Series shorter than `T + H` are
/// skipped with a warning. Deterministic for a given seed.
pub fn make_windows(
    ds: &PanelDataset,
    history_len: usize,
    horizon: usize,
    samples_per_series: usize,
    seed: u64,
) -> Result<Vec<ForecastWindow>> {
    make_windows_where(ds, history_len, horizon, samples_per_series, seed, |_, _| true)
}

/// [`make_windows`] restricted to anchors accepted by `keep(series_index,
/// anchor)`; used to confine training windows to a period.
pub fn make_windows_where<F>(
    ds: &PanelDataset,
    history_len: usize,
    horizon: usize,
    samples_per_series: usize,
    seed: u64,
    keep: F,
) -> Result<Vec<ForecastWindow>>
where
    F: Fn(usize, usize) -> bool,
{
    if history_len == 0 || horizon == 0 {
        return Err(CoreError::domain("history length and horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (si, record) in ds.records().iter().enumerate() {
        let anchors: Vec<usize> = admissible_anchors(record.len(), history_len, horizon)
            .filter(|&a| keep(si, a))
            .collect();
        if anchors.is_empty() {
            log::warn!(
                "series `{}` ({} points) has no admissible window for T={history_len}, H={horizon}; skipped",
                record.id(),
                record.len()
            );
            continue;
        }
        let k = samples_per_series.min(anchors.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, anchors.len(), k)
            .into_iter()
            .map(|i| anchors[i])
            .collect();
        picked.sort_unstable();
        for a in picked {
            out.push(window_at(record, si, a, history_len, horizon)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{TimeSeries, Vocabulary};

    fn panel(lengths: &[usize]) -> PanelDataset {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let records = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let values = (0..n).map(|t| t as f64).collect();
                SeriesRecord::bare(TimeSeries::daily(format!("s{i}"), start, values).unwrap())
            })
            .collect();
        PanelDataset::new(records, Vocabulary::default()).unwrap()
    }

    #[test]
    fn counting_anchors() {
        assert_eq!(admissible_anchors(100, 72, 24).len(), 5);
        let ds = panel(&[100]);
        let ws = make_windows(&ds, 72, 24, 72, 1).unwrap();
        assert_eq!(ws.len(), 5);
        for w in &ws {
            assert_eq!(w.history.len(), 72);
            assert_eq!(w.target.as_ref().unwrap().len(), 24);
            assert_eq!(w.future_covariates.len(), 24);
            // contiguous: history then target continue the ramp
            assert_eq!(w.target.as_ref().unwrap()[0], w.history[71] + 1.0);
        }
    }

    #[test]
    fn short_series_skipped() {
        let ds = panel(&[50, 120]);
        let ws = make_windows(&ds, 72, 24, 3, 9).unwrap();
        assert_eq!(ws.len(), 3);
        assert!(ws.iter().all(|w| w.series_id == "s1"));
    }

    #[test]
    fn seeded_sampling_is_repeatable() {
        let ds = panel(&[400, 300, 250]);
        let a = make_windows(&ds, 30, 10, 7, 42).unwrap();
        let b = make_windows(&ds, 30, 10, 7, 42).unwrap();
        assert_eq!(a, b);
        let c = make_windows(&ds, 30, 10, 7, 43).unwrap();
        assert_ne!(
            a.iter().map(|w| w.anchor).collect::<Vec<_>>(),
            c.iter().map(|w| w.anchor).collect::<Vec<_>>()
        );
    }

    #[test]
    fn no_duplicate_anchors() {
        let ds = panel(&[200]);
        let ws = make_windows(&ds, 20, 5, 100, 3).unwrap();
        let mut anchors: Vec<_> = ws.iter().map(|w| w.anchor).collect();
        anchors.dedup();
        assert_eq!(anchors.len(), ws.len());
    }

    #[test]
    fn window_bounds_checked() {
        let ds = panel(&[30]);
        let r = &ds.records()[0];
        assert!(window_at(r, 0, 9, 10, 20).is_ok());
        assert!(window_at(r, 0, 9, 11, 5).is_err());
        assert!(window_at(r, 0, 10, 10, 20).is_err());
    }
}
