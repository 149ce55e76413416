//! Window to network-input conversion. Observations and components are
//! divided by the window scale (history mean + 1).

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use wrcast_core::{ComponentMatrix, Covariates, ForecastWindow};

use crate::error::{NnError, Result};
use crate::network::NetInput;
use crate::tape::Tensor;

/// Scaled observation, promotion flag, discount, festival flag and four
/// calendar harmonics.
pub const HISTORY_FEATURES: usize = 8;
/// Covariate and calendar columns of a future row, before components.
pub const FUTURE_BASE_FEATURES: usize = 7;

fn covariate_row(date: NaiveDate, c: &Covariates, out: &mut Vec<f64>) {
    let wd = date.weekday().num_days_from_monday() as f64;
    let m = date.month0() as f64;
    out.push(if c.is_promo() { 1.0 } else { 0.0 });
    out.push(c.discount());
    out.push(if c.is_festival() { 1.0 } else { 0.0 });
    out.push((TAU * wd / 7.0).sin());
    out.push((TAU * wd / 7.0).cos());
    out.push((TAU * m / 12.0).sin());
    out.push((TAU * m / 12.0).cos());
}

/// Network inputs for a window; `components` (if any) are appended to the
/// future rows as scaled columns.
pub fn window_inputs(window: &ForecastWindow, components: Option<&ComponentMatrix>) -> Result<(NetInput, f64)> {
    let t = window.history_len();
    let h = window.horizon();
    if let Some(c) = components {
        if c.horizon() != h {
            return Err(NnError::config(format!(
                "components cover {} steps, window horizon is {h}",
                c.horizon()
            )));
        }
    }
    let scale = window.scale();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(NnError::config(format!("window {} has non-positive scale {scale}", window.series_id)));
    }
    let mut hist = Vec::with_capacity(t * HISTORY_FEATURES);
    for k in 0..t {
        hist.push(window.history[k] / scale);
        covariate_row(window.history_dates[k], &window.history_covariates[k], &mut hist);
    }
    let n = components.map_or(0, ComponentMatrix::n_components);
    let width = FUTURE_BASE_FEATURES + n;
    let mut fut = Vec::with_capacity(h * width);
    for j in 0..h {
        covariate_row(window.future_dates[j], &window.future_covariates[j], &mut fut);
        if let Some(c) = components {
            fut.extend((0..n).map(|i| c.get(i, j) / scale));
        }
    }
    Ok((
        NetInput {
            history: Tensor::new(t, HISTORY_FEATURES, hist)?,
            future: Tensor::new(h, width, fut)?,
        },
        scale,
    ))
}
