//! Seasonal-trend decomposition by loess.

use serde::{Deserialize, Serialize};
use wrcast_core::stats::median;

use crate::error::{Result, StatsError};
use crate::loess::loess_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlConfig {
    pub period: usize,
    /// Odd neighbour counts for the cycle-subseries, trend and low-pass fits.
    pub seasonal_window: usize,
    pub trend_window: usize,
    pub low_pass_window: usize,
    pub inner: usize,
    pub outer: usize,
    /// Convergence threshold relative to the series scale.
    pub epsilon: f64,
}

fn next_odd(x: f64) -> usize {
    let k = x.ceil().max(1.0) as usize;
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

impl StlConfig {
    /// Spans given as multipliers of the smallest sensible odd windows: 7 for
    /// the cycle-subseries, `1.5·n_p/(1 − 1.5/n_s)` for the trend and `n_p`
    /// for the low-pass filter. Multipliers of 1 give `(7, 23, 13)` at
    /// `n_p = 12`.
    pub fn from_multipliers(period: usize, ns: f64, nt: f64, nl: f64) -> Result<Self> {
        if period < 2 {
            return Err(StatsError::domain("stl period must be at least 2"));
        }
        if !(ns > 0.0 && nt > 0.0 && nl > 0.0) {
            return Err(StatsError::domain("stl span multipliers must be positive"));
        }
        let np = period as f64;
        let seasonal_window = next_odd(7.0 * ns);
        let trend_window = next_odd(nt * 1.5 * np / (1.0 - 1.5 / seasonal_window as f64));
        let low_pass_window = next_odd(nl * np);
        Ok(Self {
            period,
            seasonal_window,
            trend_window,
            low_pass_window,
            inner: 2,
            outer: 1,
            epsilon: 1e-6,
        })
    }

    pub fn new(period: usize) -> Result<Self> {
        Self::from_multipliers(period, 1.0, 1.0, 1.0)
    }

    pub fn with_windows(mut self, seasonal: usize, trend: usize, low_pass: usize) -> Result<Self> {
        if seasonal < 3 || trend < 3 || low_pass < 3 {
            return Err(StatsError::domain("stl windows must be at least 3"));
        }
        self.seasonal_window = seasonal;
        self.trend_window = trend;
        self.low_pass_window = low_pass;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Robustness weights from the final remainder.
    pub weights: Vec<f64>,
    /// Local slope of the trend fit at the last observation.
    pub trend_slope: f64,
    pub period: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

impl StlResult {
    /// Linear trend continuation plus a repeat of the last seasonal cycle.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let n = self.trend.len();
        let last = self.trend[n - 1];
        (1..=h)
            .map(|k| {
                let s = self.seasonal[n - self.period + (k - 1) % self.period];
                last + k as f64 * self.trend_slope + s
            })
            .collect()
    }

    /// Trend and seasonal projections separately.
    pub fn forecast_parts(&self, h: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.trend.len();
        let last = self.trend[n - 1];
        let trend = (1..=h).map(|k| last + k as f64 * self.trend_slope).collect();
        let seasonal = (1..=h)
            .map(|k| self.seasonal[n - self.period + (k - 1) % self.period])
            .collect();
        (trend, seasonal)
    }

    /// `max(0, 1 − Var(R)/Var(T+R))`.
    pub fn trend_strength(&self) -> f64 {
        let tr: Vec<f64> = self.trend.iter().zip(&self.remainder).map(|(a, b)| a + b).collect();
        strength(&self.remainder, &tr)
    }

    /// `max(0, 1 − Var(R)/Var(S+R))`.
    pub fn seasonal_strength(&self) -> f64 {
        let sr: Vec<f64> = self.seasonal.iter().zip(&self.remainder).map(|(a, b)| a + b).collect();
        strength(&self.remainder, &sr)
    }
}

fn strength(rem: &[f64], combined: &[f64]) -> f64 {
    let vc = wrcast_core::stats::variance(combined);
    if vc <= 0.0 {
        return 0.0;
    }
    (1.0 - wrcast_core::stats::variance(rem) / vc).max(0.0)
}

fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    if x.len() < w {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(x.len() - w + 1);
    let mut s: f64 = x[..w].iter().sum();
    out.push(s / w as f64);
    for i in w..x.len() {
        s += x[i] - x[i - w];
        out.push(s / w as f64);
    }
    out
}

/// Biweight of `|r| / (6·median|r|)`; with a zero median exact zeros keep
/// weight 1 and everything else gets 0.
pub fn robustness_weights(remainder: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = remainder.iter().map(|r| r.abs()).collect();
    let h = 6.0 * median(&abs);
    abs.iter()
        .map(|&r| {
            if h == 0.0 {
                if r == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let u = r / h;
                if u < 1.0 {
                    let v = 1.0 - u * u;
                    v * v
                } else {
                    0.0
                }
            }
        })
        .collect()
}

struct Pass {
    trend: Vec<f64>,
    seasonal: Vec<f64>,
    slope: f64,
}

fn inner_pass(y: &[f64], trend: &[f64], delta: &[f64], cfg: &StlConfig) -> Result<Pass> {
    let n = y.len();
    let np = cfg.period;
    let detrended: Vec<f64> = y.iter().zip(trend).map(|(a, b)| a - b).collect();

    // cycle-subseries smoothing into C, indices -np..n+np stored from 0
    let mut c = vec![0.0; n + 2 * np];
    for phase in 0..np {
        let idx: Vec<usize> = (phase..n).step_by(np).collect();
        let sub: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
        let sub_delta: Vec<f64> = idx.iter().map(|&i| delta[i]).collect();
        let k = sub.len() as i64;
        let fits = loess_grid(&sub, cfg.seasonal_window, 1, Some(&sub_delta), -1..=k)?;
        for (j, f) in (-1..=k).zip(fits) {
            let t = phase as i64 + j * np as i64;
            c[(t + np as i64) as usize] = f.value;
        }
    }

    // low-pass: MA(np), MA(np), MA(3), loess
    let lp = moving_average(&moving_average(&moving_average(&c, np), np), 3);
    debug_assert_eq!(lp.len(), n);
    let low = loess_grid(&lp, cfg.low_pass_window, 1, None, 0..n as i64)?;
    let seasonal: Vec<f64> = (0..n).map(|t| c[t + np] - low[t].value).collect();

    let deseason: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
    let tf = loess_grid(&deseason, cfg.trend_window, 1, Some(delta), 0..n as i64)?;
    let slope = tf[n - 1].slope;
    Ok(Pass {
        trend: tf.into_iter().map(|f| f.value).collect(),
        seasonal,
        slope,
    })
}

pub fn stl_decompose(series: &[f64], cfg: &StlConfig) -> Result<StlResult> {
    let n = series.len();
    let np = cfg.period;
    if np < 2 || n < 2 * np {
        return Err(StatsError::domain(format!(
            "stl needs at least two periods ({}) of data, got {n}",
            2 * np
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::domain("stl input must be finite"));
    }
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = cfg.epsilon * scale;
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut slope = 0.0;
    let mut delta = vec![1.0; n];
    let mut inner_used = 0;
    let mut outer_used = 0;
    for k in 0..=cfg.outer {
        for _ in 0..cfg.inner.max(1) {
            let pass = inner_pass(series, &trend, &delta, cfg)?;
            inner_used += 1;
            let change = pass
                .trend
                .iter()
                .zip(&trend)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                + pass
                    .seasonal
                    .iter()
                    .zip(&seasonal)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
            trend = pass.trend;
            seasonal = pass.seasonal;
            slope = pass.slope;
            if change <= tol {
                break;
            }
        }
        if k == cfg.outer {
            break;
        }
        let rem: Vec<f64> = (0..n).map(|t| series[t] - trend[t] - seasonal[t]).collect();
        delta = robustness_weights(&rem);
        outer_used += 1;
    }
    let remainder: Vec<f64> = (0..n).map(|t| series[t] - trend[t] - seasonal[t]).collect();
    let weights = robustness_weights(&remainder);
    Ok(StlResult {
        trend,
        seasonal,
        remainder,
        weights,
        trend_slope: slope,
        period: np,
        inner_iterations: inner_used,
        outer_iterations: outer_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use wrcast_core::stats::{correlation, linear_fit, mean};

    fn synthetic(n: usize) -> (Vec<f64>, Vec<f64>) {
        let season: Vec<f64> = (0..n).map(|t| (2.0 * PI * t as f64 / 12.0).sin()).collect();
        let y = (0..n).map(|t| 0.1 * t as f64 + season[t]).collect();
        (y, season)
    }

    #[test]
    fn long_outlier_runs_do_not_break_robust_fit() {
        let (mut y, _) = synthetic(120);
        // a run longer than the subseries window in several phases
        for v in &mut y[40..130.min(120)] {
            *v += 50.0;
        }
        let cfg = StlConfig { outer: 3, ..StlConfig::new(12).unwrap() };
        let r = stl_decompose(&y, &cfg).unwrap();
        for t in 0..120 {
            assert!((r.trend[t] + r.seasonal[t] + r.remainder[t] - y[t]).abs() <= 1e-9);
        }
    }

    #[test]
    fn default_windows() {
        let c = StlConfig::new(12).unwrap();
        assert_eq!((c.seasonal_window, c.trend_window, c.low_pass_window), (7, 23, 13));
        let c = StlConfig::new(7).unwrap();
        assert_eq!((c.seasonal_window, c.trend_window, c.low_pass_window), (7, 15, 7));
    }

    #[test]
    fn zero_series() {
        let r = stl_decompose(&[0.0; 48], &StlConfig::new(12).unwrap()).unwrap();
        assert!(r.trend.iter().chain(&r.seasonal).chain(&r.remainder).all(|v| *v == 0.0));
    }

    #[test]
    fn recovers_sine_and_slope() {
        let (y, season) = synthetic(240);
        let r = stl_decompose(&y, &StlConfig::new(12).unwrap()).unwrap();
        assert!(correlation(&r.seasonal, &season) >= 0.95);
        let xs: Vec<f64> = (0..240).map(f64::from).collect();
        let (slope, _) = linear_fit(&xs, &r.trend);
        assert!((slope - 0.1).abs() <= 0.02, "slope {slope}");
        for t in 0..240 {
            assert!((r.trend[t] + r.seasonal[t] + r.remainder[t] - y[t]).abs() <= 1e-9);
        }
        // each full cycle of the seasonal part is centred
        let amp = 1.0;
        for cyc in r.seasonal.chunks_exact(12) {
            assert!(mean(cyc).abs() <= 0.05 * amp, "{}", mean(cyc));
        }
    }

    #[test]
    fn constant_shift_moves_trend_only() {
        let (y, _) = synthetic(120);
        let shifted: Vec<f64> = y.iter().map(|v| v + 37.0).collect();
        let cfg = StlConfig::new(12).unwrap();
        let a = stl_decompose(&y, &cfg).unwrap();
        let b = stl_decompose(&shifted, &cfg).unwrap();
        for t in 0..120 {
            assert!((b.trend[t] - a.trend[t] - 37.0).abs() <= 1e-6);
            assert!((b.seasonal[t] - a.seasonal[t]).abs() <= 1e-6);
        }
    }

    #[test]
    fn outliers_downweighted() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let nd = Normal::new(0.0, 0.3).unwrap();
        let (mut y, _) = synthetic(144);
        for v in &mut y {
            *v += nd.sample(&mut rng);
        }
        y[70] += 3.0;
        let r = stl_decompose(&y, &StlConfig::new(12).unwrap()).unwrap();
        assert!(r.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!(r.weights[70] < 0.1, "{}", r.weights[70]);
    }

    #[test]
    fn deterministic_and_short_input() {
        let (y, _) = synthetic(60);
        let cfg = StlConfig::new(12).unwrap();
        assert_eq!(stl_decompose(&y, &cfg).unwrap(), stl_decompose(&y, &cfg).unwrap());
        assert!(stl_decompose(&y[..23], &cfg).is_err());
    }

    #[test]
    fn forecast_continues_line_and_cycle() {
        let (y, season) = synthetic(240);
        let r = stl_decompose(&y, &StlConfig::new(12).unwrap()).unwrap();
        let f = r.forecast(24);
        for (k, v) in f.iter().enumerate() {
            let t = 240 + k;
            let truth = 0.1 * t as f64 + season[t % 12];
            assert!((v - truth).abs() < 0.3, "h={} {v} vs {truth}", k + 1);
        }
    }
}
