//! Feature-based forecast-model averaging: a boosted scorer maps series
//! features to softmax weights over the classical candidate methods.

use serde::{Deserialize, Serialize};
use wrcast_core::metrics::pinball;
use wrcast_core::stats::{autocorrelation, mean, skewness, std_dev};
use wrcast_core::Covariates;

use crate::classical::{forecast_method, Method, MethodConfig};
use crate::error::{Result, StatsError};
use crate::gbdt::{gbdt_fit_custom, GbdtConfig, GbdtModel, MultiObjective};
use crate::stl::{stl_decompose, StlConfig};

/// Replaces promotion and festival days by linear interpolation between the
/// nearest unflagged neighbours; flagged runs at either end copy the nearest
/// unflagged value.
pub fn remove_promo_spikes(series: &[f64], covariates: &[Covariates]) -> Result<Vec<f64>> {
    if series.len() != covariates.len() {
        return Err(StatsError::domain("series and covariates differ in length"));
    }
    let flags: Vec<bool> = covariates.iter().map(|c| c.is_promo() || c.is_festival()).collect();
    interpolate_flagged(series, &flags)
}

pub fn interpolate_flagged(series: &[f64], flags: &[bool]) -> Result<Vec<f64>> {
    let keep: Vec<usize> = (0..series.len()).filter(|&i| !flags[i]).collect();
    if keep.is_empty() {
        return Err(StatsError::domain("every observation is flagged; nothing to interpolate from"));
    }
    let mut out = series.to_vec();
    for i in 0..series.len() {
        if !flags[i] {
            continue;
        }
        let right = keep.partition_point(|&k| k < i);
        out[i] = match (right.checked_sub(1).map(|p| keep[p]), keep.get(right)) {
            (Some(a), Some(&b)) => {
                let f = (i - a) as f64 / (b - a) as f64;
                series[a] + f * (series[b] - series[a])
            }
            (Some(a), None) => series[a],
            (None, Some(&b)) => series[b],
            (None, None) => unreachable!(),
        };
    }
    Ok(out)
}

pub const FEATURE_NAMES: [&str; 9] = [
    "length",
    "mean",
    "std",
    "acf1",
    "acf7",
    "trend_strength",
    "seasonal_strength",
    "skewness",
    "cv",
];

/// Nine scale, persistence, trend and seasonality descriptors. Quantities
/// that are undefined for the input map to 0.
pub fn meta_features(series: &[f64]) -> Vec<f64> {
    let m = mean(series);
    let sd = std_dev(series);
    let (trend, seas) = match StlConfig::new(7).and_then(|c| stl_decompose(series, &c)) {
        Ok(r) => (r.trend_strength(), r.seasonal_strength()),
        Err(_) => (0.0, 0.0),
    };
    let cv = if m.abs() > 1e-12 { sd / m.abs() } else { 0.0 };
    let f = vec![
        series.len() as f64,
        m,
        sd,
        autocorrelation(series, 1),
        autocorrelation(series, 7),
        trend,
        seas,
        skewness(series),
        cv,
    ];
    f.into_iter().map(|v| if v.is_finite() { v } else { 0.0 }).collect()
}

/// Per-window features and per-method validation losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub methods: Vec<Method>,
    pub features: Vec<Vec<f64>>,
    /// `losses[n][m]`, failures already replaced by the penalty.
    pub losses: Vec<Vec<f64>>,
    pub failures: usize,
}

/// Splits each history into a fit part and a final `h`-step validation
/// block, computes features on the fit part and the mean median-quantile
/// loss of every method. A method failing on a window is charged ten times
/// the largest finite loss in the table.
pub fn build_loss_table(histories: &[Vec<f64>], h: usize, methods: &[Method], cfg: &MethodConfig) -> Result<LossTable> {
    if methods.is_empty() {
        return Err(StatsError::domain("no candidate methods"));
    }
    let mut features = Vec::with_capacity(histories.len());
    let mut raw: Vec<Vec<Option<f64>>> = Vec::with_capacity(histories.len());
    for (n, hist) in histories.iter().enumerate() {
        if hist.len() <= h {
            return Err(StatsError::domain(format!("window {n} shorter than the validation horizon")));
        }
        let (fit, val) = hist.split_at(hist.len() - h);
        features.push(meta_features(fit));
        let row = methods
            .iter()
            .map(|&m| match forecast_method(m, fit, h, cfg) {
                Ok(fc) if fc.iter().all(|v| v.is_finite()) => {
                    Some(val.iter().zip(&fc).map(|(y, f)| pinball(*y, *f, 0.5)).sum::<f64>() / h as f64)
                }
                Ok(_) => None,
                Err(e) => {
                    log::debug!("method {} failed on window {n}: {e}", m.name());
                    None
                }
            })
            .collect();
        raw.push(row);
    }
    for (k, m) in methods.iter().enumerate() {
        let failed = raw.iter().filter(|r| r[k].is_none()).count();
        if failed > 0 {
            log::warn!("method {} failed on {failed} of {} windows", m.name(), raw.len());
        }
    }
    let max_finite = raw.iter().flatten().flatten().fold(0.0f64, |a, b| a.max(*b));
    let penalty = 10.0 * max_finite.max(1.0);
    let failures = raw.iter().flatten().filter(|v| v.is_none()).count();
    let losses = raw
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(penalty)).collect())
        .collect();
    Ok(LossTable {
        methods: methods.to_vec(),
        features,
        losses,
        failures,
    })
}

pub fn softmax(s: &[f64]) -> Vec<f64> {
    let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `Σ_n Σ_m softmax(s_n)_m · L_nm`.
pub struct SoftmaxLoss<'a> {
    pub losses: &'a [Vec<f64>],
}

impl MultiObjective for SoftmaxLoss<'_> {
    fn n_outputs(&self) -> usize {
        self.losses[0].len()
    }

    fn loss(&self, preds: &[Vec<f64>]) -> f64 {
        preds
            .iter()
            .zip(self.losses)
            .map(|(s, l)| softmax(s).iter().zip(l).map(|(w, l)| w * l).sum::<f64>())
            .sum()
    }

    /// Gradient `w_m (L_m − L̄)`; the hessian is the diagonal surrogate
    /// `w_m (1 − w_m) (max L − min L)`, floored at 1e-6.
    fn grad_hess(&self, preds: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut g = Vec::with_capacity(preds.len());
        let mut h = Vec::with_capacity(preds.len());
        for (s, l) in preds.iter().zip(self.losses) {
            let w = softmax(s);
            let lbar: f64 = w.iter().zip(l).map(|(a, b)| a * b).sum();
            let spread = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - l.iter().cloned().fold(f64::INFINITY, f64::min);
            g.push(w.iter().zip(l).map(|(wm, lm)| wm * (lm - lbar)).collect());
            h.push(w.iter().map(|wm| (wm * (1.0 - wm) * spread).max(1e-6)).collect());
        }
        (g, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLearner {
    pub methods: Vec<Method>,
    pub method_config: MethodConfig,
    pub scorer: GbdtModel,
}

pub fn default_meta_config() -> GbdtConfig {
    GbdtConfig {
        n_trees: 100,
        learning_rate: 0.1,
        max_depth: 3,
        min_leaf: 1,
    }
}

pub fn fforma_train_table(table: &LossTable, cfg: &MethodConfig, gbdt: &GbdtConfig) -> Result<MetaLearner> {
    if table.features.len() < 20 {
        return Err(StatsError::domain(format!(
            "fforma needs at least 20 training windows, got {}",
            table.features.len()
        )));
    }
    let obj = SoftmaxLoss { losses: &table.losses };
    let scorer = gbdt_fit_custom(&table.features, &obj, gbdt)?;
    Ok(MetaLearner {
        methods: table.methods.clone(),
        method_config: cfg.clone(),
        scorer,
    })
}

pub fn fforma_train(
    histories: &[Vec<f64>],
    h: usize,
    methods: &[Method],
    cfg: &MethodConfig,
    gbdt: &GbdtConfig,
) -> Result<MetaLearner> {
    if histories.len() < 20 {
        return Err(StatsError::domain(format!(
            "fforma needs at least 20 training windows, got {}",
            histories.len()
        )));
    }
    let table = build_loss_table(histories, h, methods, cfg)?;
    fforma_train_table(&table, cfg, gbdt)
}

impl MetaLearner {
    pub fn weights_for_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.scorer.predict_multi(features)?))
    }

    pub fn weights(&self, series: &[f64]) -> Result<Vec<f64>> {
        self.weights_for_features(&meta_features(series))
    }

    /// Weighted combination of every method fitted on the whole history.
    /// Failing methods are dropped and the remaining weights renormalized.
    pub fn predict(&self, series: &[f64], h: usize) -> Result<Vec<f64>> {
        let w = self.weights(series)?;
        let forecasts: Vec<Option<Vec<f64>>> = self
            .methods
            .iter()
            .map(|&m| match forecast_method(m, series, h, &self.method_config) {
                Ok(f) if f.iter().all(|v| v.is_finite()) => Some(f),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("method {} excluded: {e}", m.name());
                    None
                }
            })
            .collect();
        combine(&w, &forecasts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Convex combination over the available forecasts.
pub fn combine(weights: &[f64], forecasts: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
    if weights.len() != forecasts.len() {
        return Err(StatsError::domain("weights and forecasts differ in count"));
    }
    let total: f64 = weights
        .iter()
        .zip(forecasts)
        .filter(|(_, f)| f.is_some())
        .map(|(w, _)| w)
        .sum();
    let h = forecasts
        .iter()
        .flatten()
        .map(Vec::len)
        .next()
        .ok_or_else(|| StatsError::Degenerate("every candidate method failed".into()))?;
    if !(total > 0.0) {
        return Err(StatsError::Degenerate("available methods carry zero weight".into()));
    }
    let mut out = vec![0.0; h];
    for (w, f) in weights.iter().zip(forecasts) {
        if let Some(f) = f {
            for (o, v) in out.iter_mut().zip(f) {
                *o += w / total * v;
            }
        }
    }
    Ok(out)
}
