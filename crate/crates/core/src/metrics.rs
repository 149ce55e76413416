//! Evaluation metrics: quantile (pinball) loss, RMSE and P50_QL.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// `p·max(0, y−ŷ) + (1−p)·max(0, ŷ−y)` for `p` strictly inside (0, 1).
pub fn quantile_loss(y: f64, yhat: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CoreError::domain(format!("quantile {p} outside (0, 1)")));
    }
    Ok(pinball(y, yhat, p))
}

/// Unchecked pinball loss for hot loops where `p` is already validated.
#[inline]
pub fn pinball(y: f64, yhat: f64, p: f64) -> f64 {
    p * (y - yhat).max(0.0) + (1.0 - p) * (yhat - y).max(0.0)
}

pub fn mean_quantile_loss(ys: &[f64], yhats: &[f64], p: f64) -> Result<f64> {
    if ys.len() != yhats.len() || ys.is_empty() {
        return Err(CoreError::domain("quantile loss needs equal, nonempty inputs"));
    }
    quantile_loss(0.0, 0.0, p)?;
    Ok(ys.iter().zip(yhats).map(|(y, f)| pinball(*y, *f, p)).sum::<f64>() / ys.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseVariant {
    /// Root of the mean squared error.
    #[default]
    Mean,
    /// Root of the median squared error.
    Median,
}

pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    rmse_with(pairs, RmseVariant::Mean)
}

pub fn rmse_with(pairs: &[(f64, f64)], variant: RmseVariant) -> Result<f64> {
    if pairs.is_empty() {
        return Err(CoreError::domain("rmse of an empty list"));
    }
    let sq: Vec<f64> = pairs.iter().map(|(y, f)| (y - f) * (y - f)).collect();
    let center = match variant {
        RmseVariant::Mean => sq.iter().sum::<f64>() / sq.len() as f64,
        RmseVariant::Median => crate::stats::median(&sq),
    };
    Ok(center.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P50Variant {
    /// `Σ|Σŷ − Σy| / (2·Σ|Σŷ|)`.
    #[default]
    Printed,
    /// `Σ|Σŷ − Σy| / Σ|Σy|` (weighted absolute percentage error).
    Conventional,
}

/// P50_QL over samples given as `(Σ_h ŷ, Σ_h y)` pairs.
pub fn p50_ql(per_sample: &[(f64, f64)]) -> Result<f64> {
    p50_ql_with(per_sample, P50Variant::Printed)
}

pub fn p50_ql_with(per_sample: &[(f64, f64)], variant: P50Variant) -> Result<f64> {
    let num: f64 = per_sample.iter().map(|(f, y)| (f - y).abs()).sum();
    let denom = match variant {
        P50Variant::Printed => 2.0 * per_sample.iter().map(|(f, _)| f.abs()).sum::<f64>(),
        P50Variant::Conventional => per_sample.iter().map(|(_, y)| y.abs()).sum::<f64>(),
    };
    if denom == 0.0 || !denom.is_finite() {
        return Err(CoreError::domain("p50_ql denominator is zero"));
    }
    Ok(num / denom)
}

/// Horizon sums `(Σŷ, Σy)` for one window's forecast and target.
pub fn horizon_sums(yhat: &[f64], y: &[f64]) -> (f64, f64) {
    (yhat.iter().sum(), y.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    QuantileLoss,
    Rmse,
    P50Ql,
}

impl MetricName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::QuantileLoss => "quantile_loss",
            MetricName::Rmse => "rmse",
            MetricName::P50Ql => "p50_ql",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: MetricName,
    pub value: f64,
    pub group_keys: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(metric_name: MetricName, value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(CoreError::domain(format!(
                "{} value {value} is negative or NaN",
                metric_name.as_str()
            )));
        }
        Ok(Self {
            metric_name,
            value,
            group_keys: BTreeMap::new(),
        })
    }

    pub fn with_key(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.group_keys.insert(key.into(), value.into());
        self
    }
}

/// Accumulates point forecasts per window and reduces them to the three
/// metrics at once.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pairs: Vec<(f64, f64)>,
    sums: Vec<(f64, f64)>,
}

impl Evaluation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_window(&mut self, yhat: &[f64], y: &[f64]) {
        assert_eq!(yhat.len(), y.len());
        self.pairs.extend(y.iter().copied().zip(yhat.iter().copied()));
        self.sums.push(horizon_sums(yhat, y));
    }

    pub fn windows(&self) -> usize {
        self.sums.len()
    }

    pub fn rmse(&self) -> Result<f64> {
        rmse(&self.pairs)
    }

    pub fn p50_ql(&self) -> Result<f64> {
        p50_ql(&self.sums)
    }

    pub fn quantile_loss(&self) -> Result<f64> {
        if self.pairs.is_empty() {
            return Err(CoreError::domain("no forecasts recorded"));
        }
        Ok(self.pairs.iter().map(|(y, f)| pinball(*y, *f, 0.5)).sum::<f64>()
            / self.pairs.len() as f64)
    }

    /// All three metrics tagged with the given group keys.
    pub fn reports(&self, keys: &[(&str, &str)]) -> Result<Vec<MetricReport>> {
        let mut out = vec![
            MetricReport::new(MetricName::QuantileLoss, self.quantile_loss()?)?,
            MetricReport::new(MetricName::Rmse, self.rmse()?)?,
            MetricReport::new(MetricName::P50Ql, self.p50_ql()?)?,
        ];
        for r in &mut out {
            for (k, v) in keys {
                r.group_keys.insert(k.to_string(), v.to_string());
            }
        }
        Ok(out)
    }
}

pub fn write_reports_json<W: Write>(reports: &[MetricReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

/// Flat CSV: `metric,value,<sorted union of group keys>`.
pub fn write_reports_csv<W: Write>(reports: &[MetricReport], w: W) -> Result<()> {
    let mut keys: Vec<&String> = reports.iter().flat_map(|r| r.group_keys.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["metric".to_string(), "value".to_string()];
    header.extend(keys.iter().map(|k| k.to_string()));
    wr.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.metric_name.as_str().to_string(), r.value.to_string()];
        for k in &keys {
            row.push(r.group_keys.get(*k).cloned().unwrap_or_default());
        }
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| CoreError::domain(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quantile_loss_examples() {
        assert_abs_diff_eq!(quantile_loss(10.0, 8.0, 0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(quantile_loss(8.0, 10.0, 0.9).unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(quantile_loss(3.0, 3.0, 0.3).unwrap(), 0.0);
        assert!(quantile_loss(1.0, 2.0, 0.0).is_err());
        assert!(quantile_loss(1.0, 2.0, 1.0).is_err());
        assert!(quantile_loss(1.0, 2.0, f64::NAN).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_abs_diff_eq!(rmse(&[(3.0, 0.0), (0.0, 4.0)]).unwrap(), 12.5f64.sqrt());
        assert_eq!(rmse(&[(1.0, 1.0), (2.0, 2.0)]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[(1.0, 1.0), (0.0, 2.0)]).unwrap(), 2f64.sqrt());
        assert!(rmse(&[]).is_err());
        // median variant: squared errors {0, 4, 9} -> sqrt(4)
        let pairs = [(0.0, 0.0), (0.0, 2.0), (0.0, 3.0)];
        assert_eq!(rmse_with(&pairs, RmseVariant::Median).unwrap(), 2.0);
    }

    #[test]
    fn p50_examples() {
        assert_abs_diff_eq!(p50_ql(&[(10.0, 8.0)]).unwrap(), 0.1);
        assert_eq!(p50_ql(&[(5.0, 5.0), (7.0, 7.0)]).unwrap(), 0.0);
        assert_abs_diff_eq!(p50_ql(&[(10.0, 8.0), (5.0, 5.0)]).unwrap(), 2.0 / 30.0);
        assert!(p50_ql(&[(0.0, 3.0)]).is_err());
        assert_abs_diff_eq!(
            p50_ql_with(&[(10.0, 8.0)], P50Variant::Conventional).unwrap(),
            0.25
        );
    }

    #[test]
    fn negative_report_rejected() {
        assert!(MetricReport::new(MetricName::Rmse, -1.0).is_err());
        assert!(MetricReport::new(MetricName::Rmse, f64::NAN).is_err());
    }

    #[test]
    fn report_csv_has_group_columns() {
        let r = vec![
            MetricReport::new(MetricName::Rmse, 1.5).unwrap().with_key("model", "wr"),
            MetricReport::new(MetricName::P50Ql, 0.1)
                .unwrap()
                .with_key("month", "2014-06"),
        ];
        let mut buf = Vec::new();
        write_reports_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "metric,value,model,month");
        assert!(text.contains("rmse,1.5,wr,"));
        let mut js = Vec::new();
        write_reports_json(&r, &mut js).unwrap();
        let back: Vec<MetricReport> = serde_json::from_slice(&js).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn median_loss_is_half_abs(y in -1e6f64..1e6, f in -1e6f64..1e6) {
            let q = quantile_loss(y, f, 0.5).unwrap();
            prop_assert!((q - 0.5 * (y - f).abs()).abs() <= 1e-9 * (1.0 + y.abs() + f.abs()));
        }

        #[test]
        fn loss_nonnegative_zero_iff_equal(y in -1e3f64..1e3, f in -1e3f64..1e3, p in 0.01f64..0.99) {
            let q = quantile_loss(y, f, p).unwrap();
            prop_assert!(q >= 0.0);
            prop_assert_eq!(q == 0.0, y == f);
        }

        #[test]
        fn rmse_permutation_invariant(mut v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40)) {
            let a = rmse(&v).unwrap();
            v.reverse();
            let half = v.len() / 2;
            v.rotate_left(half);
            let b = rmse(&v).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn p50_scale_invariant(v in prop::collection::vec((1.0f64..1e3, 0.0f64..1e3), 1..20), c in 0.01f64..100.0) {
            let a = p50_ql(&v).unwrap();
            let scaled: Vec<_> = v.iter().map(|(f, y)| (f * c, y * c)).collect();
            let b = p50_ql(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }
}
