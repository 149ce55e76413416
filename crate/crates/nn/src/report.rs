//! Histograms of learned weights and residuals over a set of outputs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::wr::WrOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges; a degenerate sample gets the single bin
    /// `[v, v]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || lo == hi || bins <= 1 {
            let (lo, hi) = if values.is_empty() { (0.0, 0.0) } else { (lo, hi) };
            return Self {
                edges: vec![lo, hi],
                counts: vec![values.len()],
            };
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub share_below_one: f64,
    pub share_above_one: f64,
}

impl Summary {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let tol = 1e-12;
        Self {
            count: values.len(),
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            share_below_one: values.iter().filter(|v| **v < 1.0 - tol).count() as f64 / n,
            share_above_one: values.iter().filter(|v| **v > 1.0 + tol).count() as f64 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub quantity: String,
    pub histogram: Histogram,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    /// One entry per component weight, then the residual.
    pub distributions: Vec<Distribution>,
}

impl WeightReport {
    pub fn get(&self, quantity: &str) -> Option<&Distribution> {
        self.distributions.iter().find(|d| d.quantity == quantity)
    }

    pub fn write_histograms_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["quantity", "bin_lo", "bin_hi", "count"]).map_err(csv_err)?;
        for d in &self.distributions {
            for (k, c) in d.histogram.counts.iter().enumerate() {
                out.write_record([
                    d.quantity.clone(),
                    d.histogram.edges[k].to_string(),
                    d.histogram.edges[k + 1].to_string(),
                    c.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush().map_err(|e| NnError::Io {
            path: "<histograms>".into(),
            source: e,
        })
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["quantity", "count", "mean", "min", "max", "share_below_1", "share_above_1"])
            .map_err(csv_err)?;
        for d in &self.distributions {
            let s = &d.summary;
            out.write_record([
                d.quantity.clone(),
                s.count.to_string(),
                s.mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
                s.share_below_one.to_string(),
                s.share_above_one.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(|e| NnError::Io {
            path: "<summary>".into(),
            source: e,
        })
    }
}

fn csv_err(e: csv::Error) -> NnError {
    NnError::Checkpoint(format!("csv: {e}"))
}

/// Pools every weight and residual over all outputs and horizons.
pub fn report_weight_distributions(outputs: &[WrOutput], bins: usize) -> Result<WeightReport> {
    let first = outputs.first().ok_or_else(|| NnError::config("no outputs to report"))?;
    let names = &first.names;
    if outputs.iter().any(|o| &o.names != names) {
        return Err(NnError::config("outputs mix different component sets"));
    }
    let mut distributions = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let vals: Vec<f64> = outputs.iter().flat_map(|o| o.weights[i].iter().copied()).collect();
        distributions.push(Distribution {
            quantity: format!("weight_{name}"),
            histogram: Histogram::new(&vals, bins),
            summary: Summary::new(&vals),
        });
    }
    let res: Vec<f64> = outputs.iter().flat_map(|o| o.residuals.iter().copied()).collect();
    distributions.push(Distribution {
        quantity: "residual".into(),
        histogram: Histogram::new(&res, bins),
        summary: Summary::new(&res),
    });
    Ok(WeightReport { distributions })
}
