//! Flat key-value run configuration read from TOML.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use wrcast_nn::TrainConfig;
use wrcast_stats::stl::StlConfig;

use crate::error::{BenchError, Result};
use crate::synth::{PerturbSpec, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// History length.
    #[serde(rename = "T")]
    pub t: usize,
    /// Forecast horizon.
    #[serde(rename = "H")]
    pub h: usize,
    /// Expected number of components; checked when set.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub samples_per_series: usize,
    /// Non-overlapping holdout windows at the end of every series.
    pub test_windows: usize,
    /// Number of training seeds per experiment cell.
    pub seeds: usize,
    pub seed: u64,

    pub n_p: usize,
    pub n_s: f64,
    pub n_t: f64,
    pub n_l: f64,

    pub n_series: usize,
    pub length: usize,
    pub noise: f64,
    pub theta: f64,
    pub promo_frequency: f64,
    pub bias: Vec<f64>,
    pub sigma: Vec<f64>,

    pub electricity: Option<PathBuf>,
    pub clients: usize,
    pub anchors: Vec<NaiveDate>,
    pub bins: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        let d = |m| NaiveDate::from_ymd_opt(2014, m, 1).expect("valid date");
        Self {
            t: 28,
            h: 14,
            n: None,
            alpha: 1.0,
            alphas: vec![0.0, 0.5, 1.0, 2.0, 3.0],
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            validation_fraction: 0.2,
            samples_per_series: 16,
            test_windows: 4,
            seeds: 10,
            seed: 0,
            n_p: 12,
            n_s: 1.0,
            n_t: 1.0,
            n_l: 1.0,
            n_series: synth.n_series,
            length: synth.length,
            noise: synth.noise,
            theta: synth.promo.theta,
            promo_frequency: synth.promo.frequency,
            bias: synth.perturbation.bias,
            sigma: synth.perturbation.sigma,
            electricity: None,
            clients: 10,
            anchors: vec![d(6), d(7), d(8)],
            bins: 20,
        }
    }
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.t == 0 || self.h == 0 {
            return bad("T and H must be positive".into());
        }
        if self.seeds == 0 || self.samples_per_series == 0 || self.test_windows == 0 {
            return bad("seeds, samples_per_series and test_windows must be positive".into());
        }
        if self.alphas.iter().chain(std::iter::once(&self.alpha)).any(|a| !(*a >= 0.0)) {
            return bad("alpha values must be >= 0".into());
        }
        if let Some(n) = self.n {
            if n < 2 {
                return bad(format!("N must be at least 2, got {n}"));
            }
            if let Some(a) = self.alphas.iter().chain(std::iter::once(&self.alpha)).find(|a| **a > n as f64) {
                return bad(format!("alpha {a} exceeds N = {n}"));
            }
        }
        if self.n_p < 2 {
            return bad(format!("n_p must be at least 2, got {}", self.n_p));
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        self.train_config(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.synth_spec(0).validate()
    }

    /// Settings for the daily electricity panel: two months of history and a
    /// month ahead.
    pub fn public() -> Self {
        Self {
            t: 60,
            h: 31,
            n: Some(2),
            alphas: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            ..Self::default()
        }
    }

    /// Rejects a component count that disagrees with an explicit `N`.
    pub fn check_components(&self, n: usize) -> Result<()> {
        match self.n {
            Some(expected) if expected != n => Err(BenchError::Config(format!("config sets N = {expected} but the data has {n} components"))),
            _ => {
                if let Some(a) = self.alphas.iter().chain(std::iter::once(&self.alpha)).find(|a| **a > n as f64) {
                    return Err(BenchError::Config(format!("alpha {a} exceeds N = {n}")));
                }
                Ok(())
            }
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            validation_fraction: self.validation_fraction,
        }
    }

    /// Seeds of the repeated runs.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }

    pub fn perturbation(&self) -> PerturbSpec {
        PerturbSpec {
            bias: self.bias.clone(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn synth_spec(&self, seed: u64) -> SynthSpec {
        let mut s = SynthSpec {
            n_series: self.n_series,
            length: self.length,
            noise: self.noise,
            perturbation: self.perturbation(),
            seed,
            ..SynthSpec::default()
        };
        s.promo.theta = self.theta;
        s.promo.frequency = self.promo_frequency;
        s
    }

    pub fn stl_config(&self) -> Result<StlConfig> {
        Ok(StlConfig::from_multipliers(self.n_p, self.n_s, self.n_t, self.n_l)?)
    }
}
