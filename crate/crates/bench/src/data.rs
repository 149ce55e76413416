//! Train/holdout window sets and the stage-1 component builders.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use wrcast_core::stats::mean;
use wrcast_core::{make_windows_where, window_at, ComponentMatrix, ForecastWindow, PanelDataset};
use wrcast_stats::causal::{
    dml_fit, festival_component, festival_factor_fit, promotion_component, DmlConfig, DmlRow, ElasticityModel, FestivalFactor,
    FestivalObservation, PricePoint,
};
use wrcast_stats::classical::{Method, MethodConfig};
use wrcast_stats::fforma::{default_meta_config, fforma_train, remove_promo_spikes, MetaLearner};
use wrcast_stats::stl::{stl_decompose, StlConfig};

use crate::config::BenchConfig;
use crate::error::{BenchError, Result};
use crate::synth::{generate_panel, PerturbSpec, SynthPanel};

/// Windows with stage-1 components and, for synthetic data, the truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<ForecastWindow>,
    pub components: Vec<ComponentMatrix>,
    pub truth: Option<Vec<ComponentMatrix>>,
    /// Leading horizon steps that count in evaluation; all of them when absent.
    pub eval_len: Option<Vec<usize>>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn eval_len(&self, k: usize) -> usize {
        self.eval_len
            .as_ref()
            .map_or(self.windows[k].horizon(), |e| e[k].min(self.windows[k].horizon()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub names: Vec<String>,
    pub train: WindowSet,
    pub test: WindowSet,
}

impl Prepared {
    pub fn n_components(&self) -> usize {
        self.names.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        let f = std::fs::File::create(p).map_err(|e| BenchError::io(p, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let f = std::fs::File::open(p).map_err(|e| BenchError::io(p, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Untrained window split: the last `k` non-overlapping horizons of every
/// series are held out; training anchors keep their targets before them.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<ForecastWindow>,
    pub test: Vec<ForecastWindow>,
    pub eval_len: Option<Vec<usize>>,
}

pub fn holdout_split(ds: &PanelDataset, cfg: &BenchConfig, sample_seed: u64) -> Result<Split> {
    let (t, h) = (cfg.t, cfg.h);
    let mut test = Vec::new();
    let mut first_test = vec![usize::MAX; ds.len()];
    for (si, rec) in ds.records().iter().enumerate() {
        let n = rec.len();
        let need = t + h * (cfg.test_windows + 1);
        if n < need {
            log::warn!("series `{}` has {n} points, fewer than the {need} needed; skipped", rec.id());
            continue;
        }
        let last = n - 1 - h;
        let anchors: Vec<usize> = (0..cfg.test_windows).rev().map(|m| last - m * h).collect();
        first_test[si] = anchors[0];
        for a in anchors {
            test.push(window_at(rec, si, a, t, h)?);
        }
    }
    if test.is_empty() {
        return Err(BenchError::Data(format!("no series is long enough for T = {t}, H = {h}")));
    }
    let train = make_windows_where(ds, t, h, cfg.samples_per_series, sample_seed, |si, a| {
        first_test[si] != usize::MAX && a + h <= first_test[si]
    })?;
    if train.is_empty() {
        return Err(BenchError::Data("no training windows before the holdout".into()));
    }
    Ok(Split {
        train,
        test,
        eval_len: None,
    })
}

/// Holdout anchored on calendar dates: each test window forecasts from the
/// given date and is scored over that calendar month.
pub fn dated_split(ds: &PanelDataset, cfg: &BenchConfig, dates: &[NaiveDate], sample_seed: u64) -> Result<Split> {
    let (t, h) = (cfg.t, cfg.h);
    let first = *dates
        .iter()
        .min()
        .ok_or_else(|| BenchError::Config("no forecast anchors given".into()))?;
    let mut test = Vec::new();
    let mut eval_len = Vec::new();
    let mut cut = vec![usize::MAX; ds.len()];
    for (si, rec) in ds.records().iter().enumerate() {
        let pos = |d: NaiveDate| {
            rec.series
                .position(d - Duration::days(1))
                .ok_or_else(|| BenchError::Data(format!("series `{}` has no observation before {d}", rec.id())))
        };
        cut[si] = pos(first)?;
        for &d in dates {
            let a = pos(d)?;
            test.push(window_at(rec, si, a, t, h)?);
            eval_len.push(days_in_month(d).min(h));
        }
    }
    let train = make_windows_where(ds, t, h, cfg.samples_per_series, sample_seed, |si, a| a + h <= cut[si])?;
    if train.is_empty() {
        return Err(BenchError::Data("no training windows before the first anchor".into()));
    }
    Ok(Split {
        train,
        test,
        eval_len: Some(eval_len),
    })
}

fn days_in_month(d: NaiveDate) -> usize {
    let (y, m) = (d.year(), d.month());
    let next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    };
    let start = NaiveDate::from_ymd_opt(y, m, 1).expect("valid date");
    (next.expect("valid date") - start).num_days() as usize
}

/// Perturbed synthetic truths as the preliminary estimates.
pub fn synthetic_prepared(panel: &SynthPanel, split: &Split, perturb: &PerturbSpec, seed: u64) -> Result<Prepared> {
    let build = |ws: &[ForecastWindow], eval_len: Option<Vec<usize>>| -> Result<WindowSet> {
        Ok(WindowSet {
            windows: ws.to_vec(),
            components: ws.iter().map(|w| panel.estimates(w, perturb, seed)).collect::<Result<_>>()?,
            truth: Some(ws.iter().map(|w| panel.truth_matrix(w)).collect::<Result<_>>()?),
            eval_len,
        })
    };
    Ok(Prepared {
        names: SynthPanel::names(),
        train: build(&split.train, None)?,
        test: build(&split.test, split.eval_len.clone())?,
    })
}

/// Panel, holdout split and perturbed estimates for the configured synthetic spec.
pub fn synthetic_setup(cfg: &BenchConfig) -> Result<(SynthPanel, Prepared)> {
    let panel = generate_panel(&cfg.synth_spec(cfg.seed))?;
    let split = holdout_split(&panel.dataset, cfg, cfg.seed)?;
    let data = synthetic_prepared(&panel, &split, &cfg.perturbation(), cfg.seed)?;
    Ok((panel, data))
}

pub const STL_NAMES: [&str; 2] = ["trend", "seasonal"];

/// Trend and seasonal projections of an STL fit on the window history.
pub fn stl_components(w: &ForecastWindow, cfg: &StlConfig) -> Result<ComponentMatrix> {
    let fit = stl_decompose(&w.history, cfg)?;
    let (trend, seasonal) = fit.forecast_parts(w.horizon());
    Ok(ComponentMatrix::new(
        STL_NAMES.iter().map(|s| s.to_string()).collect(),
        vec![trend, seasonal],
    )?)
}

pub fn stl_prepared(split: &Split, cfg: &StlConfig) -> Result<Prepared> {
    let build = |ws: &[ForecastWindow], eval_len: Option<Vec<usize>>| -> Result<WindowSet> {
        Ok(WindowSet {
            windows: ws.to_vec(),
            components: ws.iter().map(|w| stl_components(w, cfg)).collect::<Result<_>>()?,
            truth: None,
            eval_len,
        })
    };
    Ok(Prepared {
        names: STL_NAMES.iter().map(|s| s.to_string()).collect(),
        train: build(&split.train, None)?,
        test: build(&split.test, split.eval_len.clone())?,
    })
}

/// Statistical baseline, causal promotion uplift and festival factor,
/// all estimated from training-period data only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PracticalStage1 {
    pub baseline: MetaLearner,
    pub elasticity: ElasticityModel,
    pub festival: FestivalFactor,
    /// Modifier categories: index 0 is "no promotion", then the vocabulary.
    pub promo_types: Vec<String>,
}

pub const PRACTICAL_NAMES: [&str; 3] = ["baseline", "promotion", "festival"];

/// Controls for the outcome and treatment nuisances: level of the cleaned
/// series over the previous week, weekday and month.
fn controls(clean: &[f64], t: usize, d: NaiveDate) -> Vec<f64> {
    let lo = t.saturating_sub(7);
    let level = if t == 0 { clean[0] } else { mean(&clean[lo..t]) };
    vec![level.max(0.0).ln_1p(), d.weekday().num_days_from_monday() as f64, d.month() as f64]
}

/// Fits the practical stage 1 on observations strictly before each
/// series' cut index.
pub fn fit_practical(ds: &PanelDataset, cut: &[usize], train: &[ForecastWindow], h: usize, seed: u64) -> Result<PracticalStage1> {
    let max_windows = 200;
    let histories: Vec<Vec<f64>> = train
        .iter()
        .take(max_windows)
        .map(|w| remove_promo_spikes(&w.history, &w.history_covariates))
        .collect::<std::result::Result<_, _>>()?;
    let baseline = fforma_train(&histories, h, &Method::ALL, &MethodConfig::default(), &default_meta_config())?;

    let vocab = ds.vocabulary();
    let mut rows = Vec::new();
    let mut fest = Vec::new();
    for (si, rec) in ds.records().iter().enumerate() {
        let end = cut[si].min(rec.len());
        if end < 8 {
            continue;
        }
        let clean = remove_promo_spikes(&rec.series.values()[..end], &rec.covariates[..end])?;
        for t in 7..end {
            let c = &rec.covariates[t];
            let y = rec.series.values()[t];
            let d = rec.series.dates()[t];
            if let Some(level) = &c.festival_level {
                if clean[t] > 0.0 {
                    fest.push(FestivalObservation {
                        level: level.clone(),
                        actual: y,
                        baseline: clean[t],
                    });
                }
                continue;
            }
            let (Some(price), Some(_)) = (c.price, c.reference_price) else {
                continue;
            };
            let x = c.promo_type.as_deref().and_then(|p| vocab.promo_index(p)).map_or(0, |k| k + 1);
            rows.push(DmlRow::from_levels(y, price, x, controls(&clean, t, d))?);
        }
    }
    let n_cat = vocab.promo_types.len() + 1;
    let elasticity = dml_fit(&rows, n_cat, &DmlConfig { seed, ..DmlConfig::default() })?;
    let festival = festival_factor_fit(&fest)?;
    Ok(PracticalStage1 {
        baseline,
        elasticity,
        festival,
        promo_types: vocab.promo_types.clone(),
    })
}

impl PracticalStage1 {
    pub fn components(&self, w: &ForecastWindow) -> Result<ComponentMatrix> {
        let h = w.horizon();
        let clean = remove_promo_spikes(&w.history, &w.history_covariates)?;
        let baseline: Vec<f64> = self.baseline.predict(&clean, h)?.into_iter().map(|v| v.max(0.0)).collect();
        let plan: Vec<PricePoint> = w
            .future_covariates
            .iter()
            .map(|c| {
                let reference = c.reference_price.unwrap_or(1.0);
                PricePoint {
                    price: c.price.unwrap_or(reference),
                    reference_price: reference,
                    promo: c
                        .promo_type
                        .as_deref()
                        .map(|p| self.promo_types.iter().position(|q| q == p).map_or(0, |k| k + 1)),
                }
            })
            .collect();
        let promotion = promotion_component(&self.elasticity, &baseline, &plan)?;
        let levels: Vec<Option<String>> = w.future_covariates.iter().map(|c| c.festival_level.clone()).collect();
        let festival = festival_component(&self.festival, &baseline, &levels)?;
        Ok(ComponentMatrix::new(
            PRACTICAL_NAMES.iter().map(|s| s.to_string()).collect(),
            vec![baseline, promotion, festival],
        )?)
    }
}

/// First held-out anchor of every series in a split, or the series end.
pub fn cut_points(ds: &PanelDataset, split: &Split) -> Vec<usize> {
    let mut cut: Vec<usize> = ds.records().iter().map(|r| r.len()).collect();
    for w in &split.test {
        cut[w.series_index] = cut[w.series_index].min(w.anchor + 1);
    }
    cut
}

pub fn practical_prepared(split: &Split, stage1: &PracticalStage1) -> Result<Prepared> {
    let build = |ws: &[ForecastWindow], eval_len: Option<Vec<usize>>| -> Result<WindowSet> {
        Ok(WindowSet {
            windows: ws.to_vec(),
            components: ws.iter().map(|w| stage1.components(w)).collect::<Result<_>>()?,
            truth: None,
            eval_len,
        })
    };
    Ok(Prepared {
        names: PRACTICAL_NAMES.iter().map(|s| s.to_string()).collect(),
        train: build(&split.train, None)?,
        test: build(&split.test, split.eval_len.clone())?,
    })
}
