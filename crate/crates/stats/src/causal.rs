//! Promotion component from a double/debiased ML price elasticity and the
//! festival component from per-level uplift factors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wrcast_core::linalg::weighted_least_squares;
use wrcast_core::stats::{mean, variance};

use crate::error::{Result, StatsError};
use crate::gbdt::{gbdt_fit_squared, GbdtConfig, GbdtModel};

/// One observation: outcome `y` (log1p sales), treatment `tr` (log price),
/// treatment-modifier category `x` and controls `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmlRow {
    pub y: f64,
    pub tr: f64,
    pub x: usize,
    pub w: Vec<f64>,
}

impl DmlRow {
    /// Builds a row from raw sales and price.
    pub fn from_levels(sales: f64, price: f64, x: usize, w: Vec<f64>) -> Result<Self> {
        if !(price > 0.0) {
            return Err(StatsError::domain(format!("price must be positive, got {price}")));
        }
        if !(sales >= 0.0) {
            return Err(StatsError::domain(format!("sales must be nonnegative, got {sales}")));
        }
        Ok(Self {
            y: sales.ln_1p(),
            tr: price.ln(),
            x,
            w,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmlConfig {
    pub nuisance: GbdtConfig,
    pub seed: u64,
}

impl Default for DmlConfig {
    fn default() -> Self {
        Self {
            nuisance: GbdtConfig {
                n_trees: 100,
                learning_rate: 0.1,
                max_depth: 3,
                min_leaf: 5,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityModel {
    /// Number of modifier categories.
    pub n_categories: usize,
    /// `theta[x]`; `None` for categories without treatment variation.
    pub theta: Vec<Option<f64>>,
    /// Pooled effect from `Ỹ ~ 1 + T̃`.
    pub theta_average: f64,
    pub intercept: f64,
    /// Outcome and treatment nuisance models, one per fold.
    pub outcome_models: Vec<GbdtModel>,
    pub treatment_models: Vec<GbdtModel>,
    /// Fold of each training row and the fold whose models produced its
    /// residuals.
    pub fold_of_row: Vec<usize>,
    pub predicted_by: Vec<usize>,
}

impl ElasticityModel {
    /// Per-category elasticity, falling back to the pooled effect.
    pub fn theta_for(&self, x: usize) -> f64 {
        self.theta.get(x).copied().flatten().unwrap_or(self.theta_average)
    }
}

fn design(rows: &[DmlRow], n_cat: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut f = vec![0.0; n_cat];
            f[r.x] = 1.0;
            f.extend_from_slice(&r.w);
            f
        })
        .collect()
}

/// Two-fold cross-fitted partially linear model with treatment effects
/// interacted with the modifier category.
pub fn dml_fit(rows: &[DmlRow], n_categories: usize, cfg: &DmlConfig) -> Result<ElasticityModel> {
    if rows.len() < 100 {
        return Err(StatsError::domain(format!("dml needs at least 100 rows, got {}", rows.len())));
    }
    let width = rows[0].w.len();
    for r in rows {
        if r.x >= n_categories || r.w.len() != width {
            return Err(StatsError::domain("row category or control width out of range"));
        }
        if !(r.y.is_finite() && r.tr.is_finite()) || r.w.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::domain("dml rows must be finite"));
        }
    }
    let trs: Vec<f64> = rows.iter().map(|r| r.tr).collect();
    if variance(&trs) <= 1e-14 * (1.0 + mean(&trs).abs()) {
        return Err(StatsError::Identifiability("treatment has no variation".into()));
    }

    let n = rows.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut fold_of_row = vec![0usize; n];
    for &i in &perm[n / 2..] {
        fold_of_row[i] = 1;
    }
    let xmat = design(rows, n_categories);
    let mut y_res = vec![0.0; n];
    let mut t_res = vec![0.0; n];
    let mut predicted_by = vec![usize::MAX; n];
    let mut outcome_models = Vec::with_capacity(2);
    let mut treatment_models = Vec::with_capacity(2);
    for train_fold in 0..2 {
        let idx: Vec<usize> = (0..n).filter(|&i| fold_of_row[i] == train_fold).collect();
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| xmat[i].clone()).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| rows[i].y).collect();
        let ts: Vec<f64> = idx.iter().map(|&i| rows[i].tr).collect();
        let f0 = gbdt_fit_squared(&xs, &ys, &cfg.nuisance)?;
        let f1 = gbdt_fit_squared(&xs, &ts, &cfg.nuisance)?;
        for i in (0..n).filter(|&i| fold_of_row[i] != train_fold) {
            y_res[i] = rows[i].y - f0.predict(&xmat[i])?;
            t_res[i] = rows[i].tr - f1.predict(&xmat[i])?;
            predicted_by[i] = train_fold;
        }
        outcome_models.push(f0);
        treatment_models.push(f1);
    }

    if variance(&t_res) <= 1e-14 {
        return Err(StatsError::Identifiability("treatment residuals have no variation".into()));
    }
    let ones = vec![1.0; n];
    let pooled_rows: Vec<Vec<f64>> = t_res.iter().map(|t| vec![1.0, *t]).collect();
    let pooled = weighted_least_squares(&pooled_rows, &y_res, &ones)
        .ok_or_else(|| StatsError::Identifiability("pooled final stage is singular".into()))?;

    // interacted stage on categories that carry treatment variation
    let active: Vec<usize> = (0..n_categories)
        .filter(|&k| {
            let tk: Vec<f64> = (0..n).filter(|&i| rows[i].x == k).map(|i| t_res[i]).collect();
            tk.len() >= 2 && tk.iter().map(|t| t * t).sum::<f64>() > 1e-12
        })
        .collect();
    let inter_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![1.0];
            r.extend(active.iter().map(|&k| if rows[i].x == k { t_res[i] } else { 0.0 }));
            r
        })
        .collect();
    let beta = weighted_least_squares(&inter_rows, &y_res, &ones)
        .ok_or_else(|| StatsError::Identifiability("interacted final stage is singular".into()))?;
    let mut theta = vec![None; n_categories];
    for (j, &k) in active.iter().enumerate() {
        theta[k] = Some(beta[j + 1]);
    }
    Ok(ElasticityModel {
        n_categories,
        theta,
        theta_average: pooled[1],
        intercept: beta[0],
        outcome_models,
        treatment_models,
        fold_of_row,
        predicted_by,
    })
}

/// One date of a price plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub price: f64,
    pub reference_price: f64,
    /// Modifier category when the date is a promotion, `None` otherwise.
    pub promo: Option<usize>,
}

/// Uplift `l̂_b·((p/r)^θ − 1)` on promotion dates, 0 elsewhere.
pub fn promotion_component(model: &ElasticityModel, baseline: &[f64], plan: &[PricePoint]) -> Result<Vec<f64>> {
    promotion_uplift(|x| model.theta_for(x), baseline, plan)
}

pub fn promotion_uplift<F: Fn(usize) -> f64>(theta: F, baseline: &[f64], plan: &[PricePoint]) -> Result<Vec<f64>> {
    if baseline.len() != plan.len() {
        return Err(StatsError::domain("baseline and price plan differ in length"));
    }
    baseline
        .iter()
        .zip(plan)
        .map(|(b, p)| match p.promo {
            None => Ok(0.0),
            Some(x) => {
                if !(p.price > 0.0 && p.reference_price > 0.0) {
                    return Err(StatsError::domain("promotion prices must be positive"));
                }
                Ok(b * ((p.price / p.reference_price).powf(theta(x)) - 1.0))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FestivalFactor {
    pub beta: BTreeMap<String, f64>,
    pub count: BTreeMap<String, usize>,
}

/// One past festival day: level, actual sales and baseline prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FestivalObservation {
    pub level: String,
    pub actual: f64,
    pub baseline: f64,
}

/// `β_level = mean((actual − l̂_b)/l̂_b)` over past festivals of the level.
pub fn festival_factor_fit(history: &[FestivalObservation]) -> Result<FestivalFactor> {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in history {
        if !(o.baseline > 0.0) {
            return Err(StatsError::domain(format!(
                "festival baseline must be positive, got {}",
                o.baseline
            )));
        }
        acc.entry(o.level.clone())
            .or_default()
            .push((o.actual - o.baseline) / o.baseline);
    }
    let mut f = FestivalFactor::default();
    for (level, ratios) in acc {
        let mut b = mean(&ratios);
        if b <= -1.0 {
            log::warn!("festival level {level}: factor {b} clamped above -1");
            b = -1.0 + 1e-9;
        }
        f.count.insert(level.clone(), ratios.len());
        f.beta.insert(level, b);
    }
    Ok(f)
}

impl FestivalFactor {
    pub fn beta_for(&self, level: &str) -> f64 {
        match self.beta.get(level) {
            Some(b) => *b,
            None => {
                log::warn!("no festival history for level {level}; using factor 0");
                0.0
            }
        }
    }
}

/// `β·l̂_b` on festival dates, 0 elsewhere.
pub fn festival_component(factor: &FestivalFactor, baseline: &[f64], levels: &[Option<String>]) -> Result<Vec<f64>> {
    if baseline.len() != levels.len() {
        return Err(StatsError::domain("baseline and festival calendar differ in length"));
    }
    Ok(baseline
        .iter()
        .zip(levels)
        .map(|(b, l)| l.as_deref().map_or(0.0, |l| factor.beta_for(l) * b))
        .collect())
}
