//! Synthetic sales panel with known components.

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use wrcast_core::{ComponentMatrix, Covariates, ForecastWindow, PanelDataset, SeriesRecord, TimeSeries, Vocabulary};
use wrcast_stats::causal::{promotion_uplift, PricePoint};

use crate::error::{BenchError, Result};

pub const COMPONENT_NAMES: [&str; 3] = ["baseline", "promotion", "festival"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    /// Mean level; each series draws its own level from `level·[1 − spread, 1 + spread]`.
    pub level: f64,
    pub level_spread: f64,
    /// AR(1) coefficient of the relative deviation around the level.
    pub phi: f64,
    /// Innovation σ of that deviation, relative to the level.
    pub sigma: f64,
    /// Weekly sine amplitude relative to the level.
    pub weekly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromoSpec {
    /// Probability that a day is a promotion day.
    pub frequency: f64,
    pub discount: (f64, f64),
    /// Price elasticity.
    pub theta: f64,
    pub reference_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FestivalDay {
    pub month: u32,
    pub day: u32,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FestivalSpec {
    pub calendar: Vec<FestivalDay>,
    /// Uplift relative to the baseline, per level.
    pub beta: Vec<(String, f64)>,
}

impl FestivalSpec {
    fn beta(&self, level: &str) -> f64 {
        self.beta.iter().find(|(l, _)| l == level).map_or(0.0, |(_, b)| *b)
    }

    fn level_on(&self, d: NaiveDate) -> Option<&str> {
        self.calendar
            .iter()
            .find(|f| f.month == d.month() && f.day == d.day())
            .map(|f| f.level.as_str())
    }
}

/// `l̂ᵢ = lᵢ·biasᵢ·exp(σᵢ·z)` per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub bias: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl PerturbSpec {
    pub fn identity(n: usize) -> Self {
        Self {
            bias: vec![1.0; n],
            sigma: vec![0.0; n],
        }
    }

    /// Baseline inflated, promotion deflated.
    pub fn opposite_sign() -> Self {
        Self {
            bias: vec![1.2, 0.8, 1.0],
            sigma: vec![0.05, 0.1, 0.1],
        }
    }

    /// Baseline and promotion both inflated.
    pub fn same_sign() -> Self {
        Self {
            bias: vec![1.2, 1.2, 1.0],
            sigma: vec![0.05, 0.1, 0.1],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.bias.len() != n || self.sigma.len() != n {
            return Err(BenchError::Config(format!(
                "perturbation needs {n} biases and sigmas, got {} and {}",
                self.bias.len(),
                self.sigma.len()
            )));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) || self.bias.iter().any(|b| !b.is_finite()) {
            return Err(BenchError::Config("perturbation sigmas must be >= 0 and biases finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_series: usize,
    pub length: usize,
    pub start: NaiveDate,
    pub baseline: BaselineSpec,
    pub promo: PromoSpec,
    pub festival: FestivalSpec,
    /// Observation noise σ relative to the series level.
    pub noise: f64,
    pub perturbation: PerturbSpec,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let fest = |month, day, level: &str| FestivalDay {
            month,
            day,
            level: level.to_string(),
        };
        Self {
            n_series: 50,
            length: 400,
            start: NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date"),
            baseline: BaselineSpec {
                level: 100.0,
                level_spread: 0.5,
                phi: 0.8,
                sigma: 0.05,
                weekly: 0.1,
            },
            promo: PromoSpec {
                frequency: 0.15,
                discount: (0.1, 0.4),
                theta: -2.0,
                reference_price: 10.0,
            },
            festival: FestivalSpec {
                calendar: vec![
                    fest(1, 1, "A"),
                    fest(2, 14, "B"),
                    fest(3, 8, "B"),
                    fest(5, 1, "A"),
                    fest(6, 18, "S"),
                    fest(8, 18, "B"),
                    fest(10, 1, "A"),
                    fest(11, 11, "S"),
                    fest(12, 12, "A"),
                ],
                beta: vec![("S".into(), 1.0), ("A".into(), 0.5), ("B".into(), 0.25)],
            },
            noise: 0.05,
            perturbation: PerturbSpec::opposite_sign(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// No promotions, festivals or noise.
    pub fn plain(n_series: usize, length: usize, seed: u64) -> Self {
        let mut s = Self {
            n_series,
            length,
            seed,
            noise: 0.0,
            perturbation: PerturbSpec::identity(COMPONENT_NAMES.len()),
            ..Self::default()
        };
        s.baseline.sigma = 0.0;
        s.promo.frequency = 0.0;
        s.festival.calendar.clear();
        s
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.baseline;
        let p = &self.promo;
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.n_series == 0 || self.length < 2 {
            return bad("need at least one series of length >= 2");
        }
        if !(b.level > 0.0) || !(0.0..1.0).contains(&b.level_spread) || !(b.phi.abs() < 1.0) {
            return bad("baseline level must be positive, spread in [0,1), |phi| < 1");
        }
        if b.sigma < 0.0 || self.noise < 0.0 || b.weekly < 0.0 {
            return bad("sigmas must be >= 0");
        }
        if !(0.0..=1.0).contains(&p.frequency) {
            return bad("promotion frequency must lie in [0,1]");
        }
        let (lo, hi) = p.discount;
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return bad("discounts must lie in (0,1)");
        }
        if !(p.reference_price > 0.0) {
            return bad("reference price must be positive");
        }
        let vocab = Vocabulary::default();
        for f in &self.festival.calendar {
            if vocab.festival_index(&f.level).is_none() {
                return Err(BenchError::Config(format!("unknown festival level `{}`", f.level)));
            }
        }
        self.perturbation.validate(COMPONENT_NAMES.len())
    }
}

/// Generated panel plus per-series true components `[component][t]`.
#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub dataset: PanelDataset,
    pub truth: Vec<Vec<Vec<f64>>>,
    /// Observations clipped at zero.
    pub clipped: usize,
}

impl SynthPanel {
    pub fn names() -> Vec<String> {
        COMPONENT_NAMES.iter().map(|s| s.to_string()).collect()
    }

    /// True components over the window's horizon.
    pub fn truth_matrix(&self, w: &ForecastWindow) -> Result<ComponentMatrix> {
        let comps = self
            .truth
            .get(w.series_index)
            .ok_or_else(|| BenchError::Data(format!("no series {}", w.series_index)))?;
        let lo = w.anchor + 1;
        let hi = lo + w.horizon();
        if hi > comps[0].len() {
            return Err(BenchError::Data(format!("window past the end of `{}`", w.series_id)));
        }
        let rows = comps.iter().map(|c| c[lo..hi].to_vec()).collect();
        Ok(ComponentMatrix::new(Self::names(), rows)?)
    }

    /// Preliminary estimates for a window, seeded by series and anchor so
    /// the draw does not depend on window order.
    pub fn estimates(&self, w: &ForecastWindow, spec: &PerturbSpec, seed: u64) -> Result<ComponentMatrix> {
        let truth = self.truth_matrix(w)?;
        let s = seed ^ (w.series_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (w.anchor as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        perturb_components(&truth, spec, s)
    }
}

pub fn generate_panel(spec: &SynthSpec) -> Result<SynthPanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = &spec.baseline;
    let p = &spec.promo;
    let promo_name = Vocabulary::default().promo_types[0].clone();
    let dates: Vec<NaiveDate> = (0..spec.length).map(|k| spec.start + Duration::days(k as i64)).collect();
    let mut records = Vec::with_capacity(spec.n_series);
    let mut truth = Vec::with_capacity(spec.n_series);
    let mut clipped = 0;
    for s in 0..spec.n_series {
        let level = b.level * (1.0 + b.level_spread * rng.gen_range(-1.0..=1.0));
        let phase = rng.gen_range(0.0..7.0);
        let mut dev = 0.0;
        let mut baseline = Vec::with_capacity(spec.length);
        let mut covs = Vec::with_capacity(spec.length);
        let mut plan = Vec::with_capacity(spec.length);
        for (t, d) in dates.iter().enumerate() {
            dev = b.phi * dev + b.sigma * rng.sample::<f64, _>(StandardNormal);
            let week = b.weekly * (2.0 * std::f64::consts::PI * (t as f64 + phase) / 7.0).sin();
            baseline.push((level * (1.0 + week + dev)).max(0.0));
            let promo = p.frequency > 0.0 && rng.gen_bool(p.frequency);
            let price = if promo {
                p.reference_price * (1.0 - rng.gen_range(p.discount.0..=p.discount.1))
            } else {
                p.reference_price
            };
            plan.push(PricePoint {
                price,
                reference_price: p.reference_price,
                promo: promo.then_some(0),
            });
            covs.push(Covariates {
                price: Some(price),
                reference_price: Some(p.reference_price),
                promo_type: promo.then(|| promo_name.clone()),
                festival_level: spec.festival.level_on(*d).map(str::to_string),
            });
        }
        let promotion = promotion_uplift(|_| p.theta, &baseline, &plan)?;
        let festival: Vec<f64> = baseline
            .iter()
            .zip(&covs)
            .map(|(v, c)| c.festival_level.as_deref().map_or(0.0, |l| spec.festival.beta(l) * v))
            .collect();
        let values: Vec<f64> = (0..spec.length)
            .map(|t| {
                let e = spec.noise * level * rng.sample::<f64, _>(StandardNormal);
                let y = baseline[t] + promotion[t] + festival[t] + e;
                if y < 0.0 {
                    clipped += 1;
                }
                y.max(0.0)
            })
            .collect();
        let series = TimeSeries::new(format!("s{s:03}"), dates.clone(), values)?;
        records.push(SeriesRecord::new(series, covs)?);
        truth.push(vec![baseline, promotion, festival]);
    }
    if clipped > 0 {
        log::info!("clipped {clipped} negative observations at zero");
    }
    Ok(SynthPanel {
        dataset: PanelDataset::new(records, Vocabulary::default())?,
        truth,
        clipped,
    })
}

pub fn perturb_components(truth: &ComponentMatrix, spec: &PerturbSpec, seed: u64) -> Result<ComponentMatrix> {
    spec.validate(truth.n_components())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = truth
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|v| {
                    let z: f64 = rng.sample(StandardNormal);
                    v * spec.bias[i] * (spec.sigma[i] * z).exp()
                })
                .collect()
        })
        .collect();
    Ok(ComponentMatrix::new(truth.names().to_vec(), rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use wrcast_core::window_at;

    #[test]
    fn plain_series_is_baseline() {
        let panel = generate_panel(&SynthSpec::plain(3, 60, 1)).unwrap();
        for (k, r) in panel.dataset.records().iter().enumerate() {
            assert_eq!(r.series.values(), panel.truth[k][0].as_slice());
            assert!(panel.truth[k][1].iter().all(|v| *v == 0.0));
            assert!(panel.truth[k][2].iter().all(|v| *v == 0.0));
        }
        assert_eq!(panel.clipped, 0);
    }

    #[test]
    fn promotion_truth_matches_uplift() {
        let panel = generate_panel(&SynthSpec::default()).unwrap();
        let r = &panel.dataset.records()[0];
        let mut seen = 0;
        for (t, c) in r.covariates.iter().enumerate() {
            let uplift = panel.truth[0][1][t];
            if c.is_promo() {
                let d = c.discount();
                assert_abs_diff_eq!(uplift, panel.truth[0][0][t] * ((1.0 - d).powf(-2.0) - 1.0), epsilon = 1e-9);
                seen += 1;
            } else {
                assert_eq!(uplift, 0.0);
            }
        }
        assert!(seen > 20);
        // 10% off a baseline of 100 at θ = −2
        let plan = [PricePoint {
            price: 9.0,
            reference_price: 10.0,
            promo: Some(0),
        }];
        assert_abs_diff_eq!(promotion_uplift(|_| -2.0, &[100.0], &plan).unwrap()[0], 23.4568, epsilon = 1e-4);
    }

    #[test]
    fn festivals_follow_calendar() {
        let panel = generate_panel(&SynthSpec::default()).unwrap();
        let r = &panel.dataset.records()[1];
        let d = r.series.position(NaiveDate::from_ymd_opt(2022, 6, 18).unwrap()).unwrap();
        assert_eq!(r.covariates[d].festival_level.as_deref(), Some("S"));
        assert_abs_diff_eq!(panel.truth[1][2][d], panel.truth[1][0][d], epsilon = 1e-12);
        assert_eq!(panel.truth[1][2][d + 1], 0.0);
    }

    #[test]
    fn deterministic() {
        let a = generate_panel(&SynthSpec::default()).unwrap();
        let b = generate_panel(&SynthSpec::default()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.truth, b.truth);
        let mut other = SynthSpec::default();
        other.seed = 1;
        assert_ne!(generate_panel(&other).unwrap().dataset, a.dataset);
    }

    #[test]
    fn perturbation_examples() {
        let truth = ComponentMatrix::new(SynthPanel::names(), vec![vec![10.0, 20.0], vec![5.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(perturb_components(&truth, &PerturbSpec::identity(3), 3).unwrap(), truth);
        let spec = PerturbSpec {
            bias: vec![1.2, 0.8, 1.0],
            sigma: vec![0.0; 3],
        };
        let est = perturb_components(&truth, &spec, 3).unwrap();
        assert_eq!(est.row(0), &[10.0 * 1.2, 20.0 * 1.2]);
        assert_eq!(est.row(1), &[5.0 * 0.8, 0.0]);
        assert_eq!(est.row(2), truth.row(2));
        let noisy = perturb_components(&truth, &PerturbSpec::opposite_sign(), 3).unwrap();
        assert_eq!(noisy, perturb_components(&truth, &PerturbSpec::opposite_sign(), 3).unwrap());
        assert!(perturb_components(&truth, &PerturbSpec::identity(2), 3).is_err());
    }

    #[test]
    fn window_estimates_do_not_depend_on_order() {
        let panel = generate_panel(&SynthSpec::plain(2, 80, 0)).unwrap();
        let rec = &panel.dataset.records()[1];
        let w = window_at(rec, 1, 40, 28, 14).unwrap();
        let m = panel.truth_matrix(&w).unwrap();
        assert_eq!(m.row(0), &panel.truth[1][0][41..55]);
        let spec = PerturbSpec::opposite_sign();
        assert_eq!(panel.estimates(&w, &spec, 5).unwrap(), panel.estimates(&w, &spec, 5).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = SynthSpec::default();
        s.promo.discount = (0.0, 0.5);
        assert!(generate_panel(&s).is_err());
        let mut s = SynthSpec::default();
        s.noise = -1.0;
        assert!(s.validate().is_err());
    }
}
