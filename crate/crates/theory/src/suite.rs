//! Full battery of theory checks, each against a brute-force oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constrained::{constrained_optimal_weights, reachable_span};
use crate::error::Result;
use crate::interval::{improvement_interval, lemma_predicate};
use crate::montecarlo::{conjecture_monte_carlo, ConjectureRow, NoiseSpec};
use crate::two::{
    improves, joint_improvement_map_n2, optimal_weight_n2, sign_rule_improves, verdict_n2, GridSpec, Region, RegionCell,
    TheoryInstance, ThresholdCase,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub random_instances: usize,
    pub grid: GridSpec,
    /// True components `l₁ > l₂` range over `1..=max_component`.
    pub max_component: u32,
    pub mc_trials: usize,
    pub mc_n: usize,
    pub mc_alphas: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            random_instances: 10_000,
            grid: GridSpec::default(),
            max_component: 10,
            mc_trials: 5000,
            mc_n: 3,
            mc_alphas: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<Check>,
    pub conjecture: Vec<ConjectureRow>,
    #[serde(skip)]
    pub cells: Vec<RegionCell>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Squared error at `w*` is zero and never above the additive error.
pub fn check_optimal_weight(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut bad, mut strict_fail, mut used) = (0.0f64, 0, 0, 0);
    while used < n {
        let y: f64 = rng.gen_range(-100.0..100.0);
        let a: f64 = rng.gen_range(-50.0..50.0);
        let b: f64 = rng.gen_range(-50.0..50.0);
        if (a - b).abs() < 1e-3 {
            continue;
        }
        used += 1;
        let w = optimal_weight_n2(y, a, b)?;
        let e_star = (y - w * a - (2.0 - w) * b).powi(2);
        let e_one = (y - a - b).powi(2);
        worst = worst.max(e_star);
        if e_star > 1e-9 || e_star > e_one {
            bad += 1;
        }
        if (y - a - b).abs() > 1e-9 && !(e_star < e_one) {
            strict_fail += 1;
        }
    }
    Ok(Check::new(
        "optimal_weight_n2",
        bad == 0 && strict_fail == 0,
        format!("{n} instances, max squared error {worst:.3e}, violations {bad}, non-strict {strict_fail}"),
    ))
}

/// Interval membership against the lemma predicate and the direct test.
pub fn check_intervals(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut used, mut negative, mut mismatch) = (0, 0, 0);
    while used < n {
        let l: f64 = rng.gen_range(-50.0..50.0);
        let lh: f64 = rng.gen_range(-50.0..50.0);
        let w: f64 = rng.gen_range(-4.0..4.0);
        if lh.abs() < 1e-6 || (lh * (w - 1.0) * ((w + 1.0) * lh - 2.0 * l)).abs() < 1e-9 {
            continue;
        }
        used += 1;
        if lh < 0.0 {
            negative += 1;
        }
        let inside = improvement_interval(l, lh)?.contains(w);
        if inside != lemma_predicate(l, lh, w) || inside != improves(l, lh, w) {
            mismatch += 1;
        }
    }
    Ok(Check::new(
        "improvement_interval",
        mismatch == 0,
        format!("{n} triples ({negative} with negative estimate), mismatches {mismatch}"),
    ))
}

/// All region-map checks over every integer pair `l₁ > l₂`.
pub fn check_region_maps(cfg: &SuiteConfig) -> Result<(Vec<Check>, Vec<RegionCell>)> {
    let mut cells = Vec::new();
    for l1 in 1..=cfg.max_component {
        for l2 in 1..l1 {
            cells.extend(joint_improvement_map_n2(l1 as f64, l2 as f64, &cfg.grid)?);
        }
    }
    let live: Vec<&RegionCell> = cells.iter().filter(|c| !c.boundary).collect();

    let (mut rule_total, mut rule_bad) = (0, 0);
    for c in &live {
        let inst = TheoryInstance::exact(vec![c.l1, c.l2], vec![c.l1_hat, c.l2_hat])?;
        let v = verdict_n2(&inst)?;
        for i in 0..2 {
            rule_total += 1;
            if sign_rule_improves(&inst, i)? != v.improved[i] {
                rule_bad += 1;
            }
        }
    }

    let covered: Vec<&&RegionCell> = live.iter().filter(|c| c.case != ThresholdCase::Uncovered).collect();
    let thr_bad = covered
        .iter()
        .filter(|c| c.predicted_both != (c.region == Region::Both))
        .count();

    let mut obs_total = 0;
    let mut obs_bad = 0;
    for c in live.iter().filter(|c| c.region == Region::Both && c.l1_hat > 0.5 * (c.l1 + c.l2)) {
        obs_total += 1;
        let ok = if c.l1_hat < c.l1 {
            c.w_star > 1.0 && c.w_star < 2.0
        } else if c.l1_hat > c.l1 {
            c.w_star > 0.0 && c.w_star < 1.0
        } else {
            c.w_star > 0.0 && c.w_star < 2.0
        };
        if !ok {
            obs_bad += 1;
        }
    }

    let same_sign = live
        .iter()
        .filter(|c| (c.l1_hat - c.l1) * (c.l2_hat - c.l2) > 0.0)
        .collect::<Vec<_>>();
    let same_sign_both = same_sign.iter().filter(|c| c.region == Region::Both).count();

    let boundary = cells.len() - live.len();
    let checks = vec![
        Check::new(
            "sign_rule",
            rule_bad == 0,
            format!("{rule_total} component verdicts over {} cells ({boundary} boundary cells skipped), mismatches {rule_bad}", live.len()),
        ),
        Check::new(
            "corollary_thresholds",
            thr_bad == 0 && !covered.is_empty(),
            format!("{} covered cells, mismatches {thr_bad}", covered.len()),
        ),
        Check::new(
            "observation_w_range",
            obs_bad == 0 && obs_total > 0,
            format!("{obs_total} applicable cells, violations {obs_bad}"),
        ),
        Check::new(
            "same_sign_never_both",
            same_sign_both == 0 && !same_sign.is_empty(),
            format!("{} same-sign cells, {same_sign_both} with both improved", same_sign.len()),
        ),
    ];
    Ok((checks, cells))
}

/// Constrained optimum against a dense grid over the `N = 3` simplex slice.
pub fn check_constrained(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = 1.0;
    let (lo, hi) = (1.0 - alpha / 3.0, 1.0 - alpha / 3.0 + alpha);
    let steps = 1000;
    let mut worst = 0.0f64;
    let mut outside = 0;
    for _ in 0..6 {
        let l: Vec<f64> = (0..3).map(|_| rng.gen_range(1.0..10.0)).collect();
        let (smin, smax) = reachable_span(&l, alpha)?;
        // alternate targets above and below the reachable span
        let y = if outside % 2 == 0 { smax + rng.gen_range(0.5..5.0) } else { smin - rng.gen_range(0.5..5.0) };
        outside += 1;
        let w = constrained_optimal_weights(y, &l, alpha)?;
        let got = (y - w.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>()).powi(2);
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            let w1 = lo + (hi - lo) * a as f64 / steps as f64;
            for b in 0..=steps {
                let w2 = lo + (hi - lo) * b as f64 / steps as f64;
                let w3 = 3.0 - w1 - w2;
                if w3 < lo - 1e-12 || w3 > hi + 1e-12 {
                    continue;
                }
                best = best.min((y - w1 * l[0] - w2 * l[1] - w3 * l[2]).powi(2));
            }
        }
        worst = worst.max(got - best);
    }
    Ok(Check::new(
        "constrained_optimum",
        worst <= 1e-9,
        format!("{outside} out-of-span targets, max excess over grid optimum {worst:.3e}"),
    ))
}

/// Single interior peak. Adjacent estimates may move against the trend by
/// up to two standard errors of their difference; the peak must clear
/// both ends by more than that.
pub fn is_unimodal(p: &[f64], trials: usize) -> bool {
    if p.len() < 3 || trials == 0 {
        return false;
    }
    let tol = |a: f64, b: f64| 2.0 * ((a * (1.0 - a) + b * (1.0 - b)) / trials as f64).sqrt();
    let k = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    let last = p.len() - 1;
    k > 0
        && k < last
        && p[k] - p[0] > tol(p[k], p[0])
        && p[k] - p[last] > tol(p[k], p[last])
        && p[..=k].windows(2).all(|w| w[1] >= w[0] - tol(w[0], w[1]))
        && p[k..].windows(2).all(|w| w[1] <= w[0] + tol(w[0], w[1]))
}

pub fn run_theory_suite(cfg: &SuiteConfig) -> Result<TheoryReport> {
    let mut checks = vec![
        check_optimal_weight(cfg.random_instances, cfg.seed)?,
        check_intervals(cfg.random_instances, cfg.seed.wrapping_add(1))?,
    ];
    let (map_checks, cells) = check_region_maps(cfg)?;
    checks.extend(map_checks);
    checks.push(check_constrained(cfg.seed.wrapping_add(2))?);

    let rows = conjecture_monte_carlo(cfg.mc_n, cfg.mc_trials, &cfg.mc_alphas, &NoiseSpec::unbiased(cfg.mc_n), cfg.seed)?;
    let p: Vec<f64> = rows.iter().map(|r| r.p_all_improve).collect();
    let zero = rows.iter().filter(|r| r.alpha == 0.0).all(|r| r.p_all_improve == 0.0);
    checks.push(Check::new("conjecture_alpha_zero", zero, format!("{p:?}")));
    checks.push(Check::new("conjecture_unimodal", is_unimodal(&p, cfg.mc_trials), format!("{p:?}")));
    let opp = conjecture_monte_carlo(2, cfg.mc_trials, &[1.0], &NoiseSpec::opposite_sign(2, 0.2), cfg.seed)?;
    checks.push(Check::new(
        "conjecture_opposite_sign",
        opp[0].p_all_improve > 0.5,
        format!("P(all improve) at alpha 1 = {:.4}", opp[0].p_all_improve),
    ));
    Ok(TheoryReport {
        checks,
        conjecture: rows,
        cells,
    })
}
