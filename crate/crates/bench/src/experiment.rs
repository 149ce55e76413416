//! α sweep and model comparison over a prepared window set.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wrcast_core::stats::median;
use wrcast_core::electricity::{load_electricity, ClientSelection};
use wrcast_core::{Evaluation, PanelDataset};
use wrcast_nn::{train_model, weight_interval, wr_predict, ModelKind, TrainConfig, WrModel, WrOutput};

use crate::config::BenchConfig;
use crate::data::{dated_split, stl_prepared, Prepared, WindowSet};
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Plain sum of the stage-1 components.
    Additive,
    Wr { alpha: f64 },
    MlpCombiner,
    PureNn,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Additive => "additive",
            ModelSpec::Wr { .. } => "wr",
            ModelSpec::MlpCombiner => "mlp_combiner",
            ModelSpec::PureNn => "pure_nn",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            ModelSpec::Wr { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn parse(s: &str, alpha: f64) -> Result<Self> {
        match s {
            "additive" => Ok(ModelSpec::Additive),
            "wr" => Ok(ModelSpec::Wr { alpha }),
            "mlp_combiner" => Ok(ModelSpec::MlpCombiner),
            "pure_nn" => Ok(ModelSpec::PureNn),
            other => Err(BenchError::Config(format!(
                "unknown model `{other}` (expected additive, wr, mlp_combiner or pure_nn)"
            ))),
        }
    }

    fn trains(&self) -> bool {
        !matches!(self, ModelSpec::Additive)
    }
}

/// Error of the modified versus the preliminary components against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBias {
    pub component: String,
    /// Entries where the preliminary estimate differs from the truth.
    pub count: usize,
    pub mean_abs_error_modified: f64,
    pub mean_abs_error_preliminary: f64,
    /// Share of those entries whose absolute error shrank.
    pub improved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub rmse: Option<f64>,
    pub p50_ql: Option<f64>,
    pub best_epoch: Option<usize>,
    pub seconds: f64,
    pub component_bias: Vec<ComponentBias>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub alpha: Option<f64>,
    /// Reachable weight interval `[1 − α/N, 1 − α/N + α]`.
    pub scope: Option<(f64, f64)>,
    pub runs: usize,
    pub failed: usize,
    pub median_rmse: Option<f64>,
    pub median_p50_ql: Option<f64>,
    pub best_rmse: Option<f64>,
    pub best_p50_ql: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub component_names: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
    pub summary: Vec<SummaryRow>,
    /// α with the lowest median P50_QL among W-R rows.
    pub argmin_alpha: Option<f64>,
    /// Every α = 0 forecast minus its residual equals the additive sum exactly.
    pub alpha_zero_matches_additive: Option<bool>,
    /// Component errors pooled over seeds, per model and α.
    pub component_bias: Vec<(String, Option<f64>, Vec<ComponentBias>)>,
    /// Holdout outputs of the first successful W-R run at the configured α.
    #[serde(skip)]
    pub sample_outputs: Vec<WrOutput>,
}

impl ExperimentResult {
    pub fn row(&self, model: &str, alpha: Option<f64>) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.model == model && r.alpha == alpha)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok).count()
    }
}

struct Accum {
    mod_err: f64,
    pre_err: f64,
    improved: usize,
    count: usize,
}

fn component_bias(names: &[String], outputs: &[WrOutput], set: &WindowSet) -> Vec<ComponentBias> {
    let Some(truth) = &set.truth else {
        return Vec::new();
    };
    let mut acc: Vec<Accum> = names
        .iter()
        .map(|_| Accum {
            mod_err: 0.0,
            pre_err: 0.0,
            improved: 0,
            count: 0,
        })
        .collect();
    for (k, out) in outputs.iter().enumerate() {
        let est = &set.components[k];
        for (i, a) in acc.iter_mut().enumerate() {
            for j in 0..set.eval_len(k) {
                let (l, lh, s) = (truth[k].get(i, j), est.get(i, j), out.modified[i][j]);
                if lh == l {
                    continue;
                }
                a.count += 1;
                a.mod_err += (s - l).abs();
                a.pre_err += (lh - l).abs();
                if (s - l).abs() < (lh - l).abs() {
                    a.improved += 1;
                }
            }
        }
    }
    names
        .iter()
        .zip(acc)
        .map(|(n, a)| {
            let c = a.count.max(1) as f64;
            ComponentBias {
                component: n.clone(),
                count: a.count,
                mean_abs_error_modified: a.mod_err / c,
                mean_abs_error_preliminary: a.pre_err / c,
                improved_fraction: a.improved as f64 / c,
            }
        })
        .collect()
}

/// Share of all non-exact component entries whose error shrank.
pub fn overall_improved_fraction(bias: &[ComponentBias]) -> Option<f64> {
    let total: usize = bias.iter().map(|b| b.count).sum();
    (total > 0).then(|| bias.iter().map(|b| b.improved_fraction * b.count as f64).sum::<f64>() / total as f64)
}

fn pool_bias(cells: &[&Cell]) -> Vec<ComponentBias> {
    let Some(first) = cells.iter().find(|c| !c.component_bias.is_empty()) else {
        return Vec::new();
    };
    first
        .component_bias
        .iter()
        .enumerate()
        .map(|(i, b0)| {
            let parts: Vec<&ComponentBias> = cells.iter().filter_map(|c| c.component_bias.get(i)).collect();
            let count: usize = parts.iter().map(|b| b.count).sum();
            let w = |f: fn(&ComponentBias) -> f64| parts.iter().map(|b| f(b) * b.count as f64).sum::<f64>() / count.max(1) as f64;
            ComponentBias {
                component: b0.component.clone(),
                count,
                mean_abs_error_modified: w(|b| b.mean_abs_error_modified),
                mean_abs_error_preliminary: w(|b| b.mean_abs_error_preliminary),
                improved_fraction: w(|b| b.improved_fraction),
            }
        })
        .collect()
}

/// Scores holdout forecasts over each window's evaluation length.
pub fn evaluate(set: &WindowSet, yhats: &[Vec<f64>]) -> Result<(f64, f64)> {
    let mut ev = Evaluation::new();
    for (k, yhat) in yhats.iter().enumerate() {
        let y = set.windows[k].target()?;
        let n = set.eval_len(k);
        ev.push_window(&yhat[..n], &y[..n]);
    }
    Ok((ev.rmse()?, ev.p50_ql()?))
}

/// Trains one model; the additive model needs no training.
pub fn fit_model(spec: ModelSpec, data: &Prepared, cfg: &TrainConfig) -> Result<Option<WrModel>> {
    let kind = match spec {
        ModelSpec::Additive => return Ok(None),
        ModelSpec::Wr { .. } => ModelKind::WeightedResidual,
        ModelSpec::MlpCombiner => ModelKind::MlpCombiner,
        ModelSpec::PureNn => ModelKind::PureNeural,
    };
    let comps: &[_] = if kind == ModelKind::PureNeural { &[] } else { &data.train.components };
    Ok(Some(train_model(kind, &data.train.windows, comps, spec.alpha().unwrap_or(0.0), cfg)?))
}

/// Holdout outputs of a trained model, or of the additive combination.
pub fn predict_set(model: Option<&WrModel>, set: &WindowSet) -> Result<Vec<WrOutput>> {
    set.windows
        .iter()
        .zip(&set.components)
        .map(|(w, c)| match model {
            None => Ok(WrOutput::new(vec![vec![1.0; c.horizon()]; c.n_components()], c, vec![0.0; c.horizon()])?),
            Some(m) => {
                let comps = (m.kind() != ModelKind::PureNeural).then_some(c);
                Ok(wr_predict(m, w, comps)?)
            }
        })
        .collect()
}

fn run_cell(spec: ModelSpec, data: &Prepared, cfg: &BenchConfig, seed: u64) -> Result<(Cell, Vec<WrOutput>)> {
    let start = Instant::now();
    let model = fit_model(spec, data, &cfg.train_config(seed))?;
    let outputs = predict_set(model.as_ref(), &data.test)?;
    let yhats: Vec<Vec<f64>> = outputs.iter().map(|o| o.yhat.clone()).collect();
    let (rmse, p50) = evaluate(&data.test, &yhats)?;
    let bias = if spec == ModelSpec::PureNn {
        Vec::new()
    } else {
        component_bias(&data.names, &outputs, &data.test)
    };
    Ok((
        Cell {
            model: spec.name().to_string(),
            alpha: spec.alpha(),
            seed,
            ok: true,
            error: None,
            rmse: Some(rmse),
            p50_ql: Some(p50),
            best_epoch: model.map(|m| m.meta.history.best_epoch),
            seconds: start.elapsed().as_secs_f64(),
            component_bias: bias,
        },
        outputs,
    ))
}

/// Weighted part `Σ w·l̂` of every output equals the plain component sum.
fn weighted_part_is_additive(outputs: &[WrOutput], set: &WindowSet) -> bool {
    outputs.iter().zip(&set.components).all(|(o, c)| {
        let add = c.additive();
        o.weights.iter().all(|w| w.iter().all(|v| *v == 1.0))
            && (0..o.horizon()).all(|j| {
                let s: f64 = o.modified.iter().map(|m| m[j]).sum();
                s == add[j] && o.yhat[j] == s + o.residuals[j]
            })
    })
}

/// Runs every `(model, seed)` cell; failures are recorded and skipped.
pub fn run_models(name: &str, data: &Prepared, specs: &[ModelSpec], cfg: &BenchConfig) -> Result<ExperimentResult> {
    let n = data.n_components();
    cfg.check_components(n)?;
    for s in specs {
        if let Some(a) = s.alpha() {
            if !(0.0..=n as f64).contains(&a) {
                return Err(BenchError::Config(format!("alpha {a} outside [0, {n}]")));
            }
        }
    }
    let seeds = cfg.seed_list();
    let tasks: Vec<(ModelSpec, u64)> = specs
        .iter()
        .flat_map(|s| {
            let k = if s.trains() { seeds.len() } else { 1 };
            seeds[..k].iter().map(move |&seed| (*s, seed))
        })
        .collect();
    // cells are independent; collect keeps task order
    let results: Vec<_> = tasks
        .par_iter()
        .map(|&(spec, seed)| {
            log::info!("{name}: {} alpha {:?} seed {seed}", spec.name(), spec.alpha());
            run_cell(spec, data, cfg, seed)
        })
        .collect();
    let mut cells = Vec::new();
    let mut sample_outputs = Vec::new();
    let mut alpha_zero: Option<bool> = None;
    for (&(spec, seed), res) in tasks.iter().zip(results) {
        match res {
            Ok((cell, outputs)) => {
                if spec.alpha() == Some(0.0) {
                    let ok = weighted_part_is_additive(&outputs, &data.test);
                    alpha_zero = Some(alpha_zero.unwrap_or(true) && ok);
                }
                if sample_outputs.is_empty() && spec.alpha() == Some(cfg.alpha) {
                    sample_outputs = outputs;
                }
                cells.push(cell);
            }
            Err(e) => {
                log::warn!("{name}: {} seed {seed} failed: {e}", spec.name());
                cells.push(Cell {
                    model: spec.name().to_string(),
                    alpha: spec.alpha(),
                    seed,
                    ok: false,
                    error: Some(e.to_string()),
                    rmse: None,
                    p50_ql: None,
                    best_epoch: None,
                    seconds: 0.0,
                    component_bias: Vec::new(),
                });
            }
        }
    }
    let summary = summarize(&cells, specs, n);
    let argmin_alpha = summary
        .iter()
        .filter(|r| r.model == "wr")
        .filter_map(|r| Some((r.alpha?, r.median_p50_ql?)))
        .fold(None, |best: Option<(f64, f64)>, (a, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((a, v)),
        })
        .map(|(a, _)| a);
    let component_bias = specs
        .iter()
        .map(|s| {
            let mine: Vec<&Cell> = cells
                .iter()
                .filter(|c| c.ok && c.model == s.name() && c.alpha == s.alpha())
                .collect();
            (s.name().to_string(), s.alpha(), pool_bias(&mine))
        })
        .filter(|(_, _, b)| !b.is_empty())
        .collect();
    Ok(ExperimentResult {
        name: name.to_string(),
        component_names: data.names.clone(),
        seeds,
        cells,
        summary,
        argmin_alpha,
        alpha_zero_matches_additive: alpha_zero,
        component_bias,
        sample_outputs,
    })
}

fn summarize(cells: &[Cell], specs: &[ModelSpec], n: usize) -> Vec<SummaryRow> {
    specs
        .iter()
        .map(|s| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.model == s.name() && c.alpha == s.alpha()).collect();
            let ok: Vec<&&Cell> = mine.iter().filter(|c| c.ok).collect();
            let rmse: Vec<f64> = ok.iter().filter_map(|c| c.rmse).collect();
            let p50: Vec<f64> = ok.iter().filter_map(|c| c.p50_ql).collect();
            let min = |v: &[f64]| v.iter().copied().reduce(f64::min);
            SummaryRow {
                model: s.name().to_string(),
                alpha: s.alpha(),
                scope: s.alpha().map(|a| weight_interval(a, n)),
                runs: mine.len(),
                failed: mine.len() - ok.len(),
                median_rmse: (!rmse.is_empty()).then(|| median(&rmse)),
                median_p50_ql: (!p50.is_empty()).then(|| median(&p50)),
                best_rmse: min(&rmse),
                best_p50_ql: min(&p50),
            }
        })
        .collect()
}

/// W-R over the configured α grid, next to the additive baseline.
pub fn run_alpha_sweep(data: &Prepared, cfg: &BenchConfig) -> Result<ExperimentResult> {
    let mut specs = vec![ModelSpec::Additive];
    specs.extend(cfg.alphas.iter().map(|&alpha| ModelSpec::Wr { alpha }));
    run_models("alpha_sweep", data, &specs, cfg)
}

/// W-R at the configured α against the additive, plain-combiner and
/// component-free models.
pub fn run_model_comparison(data: &Prepared, cfg: &BenchConfig) -> Result<ExperimentResult> {
    let specs = [
        ModelSpec::Wr { alpha: cfg.alpha },
        ModelSpec::Additive,
        ModelSpec::MlpCombiner,
        ModelSpec::PureNn,
    ];
    run_models("model_comparison", data, &specs, cfg)
}

/// STL components of the electricity panel, scored on the configured
/// calendar anchors.
pub fn electricity_prepared(ds: &PanelDataset, cfg: &BenchConfig) -> Result<Prepared> {
    let split = dated_split(ds, cfg, &cfg.anchors, cfg.seed)?;
    stl_prepared(&split, &cfg.stl_config()?)
}

/// W-R against the STL sum and the component-free network on daily loads.
pub fn run_public_electricity(path: &Path, cfg: &BenchConfig) -> Result<(Prepared, ExperimentResult)> {
    let ds = load_electricity(path, &ClientSelection::First(cfg.clients))?;
    let data = electricity_prepared(&ds, cfg)?;
    let specs = [ModelSpec::Wr { alpha: cfg.alpha }, ModelSpec::Additive, ModelSpec::PureNn];
    let res = run_models("public_electricity", &data, &specs, cfg)?;
    Ok((data, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{holdout_split, synthetic_prepared};
    use crate::synth::{generate_panel, PerturbSpec};

    fn tiny(perturb: PerturbSpec) -> (Prepared, BenchConfig) {
        let cfg = BenchConfig {
            n_series: 6,
            length: 150,
            samples_per_series: 6,
            test_windows: 2,
            seeds: 2,
            epochs: 3,
            alphas: vec![0.0, 1.0],
            ..BenchConfig::default()
        };
        let mut spec = cfg.synth_spec(4);
        spec.perturbation = perturb.clone();
        let panel = generate_panel(&spec).unwrap();
        let split = holdout_split(&panel.dataset, &cfg, 0).unwrap();
        (synthetic_prepared(&panel, &split, &perturb, 1).unwrap(), cfg)
    }

    #[test]
    fn perfect_components_favour_additive() {
        let (data, cfg) = tiny(PerturbSpec::identity(3));
        let res = run_models("t", &data, &[ModelSpec::Additive], &cfg).unwrap();
        let row = res.row("additive", None).unwrap();
        assert_eq!(row.runs, 1);
        // exact components leave only the observation noise
        let p50 = row.median_p50_ql.unwrap();
        assert!(p50 < 0.02, "{p50}");
        assert!(res.component_bias.iter().all(|(_, _, b)| b.iter().all(|c| c.count == 0)));
        assert_eq!(overall_improved_fraction(&res.component_bias[0].2), None);
    }

    #[test]
    fn sweep_shape_and_alpha_zero() {
        let (data, cfg) = tiny(PerturbSpec::opposite_sign());
        let res = run_alpha_sweep(&data, &cfg).unwrap();
        assert_eq!(res.summary.len(), 3);
        assert_eq!(res.cells.len(), 1 + 2 * 2);
        assert_eq!(res.failures(), 0);
        assert_eq!(res.alpha_zero_matches_additive, Some(true));
        let scope = res.row("wr", Some(1.0)).unwrap().scope.unwrap();
        assert!((scope.0 - 2.0 / 3.0).abs() < 1e-12 && (scope.1 - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(res.row("wr", Some(0.0)).unwrap().scope, Some((1.0, 1.0)));
        assert!(res.argmin_alpha.is_some());
        assert_eq!(res.sample_outputs.len(), data.test.len());
        let again = run_alpha_sweep(&data, &cfg).unwrap();
        let strip = |r: &ExperimentResult| r.cells.iter().map(|c| (c.p50_ql, c.rmse)).collect::<Vec<_>>();
        assert_eq!(strip(&res), strip(&again));
    }

    #[test]
    fn failures_are_recorded() {
        let (data, mut cfg) = tiny(PerturbSpec::identity(3));
        cfg.alphas = vec![5.0];
        assert!(matches!(run_alpha_sweep(&data, &cfg), Err(BenchError::Config(_))));
        let mut broken = data.clone();
        broken.train.components.pop();
        cfg.alphas = vec![1.0];
        let res = run_alpha_sweep(&broken, &cfg).unwrap();
        assert_eq!(res.failures(), 2);
        assert!(res.row("wr", Some(1.0)).unwrap().median_p50_ql.is_none());
        assert!(res.row("additive", None).unwrap().median_p50_ql.is_some());
    }

    #[test]
    fn comparison_covers_four_models() {
        let (data, mut cfg) = tiny(PerturbSpec::opposite_sign());
        cfg.seeds = 1;
        let res = run_model_comparison(&data, &cfg).unwrap();
        let models: Vec<&str> = res.summary.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(models, ["wr", "additive", "mlp_combiner", "pure_nn"]);
        assert_eq!(res.failures(), 0);
    }

    #[test]
    fn electricity_pipeline_on_a_small_file() {
        use std::fmt::Write as _;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("LD.txt");
        let mut text = String::from("\"\";\"MT_001\";\"MT_002\"\n");
        let start = chrono::NaiveDate::from_ymd_opt(2013, 11, 1).unwrap();
        for d in 0..320 {
            let day = start + chrono::Duration::days(d);
            let wk = (2.0 * std::f64::consts::PI * d as f64 / 7.0).sin();
            let a = 100.0 + 0.05 * d as f64 + 10.0 * wk;
            let b = 50.0 + 5.0 * wk;
            writeln!(text, "{} 12:00:00;{};{}", day, format!("{a:.3}").replace('.', ","), format!("{b:.3}").replace('.', ",")).unwrap();
        }
        std::fs::write(&path, text).unwrap();
        let cfg = BenchConfig {
            seeds: 1,
            epochs: 2,
            clients: 2,
            samples_per_series: 8,
            ..BenchConfig::public()
        };
        let (data, res) = run_public_electricity(&path, &cfg).unwrap();
        assert_eq!(data.names, ["trend", "seasonal"]);
        assert_eq!(data.test.len(), 2 * 3);
        // June, July and August are scored over 30, 31 and 31 days
        assert_eq!((0..3).map(|k| data.test.eval_len(k)).collect::<Vec<_>>(), [30, 31, 31]);
        assert_eq!(res.failures(), 0);
        assert_eq!(res.summary.len(), 3);
        let missing = run_public_electricity(&dir.path().join("nope.txt"), &cfg).unwrap_err();
        assert!(missing.to_string().contains("UCI"), "{missing}");
    }
}
