//! Weighted recombination of preliminary components with a learned
//! per-horizon residual.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wrcast_core::{ComponentMatrix, ForecastWindow};

use crate::error::{NnError, Result};
use crate::features::{window_inputs, FUTURE_BASE_FEATURES, HISTORY_FEATURES};
use crate::network::{NetInput, Network, NetworkConfig};
use crate::optim::Adam;
use crate::tape::{softmax_in_place, Tape, Tensor, Var};

/// Training quantile.
pub const QUANTILE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    alpha: f64,
}

impl AlphaConfig {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(NnError::config(format!("need at least 2 components, got {n}")));
        }
        if !(0.0..=n as f64).contains(&alpha) {
            return Err(NnError::config(format!("alpha {alpha} outside [0, {n}]")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Closed range `[1 − α/N, 1 − α/N + α]` reachable by each weight.
pub fn weight_interval(alpha: f64, n: usize) -> (f64, f64) {
    let lo = 1.0 - alpha / n as f64;
    (lo, lo + alpha)
}

/// `w_i = α·softmax(logits)_i + 1 − α/N`.
pub fn normalize_weights(logits: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = logits.len();
    AlphaConfig::new(alpha, n)?;
    if logits.iter().any(|v| v.is_nan()) {
        return Err(NnError::config("logits contain NaN"));
    }
    let mut s = logits.to_vec();
    softmax_in_place(&mut s);
    let shift = 1.0 - alpha / n as f64;
    Ok(s.into_iter().map(|v| alpha * v + shift).collect())
}

/// `ŷ_j = Σ_i w_ij·l̂_ij + ε_j`, summed in component order.
pub fn combine(weights: &[Vec<f64>], components: &ComponentMatrix, residuals: &[f64]) -> Result<Vec<f64>> {
    let (n, h) = (components.n_components(), components.horizon());
    if weights.len() != n || weights.iter().any(|w| w.len() != h) || residuals.len() != h {
        return Err(NnError::shape(
            "combine",
            format!("weights {}x?, components {n}x{h}, residuals {}", weights.len(), residuals.len()),
        ));
    }
    Ok((0..h)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += weights[i][j] * components.get(i, j);
            }
            acc + residuals[j]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrOutput {
    pub names: Vec<String>,
    /// `N×H`.
    pub weights: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// `ŝ = w·l̂`, `N×H`.
    pub modified: Vec<Vec<f64>>,
    pub yhat: Vec<f64>,
}

impl WrOutput {
    pub fn new(weights: Vec<Vec<f64>>, components: &ComponentMatrix, residuals: Vec<f64>) -> Result<Self> {
        let yhat = combine(&weights, components, &residuals)?;
        let modified = weights
            .iter()
            .zip(components.rows())
            .map(|(w, l)| w.iter().zip(l).map(|(a, b)| a * b).collect())
            .collect();
        Ok(Self {
            names: components.names().to_vec(),
            weights,
            residuals,
            modified,
            yhat,
        })
    }

    pub fn horizon(&self) -> usize {
        self.yhat.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Encoder network, constrained weights and residual.
    WeightedResidual,
    /// Plain MLP head emitting unconstrained weights `1 + raw` and a
    /// residual, without the encoder contexts.
    MlpCombiner,
    /// Encoder network predicting the target directly, no components.
    PureNeural,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::WeightedResidual => "wr",
            ModelKind::MlpCombiner => "mlp_combiner",
            ModelKind::PureNeural => "pure_nn",
        }
    }

    fn uses_components(self) -> bool {
        !matches!(self, ModelKind::PureNeural)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Share of windows held out to pick the best epoch; 0 selects on the
    /// training loss.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NnError::config("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(NnError::config("validation fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch loss per epoch (epoch 1 first).
    pub train_loss: Vec<f64>,
    /// Selection loss before training and after each epoch.
    pub selection_loss: Vec<f64>,
    /// Epoch whose parameters were kept; 0 means the initial network.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub alpha: f64,
    pub component_names: Vec<String>,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrModel {
    pub meta: ModelMeta,
    pub network: Network,
}

/// A window prepared for the network.
#[derive(Debug, Clone)]
pub struct Example {
    input: NetInput,
    scale: f64,
    components: Option<ComponentMatrix>,
    /// `[H, N]` on the data scale.
    raw_components: Option<Tensor>,
    target: Option<Vec<f64>>,
}

impl Example {
    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }
}

impl WrModel {
    /// Untrained model for windows of shape `(history_len, horizon)`.
    pub fn new(kind: ModelKind, component_names: Vec<String>, alpha: f64, history_len: usize, horizon: usize, seed: u64) -> Result<Self> {
        let n = component_names.len();
        let (outputs, future) = match kind {
            ModelKind::PureNeural => {
                if n != 0 {
                    return Err(NnError::config("the pure network takes no components"));
                }
                (1, FUTURE_BASE_FEATURES)
            }
            _ => {
                AlphaConfig::new(alpha, n)?;
                (n + 1, FUTURE_BASE_FEATURES + n)
            }
        };
        let mut cfg = NetworkConfig::new(history_len, horizon, HISTORY_FEATURES, future, outputs);
        if kind == ModelKind::MlpCombiner {
            cfg = cfg.plain();
        }
        Ok(Self {
            meta: ModelMeta {
                kind,
                alpha,
                component_names,
                history: TrainHistory::default(),
            },
            network: Network::new(cfg, seed)?,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.meta.kind
    }

    pub fn alpha(&self) -> f64 {
        self.meta.alpha
    }

    pub fn n_components(&self) -> usize {
        self.meta.component_names.len()
    }

    pub fn prepare(&self, window: &ForecastWindow, components: Option<&ComponentMatrix>) -> Result<Example> {
        let comps = if self.kind().uses_components() {
            let c = components.ok_or_else(|| NnError::config("components required for this model"))?;
            if c.names() != self.meta.component_names.as_slice() {
                return Err(NnError::config(format!(
                    "component names {:?} do not match model {:?}",
                    c.names(),
                    self.meta.component_names
                )));
            }
            Some(c)
        } else {
            None
        };
        let (input, scale) = window_inputs(window, comps)?;
        let raw_components = comps.map(|c| {
            let (n, h) = (c.n_components(), c.horizon());
            let data = (0..h).flat_map(|j| (0..n).map(move |i| c.get(i, j))).collect();
            Tensor { rows: h, cols: n, data }
        });
        Ok(Example {
            input,
            scale,
            components: comps.cloned(),
            raw_components,
            target: window.target.clone(),
        })
    }

    /// Final prediction `ŷ` on the data scale as a `[H, 1]` node.
    fn graph(&self, tape: &mut Tape, vars: &[Var], ex: &Example) -> Result<Var> {
        let out = self.network.forward(tape, vars, &ex.input)?;
        let scaled = match self.kind() {
            ModelKind::PureNeural => out,
            kind => {
                let n = self.n_components();
                let logits = tape.slice_cols(out, 0, n)?;
                let w = if kind == ModelKind::WeightedResidual {
                    let s = tape.softmax_rows(logits)?;
                    tape.affine(s, self.alpha(), 1.0 - self.alpha() / n as f64)?
                } else {
                    tape.affine(logits, 1.0, 1.0)?
                };
                let l = tape.leaf(ex.raw_components.clone().expect("prepared with components"));
                let wl = tape.mul(w, l)?;
                let sum = tape.row_sum(wl)?;
                let eps = tape.slice_cols(out, n, n + 1)?;
                let eps = tape.affine(eps, ex.scale, 0.0)?;
                return tape.add(sum, eps);
            }
        };
        tape.affine(scaled, ex.scale, 0.0)
    }

    /// Mean p50 loss over `batch`, recorded on `tape`.
    fn batch_loss(&self, tape: &mut Tape, vars: &[Var], batch: &[&Example]) -> Result<Var> {
        let mut total: Option<Var> = None;
        for ex in batch {
            let target = ex
                .target
                .as_deref()
                .ok_or_else(|| NnError::config("training window without target"))?;
            let yhat = self.graph(tape, vars, ex)?;
            let l = tape.quantile_loss(yhat, target, QUANTILE)?;
            total = Some(match total {
                None => l,
                Some(t) => tape.add(t, l)?,
            });
        }
        let total = total.ok_or_else(|| NnError::config("empty batch"))?;
        tape.affine(total, 1.0 / batch.len() as f64, 0.0)
    }

    pub fn loss(&self, batch: &[&Example]) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.network.bind(&mut tape);
        let l = self.batch_loss(&mut tape, &vars, batch)?;
        Ok(tape.value(l).data[0])
    }

    /// Loss on `batch` and its gradient for every network parameter.
    pub fn loss_and_gradients(&self, batch: &[&Example]) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = self.network.bind(&mut tape);
        let l = self.batch_loss(&mut tape, &vars, batch)?;
        tape.backward(l)?;
        let grads = vars.iter().map(|v| tape.grad(*v)).collect::<Result<Vec<_>>>()?;
        Ok((tape.value(l).data[0], grads))
    }

    /// One optimizer update on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, opt: &mut Adam, batch: &[&Example]) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.network.bind(&mut tape);
        let l = self.batch_loss(&mut tape, &vars, batch)?;
        let value = tape.value(l).data[0];
        if !value.is_finite() {
            return Err(NnError::Training {
                epoch: 0,
                step: opt.steps() as usize,
                message: format!("loss is {value}"),
            });
        }
        tape.backward(l)?;
        let grads = vars.iter().map(|v| tape.grad(*v)).collect::<Result<Vec<_>>>()?;
        if let Some(k) = grads.iter().position(|g| g.data.iter().any(|v| !v.is_finite())) {
            return Err(NnError::Training {
                epoch: 0,
                step: opt.steps() as usize,
                message: format!("non-finite gradient in {}", self.network.names[k]),
            });
        }
        opt.update(&mut self.network.params, &grads)?;
        Ok(value)
    }

    pub fn predict_example(&self, ex: &Example) -> Result<WrOutput> {
        let out = self.network.predict(&ex.input)?;
        let h = out.rows;
        match self.kind() {
            ModelKind::PureNeural => {
                let residuals: Vec<f64> = (0..h).map(|j| ex.scale * out.get(j, 0)).collect();
                Ok(WrOutput {
                    names: Vec::new(),
                    weights: Vec::new(),
                    modified: Vec::new(),
                    yhat: residuals.clone(),
                    residuals,
                })
            }
            kind => {
                let n = self.n_components();
                let mut weights = vec![vec![0.0; h]; n];
                for j in 0..h {
                    let row = &out.row(j)[..n];
                    let w = if kind == ModelKind::WeightedResidual {
                        normalize_weights(row, self.alpha())?
                    } else {
                        row.iter().map(|v| 1.0 + v).collect()
                    };
                    for i in 0..n {
                        weights[i][j] = w[i];
                    }
                }
                let residuals = (0..h).map(|j| ex.scale * out.get(j, n)).collect();
                WrOutput::new(weights, ex.components.as_ref().expect("prepared with components"), residuals)
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.network.save_with(path, &self.meta)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (network, meta): (Network, ModelMeta) = Network::load_with(path)?;
        let expect = match meta.kind {
            ModelKind::PureNeural => 1,
            _ => meta.component_names.len() + 1,
        };
        if network.config.outputs != expect {
            return Err(NnError::Checkpoint(format!(
                "head width {} does not match {} components",
                network.config.outputs,
                meta.component_names.len()
            )));
        }
        Ok(Self { meta, network })
    }
}

fn check_shapes(windows: &[ForecastWindow], components: &[ComponentMatrix], kind: ModelKind) -> Result<(usize, usize, Vec<String>)> {
    let first = windows.first().ok_or_else(|| NnError::config("no training windows"))?;
    let (t, h) = (first.history_len(), first.horizon());
    if windows.iter().any(|w| w.history_len() != t || w.horizon() != h) {
        return Err(NnError::config("windows differ in history length or horizon"));
    }
    if !kind.uses_components() {
        return Ok((t, h, Vec::new()));
    }
    if components.len() != windows.len() {
        return Err(NnError::config(format!(
            "{} windows but {} component matrices",
            windows.len(),
            components.len()
        )));
    }
    let names = components[0].names().to_vec();
    if let Some(k) = components.iter().position(|c| c.names() != names.as_slice()) {
        return Err(NnError::config(format!(
            "window {k} has components {:?}, expected {:?}",
            components[k].names(),
            names
        )));
    }
    Ok((t, h, names))
}

/// Trains a stage-2 model on windows with precomputed components. The
/// returned parameters are those of the epoch with the lowest selection
/// loss, the untrained network included.
pub fn train_model(
    kind: ModelKind,
    windows: &[ForecastWindow],
    components: &[ComponentMatrix],
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<WrModel> {
    cfg.validate()?;
    let (t, h, names) = check_shapes(windows, components, kind)?;
    let mut model = WrModel::new(kind, names, alpha, t, h, cfg.seed)?;
    let examples = windows
        .iter()
        .enumerate()
        .map(|(k, w)| model.prepare(w, components.get(k)))
        .collect::<Result<Vec<_>>>()?;
    if examples.iter().any(|e| e.target.is_none()) {
        return Err(NnError::config("training windows need targets"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let n_valid = if cfg.validation_fraction > 0.0 && examples.len() >= 10 {
        ((examples.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, examples.len() - 1)
    } else {
        0
    };
    order.shuffle(&mut rng);
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let mut train_idx = train_idx.to_vec();
    let selection: Vec<&Example> = if n_valid > 0 {
        valid_idx.iter().map(|&k| &examples[k]).collect()
    } else {
        train_idx.iter().map(|&k| &examples[k]).collect()
    };

    let mut opt = Adam::new(cfg.learning_rate)?;
    let mut best = model.loss(&selection)?;
    let mut best_params = model.network.params.clone();
    let mut history = TrainHistory {
        selection_loss: vec![best],
        ..Default::default()
    };
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for (step, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&k| &examples[k]).collect();
            let l = model.train_step(&mut opt, &batch).map_err(|e| match e {
                NnError::Training { message, .. } => NnError::Training { epoch, step, message },
                other => other,
            })?;
            sum += l;
            batches += 1;
        }
        history.train_loss.push(sum / batches as f64);
        let sel = model.loss(&selection)?;
        if !sel.is_finite() {
            return Err(NnError::Training {
                epoch,
                step: batches,
                message: format!("selection loss is {sel}"),
            });
        }
        history.selection_loss.push(sel);
        if sel < best {
            best = sel;
            best_params = model.network.params.clone();
            history.best_epoch = epoch;
        }
        log::debug!("{} epoch {epoch}: train {:.6} select {sel:.6}", kind.name(), sum / batches as f64);
    }
    model.network.params = best_params;
    model.meta.history = history;
    Ok(model)
}

/// Trains the weighted-recombination model.
pub fn wr_train(windows: &[ForecastWindow], components: &[ComponentMatrix], alpha: f64, cfg: &TrainConfig) -> Result<WrModel> {
    train_model(ModelKind::WeightedResidual, windows, components, alpha, cfg)
}

pub fn wr_predict(model: &WrModel, window: &ForecastWindow, components: Option<&ComponentMatrix>) -> Result<WrOutput> {
    let ex = model.prepare(window, components)?;
    model.predict_example(&ex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;
    use wrcast_core::window::window_at;
    use wrcast_core::{SeriesRecord, TimeSeries};

    #[test]
    fn weight_examples() {
        assert_eq!(normalize_weights(&[0.3, 0.3, 0.3], 1.7).unwrap(), vec![1.0; 3]);
        assert_eq!(normalize_weights(&[5.0, -2.0, 1.0], 0.0).unwrap(), vec![1.0; 3]);
        let w = normalize_weights(&[800.0, 0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-12);
        let (lo, hi) = weight_interval(1.0, 3);
        assert_eq!((format!("{lo:.2}"), format!("{hi:.2}")), ("0.67".into(), "1.67".into()));
        assert!(normalize_weights(&[0.0, 0.0], 2.5).is_err());
        assert!(normalize_weights(&[0.0], 0.5).is_err());
    }

    #[test]
    fn combine_examples() {
        let c = ComponentMatrix::new(vec!["a".into(), "b".into()], vec![vec![6.0], vec![2.0]]).unwrap();
        assert_eq!(combine(&[vec![1.5], vec![0.5]], &c, &[0.0]).unwrap(), vec![10.0]);
        assert_eq!(combine(&[vec![1.0], vec![1.0]], &c, &[0.0]).unwrap(), vec![8.0]);
        let z = ComponentMatrix::new(vec!["a".into(), "b".into()], vec![vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(combine(&[vec![1.0], vec![1.0]], &z, &[3.5]).unwrap(), vec![3.5]);
        assert!(combine(&[vec![1.0]], &c, &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn weights_sum_and_interval(
            logits in prop::collection::vec(-30.0f64..30.0, 2..9),
            frac in 0.0f64..=1.0,
        ) {
            let n = logits.len();
            let alpha = frac * n as f64;
            let w = normalize_weights(&logits, alpha).unwrap();
            let (lo, hi) = weight_interval(alpha, n);
            prop_assert!((w.iter().sum::<f64>() - n as f64).abs() < 1e-9);
            for v in &w {
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }

        #[test]
        fn interval_containment(a1 in 0.0f64..3.0, d in 0.0f64..3.0) {
            let (l1, h1) = weight_interval(a1, 6);
            let (l2, h2) = weight_interval((a1 + d).min(6.0), 6);
            prop_assert!(l2 <= l1 && h1 <= h2);
        }

        #[test]
        fn output_identity(ws in prop::collection::vec(0.0f64..2.0, 6), ls in prop::collection::vec(-50.0f64..50.0, 6), e in prop::collection::vec(-5.0f64..5.0, 2)) {
            let c = ComponentMatrix::new(vec!["a".into(), "b".into(), "c".into()], ls.chunks(2).map(|r| r.to_vec()).collect()).unwrap();
            let w: Vec<Vec<f64>> = ws.chunks(2).map(|r| r.to_vec()).collect();
            let o = WrOutput::new(w, &c, e.clone()).unwrap();
            for j in 0..2 {
                let mut acc = 0.0;
                for i in 0..3 {
                    acc += o.modified[i][j];
                }
                prop_assert_eq!(o.yhat[j], acc + e[j]);
            }
        }
    }

    fn toy(n_series: usize, len: usize, seed: u64) -> Vec<SeriesRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        (0..n_series)
            .map(|s| {
                let level = 20.0 + 10.0 * s as f64;
                let v = (0..len)
                    .map(|t| level + 5.0 * ((t % 7) as f64 - 3.0) + rng.gen_range(-1.0..1.0))
                    .collect();
                SeriesRecord::bare(TimeSeries::daily(format!("s{s}"), start, v).unwrap())
            })
            .collect()
    }

    /// Windows plus components split from the truth: `a = 1.2·level`,
    /// `b = target − level`.
    fn biased(recs: &[SeriesRecord], t: usize, h: usize) -> (Vec<ForecastWindow>, Vec<ComponentMatrix>) {
        let mut ws = Vec::new();
        let mut cs = Vec::new();
        for (si, r) in recs.iter().enumerate() {
            for anchor in (t - 1..r.len() - h).step_by(5) {
                let w = window_at(r, si, anchor, t, h).unwrap();
                let y = w.target.clone().unwrap();
                let level = 20.0 + 10.0 * si as f64;
                let a: Vec<f64> = y.iter().map(|_| 1.2 * level).collect();
                let b: Vec<f64> = y.iter().map(|v| v - level).collect();
                cs.push(ComponentMatrix::new(vec!["base".into(), "season".into()], vec![a, b]).unwrap());
                ws.push(w);
            }
        }
        (ws, cs)
    }

    #[test]
    fn untrained_model_is_additive() {
        let recs = toy(2, 60, 1);
        let (ws, cs) = biased(&recs, 14, 5);
        let m = WrModel::new(ModelKind::WeightedResidual, vec!["base".into(), "season".into()], 1.0, 14, 5, 3).unwrap();
        let o = wr_predict(&m, &ws[0], Some(&cs[0])).unwrap();
        assert_eq!(o.weights, vec![vec![1.0; 5]; 2]);
        assert_eq!(o.yhat, cs[0].additive());
        assert!(o.residuals.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn name_mismatch_rejected() {
        let recs = toy(1, 40, 1);
        let (ws, cs) = biased(&recs, 14, 5);
        let m = WrModel::new(ModelKind::WeightedResidual, vec!["x".into(), "season".into()], 1.0, 14, 5, 3).unwrap();
        assert!(matches!(wr_predict(&m, &ws[0], Some(&cs[0])), Err(NnError::Config(_))));
        let mut bad = cs.clone();
        bad[1] = ComponentMatrix::new(vec!["a".into(), "b".into(), "c".into()], vec![vec![1.0; 5]; 3]).unwrap();
        assert!(matches!(wr_train(&ws, &bad, 1.0, &TrainConfig::default()), Err(NnError::Config(_))));
        assert!(wr_train(&ws, &cs, 2.5, &TrainConfig::default()).is_err());
    }

    #[test]
    fn perfect_components_stay_perfect() {
        let recs = toy(2, 60, 2);
        let (ws, _) = biased(&recs, 14, 5);
        let cs: Vec<ComponentMatrix> = ws
            .iter()
            .map(|w| {
                let y = w.target.clone().unwrap();
                let half: Vec<f64> = y.iter().map(|v| v / 2.0).collect();
                ComponentMatrix::new(vec!["a".into(), "b".into()], vec![half.clone(), half]).unwrap()
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..Default::default()
        };
        let m = wr_train(&ws, &cs, 1.0, &cfg).unwrap();
        assert_eq!(m.meta.history.selection_loss[0], 0.0);
        assert!(m.meta.history.selection_loss.iter().all(|l| *l >= 0.0));
        let refs: Vec<Example> = ws.iter().zip(&cs).map(|(w, c)| m.prepare(w, Some(c)).unwrap()).collect();
        let all: Vec<&Example> = refs.iter().collect();
        assert_eq!(m.loss(&all).unwrap(), 0.0);
    }

    #[test]
    fn zero_rate_step_keeps_parameters() {
        let recs = toy(2, 60, 3);
        let (ws, cs) = biased(&recs, 14, 5);
        let mut m = WrModel::new(ModelKind::WeightedResidual, vec!["base".into(), "season".into()], 1.0, 14, 5, 4).unwrap();
        let ex: Vec<Example> = ws.iter().zip(&cs).map(|(w, c)| m.prepare(w, Some(c)).unwrap()).collect();
        let batch: Vec<&Example> = ex.iter().take(4).collect();
        let before = m.network.clone();
        let mut opt = Adam::new(0.0).unwrap();
        let l0 = m.train_step(&mut opt, &batch).unwrap();
        assert_eq!(m.network, before);
        assert_eq!(m.loss(&batch).unwrap(), l0);
    }

    #[test]
    fn overfits_one_batch() {
        let recs = toy(2, 60, 4);
        let (ws, cs) = biased(&recs, 14, 5);
        let mut m = WrModel::new(ModelKind::WeightedResidual, vec!["base".into(), "season".into()], 1.0, 14, 5, 5).unwrap();
        let ex: Vec<Example> = ws.iter().zip(&cs).map(|(w, c)| m.prepare(w, Some(c)).unwrap()).collect();
        let batch: Vec<&Example> = ex.iter().take(8).collect();
        let mut opt = Adam::new(1e-2).unwrap();
        let l0 = m.train_step(&mut opt, &batch).unwrap();
        for _ in 0..199 {
            m.train_step(&mut opt, &batch).unwrap();
        }
        let l1 = m.loss(&batch).unwrap();
        assert!(l1 <= 0.5 * l0, "{l0} -> {l1}");
    }

    #[test]
    fn deterministic_training() {
        let recs = toy(3, 60, 5);
        let (ws, cs) = biased(&recs, 14, 5);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let a = wr_train(&ws, &cs, 1.0, &cfg).unwrap();
        let b = wr_train(&ws, &cs, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |m: &WrModel| m.meta.history.train_loss.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn learns_to_shrink_inflated_baseline() {
        let recs = toy(3, 120, 6);
        let (ws, cs) = biased(&recs, 14, 5);
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 8,
            learning_rate: 3e-3,
            seed: 1,
            validation_fraction: 0.0,
        };
        let m = wr_train(&ws, &cs, 1.0, &cfg).unwrap();
        let mut below = 0;
        let mut total = 0;
        let mut err_wr = 0.0;
        let mut err_add = 0.0;
        for (w, c) in ws.iter().zip(&cs) {
            let o = wr_predict(&m, w, Some(c)).unwrap();
            let y = w.target.as_ref().unwrap();
            for j in 0..5 {
                total += 1;
                if o.weights[0][j] < 1.0 {
                    below += 1;
                }
                for i in 0..2 {
                    assert!(o.weights[i][j] >= 0.5 - 1e-12 && o.weights[i][j] <= 1.5 + 1e-12);
                }
                err_wr += (o.yhat[j] - y[j]).abs();
                err_add += (c.additive()[j] - y[j]).abs();
            }
        }
        assert!(err_wr < err_add, "{err_wr} vs {err_add}");
        assert!(below as f64 / total as f64 > 0.9, "{below}/{total}");
    }

    #[test]
    fn pure_and_mlp_variants_train() {
        let recs = toy(2, 80, 7);
        let (ws, cs) = biased(&recs, 14, 5);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            ..Default::default()
        };
        let p = train_model(ModelKind::PureNeural, &ws, &[], 0.0, &cfg).unwrap();
        let o = wr_predict(&p, &ws[0], None).unwrap();
        assert_eq!(o.yhat.len(), 5);
        assert!(o.weights.is_empty());
        let m = train_model(ModelKind::MlpCombiner, &ws, &cs, 1.0, &cfg).unwrap();
        assert_eq!(wr_predict(&m, &ws[0], Some(&cs[0])).unwrap().weights.len(), 2);
    }

    #[test]
    fn model_round_trip() {
        let m = WrModel::new(ModelKind::WeightedResidual, vec!["a".into(), "b".into(), "c".into()], 1.0, 10, 3, 1).unwrap();
        let path = std::env::temp_dir().join(format!("wrcast-model-{}.json", std::process::id()));
        m.save(&path).unwrap();
        let back = WrModel::load(&path).unwrap();
        assert_eq!(back, m);
        std::fs::remove_file(&path).ok();
    }
}
