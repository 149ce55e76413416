//! Exact-greedy regression trees and gradient boosting.

use serde::{Deserialize, Serialize};
use wrcast_core::stats::mean;

use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    t: &'a [f64],
    h: Option<&'a [f64]>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn hess(&self, i: usize) -> f64 {
        self.h.map_or(1.0, |h| h[i])
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.t[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess(i)).sum();
        if h > 0.0 {
            g / h
        } else {
            0.0
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return me;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }

    /// Best `(feature, threshold)` by `G_L²/H_L + G_R²/H_R − G²/H`, scanning
    /// features in order and thresholds ascending; only strict improvements
    /// replace the incumbent.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let g_tot: f64 = idx.iter().map(|&i| self.t[i]).sum();
        let h_tot: f64 = idx.iter().map(|&i| self.hess(i)).sum();
        if h_tot <= 0.0 {
            return None;
        }
        let parent = g_tot * g_tot / h_tot;
        let tol = 1e-12 * (1.0 + parent.abs());
        let n_feat = self.x[idx[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..n_feat {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut gl = 0.0;
            let mut hl = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.t[i];
                hl += self.hess(i);
                let xa = self.x[i][f];
                let xb = self.x[order[k + 1]][f];
                if xa == xb {
                    continue;
                }
                let nl = k + 1;
                let nr = order.len() - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let gr = g_tot - gl;
                let hr = h_tot - hl;
                if hl <= 0.0 || hr <= 0.0 {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if gain > tol && best.map_or(true, |b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (xa + xb)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Fits one tree. Without hessians the leaves are target means and splits
/// maximize variance reduction; with hessians leaves are `Σt/Σh` (pass the
/// negative gradient as `targets` for a Newton step).
pub fn fit_tree(
    x: &[Vec<f64>],
    targets: &[f64],
    hessians: Option<&[f64]>,
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree> {
    if x.is_empty() || targets.is_empty() {
        return Err(StatsError::domain("cannot fit a tree on empty data"));
    }
    if x.len() != targets.len() || hessians.is_some_and(|h| h.len() != targets.len()) {
        return Err(StatsError::domain("tree inputs have mismatched lengths"));
    }
    if min_leaf == 0 {
        return Err(StatsError::domain("min_leaf must be at least 1"));
    }
    let width = x[0].len();
    if x.iter().any(|r| r.len() != width) {
        return Err(StatsError::domain("ragged feature matrix"));
    }
    let mut b = Builder {
        x,
        t: targets,
        h: hessians,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    b.build((0..x.len()).collect(), 0);
    Ok(RegressionTree {
        nodes: b.nodes,
        max_depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(StatsError::domain("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(StatsError::domain("learning rate must be positive"));
        }
        if self.min_leaf == 0 {
            return Err(StatsError::domain("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: RegressionTree,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base: f64,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Squared,
    Custom,
}

/// `output_k(x) = base_k + Σ lr·ρ_n·tree_{k,n}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub objective: ObjectiveKind,
    pub learning_rate: f64,
    pub n_features: usize,
    pub ensembles: Vec<Ensemble>,
    /// Training objective before the first round and after each round.
    pub loss_history: Vec<f64>,
}

impl GbdtModel {
    pub fn n_outputs(&self) -> usize {
        self.ensembles.len()
    }

    pub fn predict_multi(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(StatsError::domain(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(self
            .ensembles
            .iter()
            .map(|e| {
                e.base
                    + e.stages
                        .iter()
                        .map(|s| self.learning_rate * s.rho * s.tree.predict(x))
                        .sum::<f64>()
            })
            .collect())
    }

    /// First output; the only one for the squared objective.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_multi(x)?[0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_matrix(x: &[Vec<f64>], n: usize) -> Result<usize> {
    if x.is_empty() || x.len() != n {
        return Err(StatsError::domain("feature rows must match targets and be nonempty"));
    }
    let w = x[0].len();
    if x.iter().any(|r| r.len() != w || r.iter().any(|v| !v.is_finite())) {
        return Err(StatsError::domain("feature matrix must be rectangular and finite"));
    }
    Ok(w)
}

/// Squared-loss boosting: start from the mean, fit each tree to the
/// residuals and scale it by the least-squares line-search step.
pub fn gbdt_fit_squared(x: &[Vec<f64>], y: &[f64], cfg: &GbdtConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    let nf = check_matrix(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::domain("targets must be finite"));
    }
    let base = mean(y);
    let mut f = vec![base; y.len()];
    let sq = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    let mut history = vec![sq(&f)];
    let mut stages = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let resid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = fit_tree(x, &resid, None, cfg.max_depth, cfg.min_leaf)?;
        let out: Vec<f64> = x.iter().map(|r| tree.predict(r)).collect();
        let num: f64 = resid.iter().zip(&out).map(|(r, o)| r * o).sum();
        let den: f64 = out.iter().map(|o| o * o).sum();
        let rho = if den > 0.0 { num / den } else { 0.0 };
        for (fi, o) in f.iter_mut().zip(&out) {
            *fi += cfg.learning_rate * rho * o;
        }
        history.push(sq(&f));
        stages.push(Stage { tree, rho });
    }
    Ok(GbdtModel {
        objective: ObjectiveKind::Squared,
        learning_rate: cfg.learning_rate,
        n_features: nf,
        ensembles: vec![Ensemble { base, stages }],
        loss_history: history,
    })
}

/// Caller-supplied vector-valued objective over `K` outputs per sample.
pub trait MultiObjective {
    fn n_outputs(&self) -> usize;

    /// Total objective for predictions `preds[i][k]`.
    fn loss(&self, preds: &[Vec<f64>]) -> f64;

    /// Per-sample, per-output first and second derivatives.
    fn grad_hess(&self, preds: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>);

    fn base(&self) -> Vec<f64> {
        vec![0.0; self.n_outputs()]
    }
}

/// Second-order boosting: every round fits one Newton tree per output on the
/// current gradients, then halves the shared step until the objective does
/// not increase (a rejected round is kept with `ρ = 0`).
pub fn gbdt_fit_custom<O: MultiObjective>(x: &[Vec<f64>], objective: &O, cfg: &GbdtConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    let n = x.len();
    let nf = check_matrix(x, n)?;
    let k_out = objective.n_outputs();
    let base = objective.base();
    if base.len() != k_out {
        return Err(StatsError::domain("objective base has the wrong length"));
    }
    let mut preds: Vec<Vec<f64>> = vec![base.clone(); n];
    let mut loss = objective.loss(&preds);
    let mut history = vec![loss];
    let mut ensembles: Vec<Ensemble> = base
        .iter()
        .map(|&b| Ensemble {
            base: b,
            stages: Vec::with_capacity(cfg.n_trees),
        })
        .collect();
    for round in 0..cfg.n_trees {
        let (g, h) = objective.grad_hess(&preds);
        if g.len() != n || h.len() != n {
            return Err(StatsError::Training {
                round,
                message: "gradient shape mismatch".into(),
            });
        }
        if g.iter().chain(&h).flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::Training {
                round,
                message: "non-finite gradient or hessian".into(),
            });
        }
        let mut trees = Vec::with_capacity(k_out);
        let mut outs = Vec::with_capacity(k_out);
        for k in 0..k_out {
            let t: Vec<f64> = g.iter().map(|gi| -gi[k]).collect();
            let hk: Vec<f64> = h.iter().map(|hi| hi[k].max(1e-12)).collect();
            let tree = fit_tree(x, &t, Some(&hk), cfg.max_depth, cfg.min_leaf)?;
            outs.push(x.iter().map(|r| tree.predict(r)).collect::<Vec<f64>>());
            trees.push(tree);
        }
        let mut rho = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..k_out).map(|k| preds[i][k] + cfg.learning_rate * rho * outs[k][i]).collect())
                .collect();
            let l = objective.loss(&cand);
            if l.is_finite() && l <= loss {
                preds = cand;
                loss = l;
                accepted = true;
                break;
            }
            rho *= 0.5;
        }
        if !accepted {
            rho = 0.0;
        }
        history.push(loss);
        for (e, tree) in ensembles.iter_mut().zip(trees) {
            e.stages.push(Stage { tree, rho });
        }
    }
    Ok(GbdtModel {
        objective: ObjectiveKind::Custom,
        learning_rate: cfg.learning_rate,
        n_features: nf,
        ensembles,
        loss_history: history,
    })
}
