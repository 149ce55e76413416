//! Two-component case: optimal weight, per-component improvement
//! predicate and the joint-improvement region map.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TheoryError};

/// Actual total `y`, true components `l` and estimates `l_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInstance {
    pub y: f64,
    pub l: Vec<f64>,
    pub l_hat: Vec<f64>,
}

impl TheoryInstance {
    pub fn new(y: f64, l: Vec<f64>, l_hat: Vec<f64>) -> Result<Self> {
        if l.len() != l_hat.len() || l.len() < 2 {
            return Err(TheoryError::Domain(format!(
                "need matching component vectors of length >= 2, got {} and {}",
                l.len(),
                l_hat.len()
            )));
        }
        Ok(Self { y, l, l_hat })
    }

    /// Residual-free instance, `y = Σ l`.
    pub fn exact(l: Vec<f64>, l_hat: Vec<f64>) -> Result<Self> {
        let y = l.iter().sum();
        Self::new(y, l, l_hat)
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    pub fn additive(&self) -> f64 {
        self.l_hat.iter().sum()
    }

    fn require_two(&self) -> Result<()> {
        if self.n() != 2 {
            return Err(TheoryError::Domain(format!("two components required, got {}", self.n())));
        }
        Ok(())
    }
}

/// `w* = (y − 2l̂₂)/(l̂₁ − l̂₂)`, the weight on component 1 (component 2
/// gets `2 − w*`).
pub fn optimal_weight_n2(y: f64, l1_hat: f64, l2_hat: f64) -> Result<f64> {
    if l1_hat == l2_hat {
        return Err(TheoryError::Degenerate(format!("equal estimates {l1_hat}")));
    }
    Ok((y - 2.0 * l2_hat) / (l1_hat - l2_hat))
}

/// `g(l̂ᵢ) = l̂ᵢ² + l̂ᵢ(y − 3l̂₋ᵢ − 2lᵢ) + 2lᵢl̂₋ᵢ`; `i` is 0 or 1.
pub fn bias_predicate_g(inst: &TheoryInstance, i: usize) -> Result<f64> {
    inst.require_two()?;
    if i > 1 {
        return Err(TheoryError::Domain(format!("component index {i} out of range")));
    }
    let (lh, lo, l) = (inst.l_hat[i], inst.l_hat[1 - i], inst.l[i]);
    Ok(lh * lh + lh * (inst.y - 3.0 * lo - 2.0 * l) + 2.0 * l * lo)
}

/// Sign rule for a positive estimate: component `i` improves at `w*` iff
/// `y > Σl̂` with `g < 0`, or `y < Σl̂` with `g > 0`.
pub fn sign_rule_improves(inst: &TheoryInstance, i: usize) -> Result<bool> {
    let g = bias_predicate_g(inst, i)?;
    if !(inst.l_hat[i] > 0.0) {
        return Err(TheoryError::Domain("sign rule assumes a positive estimate".into()));
    }
    let s = inst.additive();
    Ok((inst.y > s && g < 0.0) || (inst.y < s && g > 0.0))
}

/// `|w·l̂ − l| < |l̂ − l|`, evaluated directly.
pub fn improves(l: f64, l_hat: f64, w: f64) -> bool {
    (w * l_hat - l).abs() < (l_hat - l).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementVerdict {
    /// Brute force at the optimal weights.
    pub improved: Vec<bool>,
    /// Sign-rule prediction.
    pub predicted: Vec<bool>,
    pub w_star: Vec<f64>,
}

/// Brute-force and predicted improvement of both components at `w*`.
pub fn verdict_n2(inst: &TheoryInstance) -> Result<ImprovementVerdict> {
    inst.require_two()?;
    let w = optimal_weight_n2(inst.y, inst.l_hat[0], inst.l_hat[1])?;
    let w_star = vec![w, 2.0 - w];
    let improved = (0..2).map(|i| improves(inst.l[i], inst.l_hat[i], w_star[i])).collect();
    let predicted = (0..2).map(|i| sign_rule_improves(inst, i)).collect::<Result<_>>()?;
    Ok(ImprovementVerdict {
        improved,
        predicted,
        w_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Both,
    OnlyFirst,
    OnlySecond,
    Neither,
}

impl Region {
    pub fn from_flags(a: bool, b: bool) -> Self {
        match (a, b) {
            (true, true) => Region::Both,
            (true, false) => Region::OnlyFirst,
            (false, true) => Region::OnlySecond,
            (false, false) => Region::Neither,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Both => "both",
            Region::OnlyFirst => "only_1",
            Region::OnlySecond => "only_2",
            Region::Neither => "neither",
        }
    }
}

/// Which closed-form case of the joint-improvement characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCase {
    /// `(l₁+l₂)/2 < l̂₁ < l₁`: both iff `l*₂₀ < l̂₂ < y − l̂₁`.
    Under,
    /// `l̂₁ > l₁`: both iff `y − l̂₁ < l̂₂ < l*₂₁`.
    Over,
    /// Not covered by the closed form.
    Uncovered,
}

/// Smaller root of `x² + bx + c`, computed without cancellation.
fn smaller_root(b: f64, c: f64) -> Option<f64> {
    let d = b * b - 4.0 * c;
    if d < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * d.sqrt());
    if q == 0.0 {
        return Some(0.0);
    }
    let (r1, r2) = (q, c / q);
    Some(r1.min(r2))
}

/// Closed-form classification for `l̂₁ > l̂₂ > 0`, `y = l₁ + l₂`.
/// Returns the case, the threshold root and the predicted "both" flag.
pub fn threshold_classification(l1: f64, l2: f64, l1_hat: f64, l2_hat: f64) -> (ThresholdCase, Option<f64>, bool) {
    let y = l1 + l2;
    let mid = 0.5 * y;
    // g as a quadratic in l̂₂ with l̂₁ fixed
    let b = y - 3.0 * l1_hat - 2.0 * l2;
    let c = 2.0 * l2 * l1_hat;
    if l1_hat > mid && l1_hat < l1 {
        let root = smaller_root(b, c);
        let both = root.is_some_and(|r| r < l2_hat && l2_hat < y - l1_hat);
        (ThresholdCase::Under, root, both)
    } else if l1_hat > l1 {
        let root = smaller_root(b, c);
        let both = root.is_some_and(|r| y - l1_hat < l2_hat && l2_hat < r);
        (ThresholdCase::Over, root, both)
    } else {
        (ThresholdCase::Uncovered, None, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub l1: f64,
    pub l2: f64,
    pub l1_hat: f64,
    pub l2_hat: f64,
    pub w_star: f64,
    pub region: Region,
    pub case: ThresholdCase,
    pub threshold: Option<f64>,
    pub predicted_both: bool,
    /// Within `tol` of a predicate boundary.
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.5,
            hi: 20.0,
            step: 0.5,
            tol: 1e-9,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|k| self.lo + self.step * k as f64).collect()
    }
}

/// Brute-force region of every `(l̂₁, l̂₂)` cell with `l̂₁ > l̂₂`, alongside
/// the closed-form threshold prediction.
pub fn joint_improvement_map_n2(l1: f64, l2: f64, grid: &GridSpec) -> Result<Vec<RegionCell>> {
    if !(l1 > l2 && l2 > 0.0) {
        return Err(TheoryError::Domain(format!("need l1 > l2 > 0, got {l1}, {l2}")));
    }
    let pts = grid.points();
    let mut out = Vec::new();
    for &a in &pts {
        for &b in pts.iter().filter(|b| **b < a) {
            let inst = TheoryInstance::exact(vec![l1, l2], vec![a, b])?;
            let v = verdict_n2(&inst)?;
            let (case, threshold, predicted_both) = threshold_classification(l1, l2, a, b);
            let g: Vec<f64> = (0..2).map(|i| bias_predicate_g(&inst, i)).collect::<Result<_>>()?;
            let y = l1 + l2;
            let boundary = (y - a - b).abs() <= grid.tol
                || g.iter().any(|v| v.abs() <= grid.tol)
                || (a - b).abs() <= grid.tol
                || threshold.is_some_and(|r| (b - r).abs() <= grid.tol)
                || (a - l1).abs() <= grid.tol
                || (a - 0.5 * y).abs() <= grid.tol;
            out.push(RegionCell {
                l1,
                l2,
                l1_hat: a,
                l2_hat: b,
                w_star: v.w_star[0],
                region: Region::from_flags(v.improved[0], v.improved[1]),
                case,
                threshold,
                predicted_both,
                boundary,
            });
        }
    }
    Ok(out)
}
