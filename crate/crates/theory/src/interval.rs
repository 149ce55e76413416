//! Weights that strictly reduce the error of a single component.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TheoryError};

/// Set of weights `w` with `|w·l̂ − l| < |l̂ − l|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ImprovementSet {
    Empty,
    /// Open interval `(lo, hi)`.
    Open { lo: f64, hi: f64 },
}

impl ImprovementSet {
    pub fn contains(&self, w: f64) -> bool {
        match *self {
            ImprovementSet::Empty => false,
            ImprovementSet::Open { lo, hi } => lo < w && w < hi,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ImprovementSet::Empty => None,
            ImprovementSet::Open { lo, hi } => Some((lo, hi)),
        }
    }
}

/// Open interval between the roots 1 and `2l/l̂ − 1` of
/// `T(w) = (w − 1)((w + 1)l̂ − 2l)`.
///
/// For `l̂ < 0` the improvement condition flips to `T(w) > 0`, but so does
/// the sign of the leading coefficient of `T`, so the set is again the
/// interval between the roots.
pub fn improvement_interval(l: f64, l_hat: f64) -> Result<ImprovementSet> {
    if l_hat == 0.0 {
        return Err(TheoryError::NoEffect);
    }
    if !(l.is_finite() && l_hat.is_finite()) {
        return Err(TheoryError::Domain("non-finite component".into()));
    }
    if l == l_hat {
        return Ok(ImprovementSet::Empty);
    }
    let other = 2.0 * l / l_hat - 1.0;
    let (lo, hi) = if other < 1.0 { (other, 1.0) } else { (1.0, other) };
    Ok(ImprovementSet::Open { lo, hi })
}

/// `l̂(w − 1)((w + 1)l̂ − 2l) < 0`.
pub fn lemma_predicate(l: f64, l_hat: f64, w: f64) -> bool {
    l_hat * (w - 1.0) * ((w + 1.0) * l_hat - 2.0 * l) < 0.0
}
