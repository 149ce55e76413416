//! Squared-error optimal weights under `Σw = N` and the box
//! `[1 − α/N, 1 − α/N + α]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TheoryError};

fn check(l_hat: &[f64], alpha: f64) -> Result<(usize, f64, f64)> {
    let n = l_hat.len();
    if n < 2 {
        return Err(TheoryError::Domain(format!("need at least 2 components, got {n}")));
    }
    if !(0.0..=n as f64).contains(&alpha) {
        return Err(TheoryError::Domain(format!("alpha {alpha} outside [0, {n}]")));
    }
    if l_hat.iter().any(|v| !v.is_finite()) {
        return Err(TheoryError::Domain("non-finite estimate".into()));
    }
    if l_hat.iter().all(|v| *v == l_hat[0]) {
        return Err(TheoryError::Degenerate("all estimates are equal".into()));
    }
    let lo = 1.0 - alpha / n as f64;
    Ok((n, lo, lo + alpha))
}

/// Lowest and highest `Σ w·l̂` reachable in the feasible set.
pub fn reachable_span(l_hat: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let (_, lo, hi) = check(l_hat, alpha)?;
    let base: f64 = l_hat.iter().map(|v| lo * v).sum();
    let max = l_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = l_hat.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((base + (hi - lo) * min, base + (hi - lo) * max))
}

/// One minimizer: the point on the segment from the all-ones vector toward
/// the feasible vertex that moves the fit furthest in the direction of `y`.
///
/// The minimizer set is generally not a single point; this choice is the
/// one reached first when leaving the additive combination.
pub fn constrained_optimal_weights(y: f64, l_hat: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let (n, lo, hi) = check(l_hat, alpha)?;
    let s0: f64 = l_hat.iter().sum();
    if y == s0 || alpha == 0.0 {
        return Ok(vec![1.0; n]);
    }
    // vertex: full excess on the extreme estimate, lowest index on ties
    let pick = if y > s0 {
        (0..n).fold(0, |b, i| if l_hat[i] > l_hat[b] { i } else { b })
    } else {
        (0..n).fold(0, |b, i| if l_hat[i] < l_hat[b] { i } else { b })
    };
    let mut vertex = vec![lo; n];
    vertex[pick] = hi;
    let sv: f64 = vertex.iter().zip(l_hat).map(|(w, l)| w * l).sum();
    let t = ((y - s0) / (sv - s0)).clamp(0.0, 1.0);
    Ok(vertex.iter().map(|v| 1.0 + t * (v - 1.0)).collect())
}

/// Random point of the minimizer set by hit-and-run from the canonical
/// minimizer, moving only along directions that keep `Σw` and `Σw·l̂`.
pub fn sample_optimal_weights<R: Rng>(y: f64, l_hat: &[f64], alpha: f64, rng: &mut R, steps: usize) -> Result<Vec<f64>> {
    let (n, lo, hi) = check(l_hat, alpha)?;
    let mut w = constrained_optimal_weights(y, l_hat, alpha)?;
    if n == 2 || alpha == 0.0 {
        return Ok(w);
    }
    let s1: f64 = l_hat.iter().sum();
    let s2: f64 = l_hat.iter().map(|v| v * v).sum();
    let det = n as f64 * s2 - s1 * s1;
    for _ in 0..steps {
        let mut d: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // remove the component in the row space of [1; l̂]
        let a = d.iter().sum::<f64>();
        let b: f64 = d.iter().zip(l_hat).map(|(x, l)| x * l).sum();
        let c0 = (s2 * a - s1 * b) / det;
        let c1 = (n as f64 * b - s1 * a) / det;
        for (x, l) in d.iter_mut().zip(l_hat) {
            *x -= c0 + c1 * l;
        }
        let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            if d[i].abs() < 1e-15 {
                continue;
            }
            let (t1, t2) = ((lo - w[i]) / d[i], (hi - w[i]) / d[i]);
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
        if !(tmin.is_finite() && tmax.is_finite()) || tmax <= tmin {
            continue;
        }
        let t = rng.gen_range(tmin..=tmax);
        for i in 0..n {
            w[i] = (w[i] + t * d[i]).clamp(lo, hi);
        }
    }
    Ok(w)
}
