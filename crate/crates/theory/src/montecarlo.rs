//! Monte Carlo estimate of how often every component improves at the
//! constrained optimum, as a function of the weight-interval size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constrained::sample_optimal_weights;
use crate::error::{Result, TheoryError};
use crate::two::improves;

/// True components are uniform on `range`; estimates are
/// `l·bias·exp(σ·z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub bias: Vec<f64>,
    pub sigma: f64,
    pub range: (f64, f64),
}

impl NoiseSpec {
    /// Unbiased lognormal noise with σ = 0.2.
    pub fn unbiased(n: usize) -> Self {
        Self {
            bias: vec![1.0; n],
            sigma: 0.2,
            range: (1.0, 10.0),
        }
    }

    /// First component inflated, second deflated by `b`, small noise.
    pub fn opposite_sign(n: usize, b: f64) -> Self {
        let mut bias = vec![1.0; n];
        bias[0] = 1.0 + b;
        if n > 1 {
            bias[1] = 1.0 - b;
        }
        Self {
            bias,
            sigma: 0.05,
            range: (1.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureRow {
    pub alpha: f64,
    pub trials: usize,
    /// Share of trials where every component's error shrinks.
    pub p_all_improve: f64,
    pub mean_abs_deviation: f64,
}

/// Instances are shared across the α grid; the optimum at each α is a
/// random point of the minimizer set.
pub fn conjecture_monte_carlo(n: usize, trials: usize, alpha_grid: &[f64], noise: &NoiseSpec, seed: u64) -> Result<Vec<ConjectureRow>> {
    if trials < 1000 {
        return Err(TheoryError::Domain(format!("need at least 1000 trials, got {trials}")));
    }
    if noise.bias.len() != n || n < 2 {
        return Err(TheoryError::Domain("bias vector must have one entry per component".into()));
    }
    if noise.sigma < 0.0 || !(noise.range.0 < noise.range.1) {
        return Err(TheoryError::Domain("invalid noise specification".into()));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(0.0..=n as f64).contains(*a)) {
        return Err(TheoryError::Domain(format!("alpha {a} outside [0, {n}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut improved = vec![0usize; alpha_grid.len()];
    let mut dev = vec![0.0; alpha_grid.len()];
    let mut done = 0;
    while done < trials {
        let l: Vec<f64> = (0..n).map(|_| rng.gen_range(noise.range.0..noise.range.1)).collect();
        let l_hat: Vec<f64> = l
            .iter()
            .zip(&noise.bias)
            .map(|(v, b)| v * b * (noise.sigma * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        if l_hat.iter().all(|v| *v == l_hat[0]) {
            continue;
        }
        let y: f64 = l.iter().sum();
        for (k, &alpha) in alpha_grid.iter().enumerate() {
            let w = sample_optimal_weights(y, &l_hat, alpha, &mut rng, 4 * n)?;
            if (0..n).all(|i| improves(l[i], l_hat[i], w[i])) {
                improved[k] += 1;
            }
            dev[k] += w.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / n as f64;
        }
        done += 1;
    }
    Ok(alpha_grid
        .iter()
        .enumerate()
        .map(|(k, &alpha)| ConjectureRow {
            alpha,
            trials,
            p_all_improve: improved[k] as f64 / trials as f64,
            mean_abs_deviation: dev[k] / trials as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_zero_never_improves() {
        let rows = conjecture_monte_carlo(3, 1000, &[0.0, 1.0], &NoiseSpec::unbiased(3), 1).unwrap();
        assert_eq!(rows[0].p_all_improve, 0.0);
        assert_eq!(rows[0].mean_abs_deviation, 0.0);
        assert!(rows[1].p_all_improve > 0.0);
        assert!(conjecture_monte_carlo(3, 10, &[1.0], &NoiseSpec::unbiased(3), 1).is_err());
    }

    #[test]
    fn opposite_biases_favour_improvement() {
        let rows = conjecture_monte_carlo(2, 2000, &[1.0], &NoiseSpec::opposite_sign(2, 0.2), 2).unwrap();
        assert!(rows[0].p_all_improve > 0.5, "{rows:?}");
    }

    #[test]
    fn interior_peak() {
        let grid = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
        let rows = conjecture_monte_carlo(3, 4000, &grid, &NoiseSpec::unbiased(3), 3).unwrap();
        let p: Vec<f64> = rows.iter().map(|r| r.p_all_improve).collect();
        let k = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        assert!(k > 0 && k < p.len() - 1, "{p:?}");
        assert!(p[p.len() - 1] < p[k], "{p:?}");
    }
}
