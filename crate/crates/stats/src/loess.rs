//! Locally weighted polynomial regression with tricube neighbourhood weights.

use wrcast_core::linalg::weighted_least_squares;

use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq)]
pub struct LoessConfig {
    /// Neighbour count.
    pub q: usize,
    /// Polynomial degree, 0..=2.
    pub degree: usize,
    /// Optional per-point robustness weights.
    pub robustness: Option<Vec<f64>>,
}

impl LoessConfig {
    pub fn new(q: usize, degree: usize) -> Result<Self> {
        if degree > 2 {
            return Err(StatsError::domain(format!("loess degree {degree} > 2")));
        }
        if q < degree + 1 {
            return Err(StatsError::domain(format!("loess needs q ≥ {}, got {q}", degree + 1)));
        }
        Ok(Self {
            q,
            degree,
            robustness: None,
        })
    }

    pub fn with_robustness(mut self, delta: Vec<f64>) -> Self {
        self.robustness = Some(delta);
        self
    }
}

#[inline]
pub fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u * u * u;
        v * v * v
    }
}

/// Local fit at `x0`: value and first derivative (0 for degree 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub value: f64,
    pub slope: f64,
}

pub fn loess_at(xs: &[f64], ys: &[f64], x0: f64, cfg: &LoessConfig) -> Result<f64> {
    Ok(loess_fit_at(xs, ys, x0, cfg)?.value)
}

pub fn loess_fit_at(xs: &[f64], ys: &[f64], x0: f64, cfg: &LoessConfig) -> Result<LocalFit> {
    let n = xs.len();
    if n == 0 || ys.len() != n {
        return Err(StatsError::domain("loess needs equal, nonempty x and y"));
    }
    if let Some(d) = &cfg.robustness {
        if d.len() != n {
            return Err(StatsError::domain("robustness weights length mismatch"));
        }
        if d.iter().any(|w| !(*w >= 0.0)) {
            return Err(StatsError::domain("robustness weights must be nonnegative"));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (xs[a] - x0)
            .abs()
            .total_cmp(&(xs[b] - x0).abs())
            .then(a.cmp(&b))
    });
    let k = cfg.q.min(n);
    let chosen = &order[..k];
    let mut lambda = (xs[chosen[k - 1]] - x0).abs();
    if cfg.q > n {
        lambda *= cfg.q as f64 / n as f64;
    }
    let sel: Vec<(f64, f64, f64)> = chosen
        .iter()
        .map(|&i| {
            let dist = (xs[i] - x0).abs();
            let w = if lambda > 0.0 { tricube(dist / lambda) } else { 1.0 };
            let delta = cfg.robustness.as_ref().map_or(1.0, |d| d[i]);
            (xs[i] - x0, ys[i], w * delta)
        })
        .collect();
    local_poly(&sel, cfg.degree)
}

/// Weighted polynomial fit on centred abscissae `(dx, y, w)`, dropping the
/// degree until the weighted design is nonsingular.
pub(crate) fn local_poly(sel: &[(f64, f64, f64)], degree: usize) -> Result<LocalFit> {
    let positive: Vec<&(f64, f64, f64)> = sel.iter().filter(|s| s.2 > 0.0).collect();
    if positive.is_empty() {
        return Err(StatsError::Degenerate("all loess weights are zero".into()));
    }
    let mut distinct: Vec<f64> = positive.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut deg = degree.min(distinct.len() - 1);
    loop {
        if deg == 0 {
            let sw: f64 = positive.iter().map(|s| s.2).sum();
            let v = positive.iter().map(|s| s.2 * s.1).sum::<f64>() / sw;
            return Ok(LocalFit { value: v, slope: 0.0 });
        }
        let rows: Vec<Vec<f64>> = positive
            .iter()
            .map(|s| (0..=deg).map(|p| s.0.powi(p as i32)).collect())
            .collect();
        let y: Vec<f64> = positive.iter().map(|s| s.1).collect();
        let w: Vec<f64> = positive.iter().map(|s| s.2).collect();
        if let Some(beta) = weighted_least_squares(&rows, &y, &w) {
            return Ok(LocalFit {
                value: beta[0],
                slope: beta[1],
            });
        }
        deg -= 1;
    }
}

/// Loess over equally spaced abscissae `0..n`, evaluated at arbitrary
/// (possibly out-of-range) integer positions. Neighbourhoods are contiguous
/// windows, so this is the fast path used by STL.
pub(crate) fn loess_grid(
    ys: &[f64],
    q: usize,
    degree: usize,
    delta: Option<&[f64]>,
    at: impl Iterator<Item = i64>,
) -> Result<Vec<LocalFit>> {
    let n = ys.len();
    if n == 0 {
        return Err(StatsError::domain("loess on an empty series"));
    }
    let k = q.min(n);
    let mut out = Vec::new();
    for x0 in at {
        // contiguous window of k points nearest to x0, ties resolved to the left
        let mut lo = (x0 - (k as i64 - 1) / 2).clamp(0, (n - k) as i64) as usize;
        // shift so that the window holds the k nearest points
        while lo + k < n && (x0 - lo as i64).abs() > ((lo + k) as i64 - x0).abs() {
            lo += 1;
        }
        while lo > 0 && ((lo + k - 1) as i64 - x0).abs() >= (x0 - (lo as i64 - 1)).abs() {
            lo -= 1;
        }
        let far = (x0 - lo as i64).abs().max(((lo + k - 1) as i64 - x0).abs()) as f64;
        let lambda = if q > n { far * q as f64 / n as f64 } else { far };
        let sel: Vec<(f64, f64, f64)> = (lo..lo + k)
            .map(|i| {
                let dx = i as f64 - x0 as f64;
                let w = if lambda > 0.0 { tricube(dx.abs() / lambda) } else { 1.0 };
                (dx, ys[i], w * delta.map_or(1.0, |d| d[i]))
            })
            .collect();
        // a neighbourhood without weight keeps the nearest observation
        let fit = match local_poly(&sel, degree) {
            Err(StatsError::Degenerate(_)) => LocalFit {
                value: ys[x0.clamp(0, n as i64 - 1) as usize],
                slope: 0.0,
            },
            other => other?,
        };
        out.push(fit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quadratic_through_three_points() {
        let cfg = LoessConfig::new(3, 2).unwrap();
        let v = loess_at(&[0.0, 1.0, 2.0], &[0.0, 1.0, 4.0], 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reproduces_lines() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        for q in [3, 5, 12, 30] {
            let cfg = LoessConfig::new(q, 1).unwrap();
            for x0 in [0.0, 1.1, 4.9, 7.7, 9.0] {
                let v = loess_at(&xs, &ys, x0, &cfg).unwrap();
                assert_abs_diff_eq!(v, 3.0 - 2.0 * x0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn constant_any_config() {
        let xs: Vec<f64> = (0..9).map(f64::from).collect();
        let ys = vec![4.5; 9];
        for (q, d) in [(2, 0), (4, 1), (9, 2), (20, 2)] {
            let cfg = LoessConfig::new(q, d).unwrap();
            assert_abs_diff_eq!(loess_at(&xs, &ys, 3.3, &cfg).unwrap(), 4.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let cfg = LoessConfig::new(3, 1).unwrap().with_robustness(vec![0.0; 3]);
        assert!(matches!(
            loess_at(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], 1.0, &cfg),
            Err(StatsError::Degenerate(_))
        ));
        assert!(LoessConfig::new(1, 1).is_err());
    }

    #[test]
    fn grid_keeps_observation_without_weight() {
        let ys = [1.0, 2.0, 3.0, 4.0, 5.0];
        let delta = [1.0, 0.0, 0.0, 0.0, 1.0];
        let fits = loess_grid(&ys, 3, 1, Some(&delta), [2, 0, -1].into_iter()).unwrap();
        assert_eq!(fits[0], LocalFit { value: 3.0, slope: 0.0 });
        assert_abs_diff_eq!(fits[1].value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fits[2].value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_matches_generic() {
        let ys: Vec<f64> = (0..15).map(|i| ((i * 7) % 5) as f64 + 0.1 * i as f64).collect();
        let xs: Vec<f64> = (0..15).map(f64::from).collect();
        let delta: Vec<f64> = (0..15).map(|i| 0.5 + 0.03 * i as f64).collect();
        for q in [4, 7, 20] {
            let cfg = LoessConfig::new(q, 1).unwrap().with_robustness(delta.clone());
            let grid = loess_grid(&ys, q, 1, Some(&delta), -2..17).unwrap();
            for (x0, g) in (-2..17).zip(grid) {
                let v = loess_at(&xs, &ys, x0 as f64, &cfg).unwrap();
                assert_abs_diff_eq!(v, g.value, epsilon = 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn line_reproduction(a in -10.0f64..10.0, b in -5.0f64..5.0, q in 3usize..20, x0 in -2.0f64..12.0) {
            let xs: Vec<f64> = (0..10).map(f64::from).collect();
            let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            let v = loess_at(&xs, &ys, x0, &LoessConfig::new(q, 1).unwrap()).unwrap();
            prop_assert!((v - (a + b * x0)).abs() < 1e-8 * (1.0 + a.abs() + b.abs() * 12.0));
        }
    }
}
