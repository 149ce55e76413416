//! Candidate point forecasters: moving averages, additive Holt-Winters and
//! (seasonal) ARIMA fitted by conditional sum of squares.

use serde::{Deserialize, Serialize};
use wrcast_core::stats::{mean, std_dev};

use crate::error::{Result, StatsError};

pub fn ma_forecast(history: &[f64], window: usize) -> Result<f64> {
    if window == 0 || window > history.len() {
        return Err(StatsError::domain(format!(
            "moving-average window {window} invalid for {} points",
            history.len()
        )));
    }
    Ok(mean(&history[history.len() - window..]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WmaScaling {
    /// Weights `(T−j+1)` divided by their sum.
    #[default]
    Normalized,
    /// `2Σ(T−j+1)y_{t−j} / (T²(T−1))` taken literally.
    Printed,
}

pub fn wma_forecast(history: &[f64], window: usize) -> Result<f64> {
    wma_forecast_with(history, window, WmaScaling::Normalized)
}

/// Lag `j` (1 = newest) gets weight `T_w − j + 1`.
pub fn wma_forecast_with(history: &[f64], window: usize, scaling: WmaScaling) -> Result<f64> {
    if window < 2 || window > history.len() {
        return Err(StatsError::domain(format!(
            "weighted moving-average window {window} invalid for {} points",
            history.len()
        )));
    }
    let n = history.len();
    let t = window as f64;
    let weighted: f64 = (1..=window)
        .map(|j| (window - j + 1) as f64 * history[n - j])
        .sum();
    Ok(match scaling {
        WmaScaling::Normalized => {
            // anchor on the newest value so constant input is reproduced exactly
            let base = history[n - 1];
            let dev: f64 = (1..=window)
                .map(|j| (window - j + 1) as f64 * (history[n - j] - base))
                .sum();
            base + dev / (t * (t + 1.0) / 2.0)
        }
        WmaScaling::Printed => 2.0 * weighted / (t * t * (t - 1.0)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EtsParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(StatsError::domain(format!("ets {name}={v} outside [0, 1]")));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    /// `season[k]` holds the latest seasonal term of phase `k = t mod m`.
    pub season: Vec<f64>,
    pub m: usize,
    pub params: EtsParams,
    /// Number of observations absorbed.
    pub n: usize,
    /// In-sample one-step squared error.
    pub sse: f64,
}

impl EtsState {
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        (1..=h)
            .map(|k| {
                let phase = (self.n - 1 + k) % self.m;
                self.level + k as f64 * self.trend + self.season[phase]
            })
            .collect()
    }
}

/// Runs the additive recursions (error-correction form) over the series.
///
/// Initial trend is the difference of the first two season means over `m`;
/// level and seasonal terms are read off the first season around that line.
pub fn ets_fit(series: &[f64], m: usize, params: EtsParams) -> Result<EtsState> {
    if m == 0 || series.len() < 2 * m {
        return Err(StatsError::domain(format!(
            "ets needs at least {} points for season {m}, got {}",
            2 * m,
            series.len()
        )));
    }
    let first = mean(&series[..m]);
    let second = mean(&series[m..2 * m]);
    let mut trend = (second - first) / m as f64;
    let centre = (m as f64 - 1.0) / 2.0;
    // level at the end of the first season; seasonal terms net of the trend line
    let mut level = first + trend * centre;
    let mut season: Vec<f64> = series[..m]
        .iter()
        .enumerate()
        .map(|(i, y)| y - first - trend * (i as f64 - centre))
        .collect();
    let EtsParams { alpha, beta, gamma } = params;
    let mut sse = 0.0;
    for (t, &y) in series.iter().enumerate().skip(m) {
        let k = t % m;
        let s_old = season[k];
        let pred = level + trend + s_old;
        let err = y - pred;
        sse += err * err;
        let prev_level = level;
        level = prev_level + trend + alpha * err;
        trend += beta * (level - prev_level - trend);
        season[k] = s_old + gamma * err;
    }
    Ok(EtsState {
        level,
        trend,
        season,
        m,
        params,
        n: series.len(),
        sse,
    })
}

pub fn ets_fit_forecast(series: &[f64], m: usize, params: EtsParams, h: usize) -> Result<Vec<f64>> {
    Ok(ets_fit(series, m, params)?.forecast(h))
}

/// Picks smoothing parameters from `{0.1,…,0.9}³` by in-sample one-step
/// squared error; ties keep the first grid point.
pub fn ets_grid_fit(series: &[f64], m: usize) -> Result<EtsState> {
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut best: Option<EtsState> = None;
    for &a in &grid {
        for &b in &grid {
            for &g in &grid {
                let st = ets_fit(series, m, EtsParams { alpha: a, beta: b, gamma: g })?;
                if st.sse.is_finite() && best.as_ref().map_or(true, |bst| st.sse < bst.sse) {
                    best = Some(st);
                }
            }
        }
    }
    best.ok_or_else(|| StatsError::Degenerate("no finite ets fit on the grid".into()))
}

/// `ARIMA(p,d,q)(P,D,Q)_m`. After fitting, `mu` is the intercept of the
/// differenced process: `w_t = mu + Σ a_k w_{t−k} + Σ b_k e_{t−k} + e_t`
/// with `a`, `b` the expanded seasonal products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub m: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sphi: Vec<f64>,
    pub stheta: Vec<f64>,
    pub mu: f64,
    pub fitted: bool,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            m: 0,
            phi: vec![0.0; p],
            theta: vec![0.0; q],
            sphi: vec![],
            stheta: vec![],
            mu: 0.0,
            fitted: false,
        }
    }

    pub fn seasonal(mut self, sp: usize, sd: usize, sq: usize, m: usize) -> Self {
        if m == 0 {
            return self;
        }
        self.sp = sp;
        self.sd = sd;
        self.sq = sq;
        self.m = m;
        self.sphi = vec![0.0; sp];
        self.stheta = vec![0.0; sq];
        self
    }

    /// `(1,1,1)(0,1,1)_7`.
    pub fn default_daily() -> Self {
        Self::new(1, 1, 1).seasonal(0, 1, 1, 7)
    }

    /// Builds a fitted non-seasonal model from known coefficients.
    pub fn with_coefficients(d: usize, phi: Vec<f64>, theta: Vec<f64>, mu: f64) -> Self {
        let mut s = Self::new(phi.len(), d, theta.len());
        s.phi = phi;
        s.theta = theta;
        s.mu = mu;
        s.fitted = true;
        s
    }

    fn check_shapes(&self) -> Result<()> {
        if self.phi.len() != self.p
            || self.theta.len() != self.q
            || self.sphi.len() != self.sp
            || self.stheta.len() != self.sq
        {
            return Err(StatsError::domain("arima coefficient lengths disagree with orders"));
        }
        if self.m == 0 && (self.sp + self.sd + self.sq) > 0 {
            return Err(StatsError::domain("seasonal orders need a season length"));
        }
        Ok(())
    }

    /// Expanded AR coefficients `a_1..` of `(1 − Σφ B^i)(1 − ΣΦ B^{jm})`.
    pub fn ar_expanded(&self) -> Vec<f64> {
        let poly = poly_mul(&ar_poly(&self.phi, 1), &ar_poly(&self.sphi, self.m.max(1)));
        poly[1..].iter().map(|c| -c).collect()
    }

    /// Expanded MA coefficients `b_1..` of `(1 + Σθ B^i)(1 + ΣΘ B^{jm})`.
    pub fn ma_expanded(&self) -> Vec<f64> {
        let poly = poly_mul(&ma_poly(&self.theta, 1), &ma_poly(&self.stheta, self.m.max(1)));
        poly[1..].to_vec()
    }

    fn lags(&self) -> Vec<usize> {
        let mut l = vec![1; self.d];
        l.extend(std::iter::repeat(self.m).take(self.sd));
        l
    }

    /// Whether the expanded AR polynomial has all roots outside the unit
    /// circle.
    pub fn is_stationary(&self) -> bool {
        roots_outside_unit_circle(self.ar_expanded())
    }

    /// Whether the expanded MA polynomial has all roots outside the unit
    /// circle.
    pub fn is_invertible(&self) -> bool {
        roots_outside_unit_circle(self.ma_expanded().iter().map(|b| -b).collect())
    }
}

/// Levinson step-down on the reflection coefficients of `1 − Σ a_k B^k`.
fn roots_outside_unit_circle(mut a: Vec<f64>) -> bool {
    while a.last() == Some(&0.0) {
        a.pop();
    }
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let n = a.len();
        let denom = 1.0 - k * k;
        a = (0..n - 1).map(|j| (a[j] + k * a[n - 2 - j]) / denom).collect();
    }
    true
}

fn ar_poly(coef: &[f64], lag: usize) -> Vec<f64> {
    let mut p = vec![0.0; coef.len() * lag + 1];
    p[0] = 1.0;
    for (i, c) in coef.iter().enumerate() {
        p[(i + 1) * lag] = -c;
    }
    p
}

fn ma_poly(coef: &[f64], lag: usize) -> Vec<f64> {
    let mut p = vec![0.0; coef.len() * lag + 1];
    p[0] = 1.0;
    for (i, c) in coef.iter().enumerate() {
        p[(i + 1) * lag] = *c;
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn difference(x: &[f64], lag: usize) -> Vec<f64> {
    (lag..x.len()).map(|t| x[t] - x[t - lag]).collect()
}

/// Optimizer settings for the CSS fit.
#[derive(Debug, Clone, Copy)]
pub struct CssOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
}

impl Default for CssOptions {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            grad_tol: 1e-8,
            rel_tol: 1e-13,
        }
    }
}

/// Result of a CSS fit with the per-iteration loss trace.
#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    /// Mean squared one-step residual on the standardized differenced scale,
    /// one entry per accepted iterate (including the start).
    pub loss_history: Vec<f64>,
}

/// Conditional sum of squares problem on the standardized differenced series.
struct Css<'a> {
    z: &'a [f64],
    spec: &'a ArimaSpec,
}

impl Css<'_> {
    fn n_params(&self) -> usize {
        self.spec.p + self.spec.sp + self.spec.q + self.spec.sq + 1
    }

    fn unpack(&self, x: &[f64]) -> ArimaSpec {
        let s = self.spec;
        let mut out = s.clone();
        let mut k = 0;
        out.phi = x[k..k + s.p].to_vec();
        k += s.p;
        out.sphi = x[k..k + s.sp].to_vec();
        k += s.sp;
        out.theta = x[k..k + s.q].to_vec();
        k += s.q;
        out.stheta = x[k..k + s.sq].to_vec();
        out
    }

    /// Mean squared residual and its gradient.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s = self.spec;
        let cur = self.unpack(x);
        let c = x[x.len() - 1];
        let m = s.m.max(1);
        let ar1 = ar_poly(&cur.phi, 1);
        let ar_s = ar_poly(&cur.sphi, m);
        let ma1 = ma_poly(&cur.theta, 1);
        let ma_s = ma_poly(&cur.stheta, m);
        let a: Vec<f64> = poly_mul(&ar1, &ar_s)[1..].iter().map(|v| -v).collect();
        let b: Vec<f64> = poly_mul(&ma1, &ma_s)[1..].to_vec();
        let np = self.n_params();

        // da[param][k], db[param][k] (index k-1 for lag k)
        let mut da = vec![vec![0.0; a.len()]; np];
        let mut db = vec![vec![0.0; b.len()]; np];
        let mut pi = 0;
        for i in 1..=s.p {
            for (r, v) in ar_s.iter().enumerate() {
                if i + r >= 1 && i + r - 1 < a.len() {
                    da[pi][i + r - 1] = *v;
                }
            }
            pi += 1;
        }
        for j in 1..=s.sp {
            for (r, v) in ar1.iter().enumerate() {
                let k = j * m + r;
                if k - 1 < a.len() {
                    da[pi][k - 1] = *v;
                }
            }
            pi += 1;
        }
        for i in 1..=s.q {
            for (r, v) in ma_s.iter().enumerate() {
                if i + r - 1 < b.len() {
                    db[pi][i + r - 1] = *v;
                }
            }
            pi += 1;
        }
        for j in 1..=s.sq {
            for (r, v) in ma1.iter().enumerate() {
                let k = j * m + r;
                if k - 1 < b.len() {
                    db[pi][k - 1] = *v;
                }
            }
            pi += 1;
        }
        let ci = np - 1;
        let sum_a: f64 = a.iter().sum();

        let z = self.z;
        let n = z.len();
        let start = a.len();
        let mut e = vec![0.0; n];
        let mut de = vec![vec![0.0; np]; n];
        let mut sse = 0.0;
        let mut grad = vec![0.0; np];
        for t in start..n {
            let mut et = z[t] - c;
            for (k, ak) in a.iter().enumerate() {
                et -= ak * (z[t - k - 1] - c);
            }
            for (k, bk) in b.iter().enumerate() {
                if t > k {
                    et -= bk * e[t - k - 1];
                }
            }
            e[t] = et;
            let mut d = vec![0.0; np];
            for (p, dp) in d.iter_mut().enumerate() {
                let mut v = 0.0;
                for (k, dak) in da[p].iter().enumerate() {
                    if *dak != 0.0 {
                        v -= dak * (z[t - k - 1] - c);
                    }
                }
                for (k, dbk) in db[p].iter().enumerate() {
                    if *dbk != 0.0 && t > k {
                        v -= dbk * e[t - k - 1];
                    }
                }
                if p == ci {
                    v += -1.0 + sum_a;
                }
                for (k, bk) in b.iter().enumerate() {
                    if t > k {
                        v -= bk * de[t - k - 1][p];
                    }
                }
                *dp = v;
            }
            sse += et * et;
            for p in 0..np {
                grad[p] += 2.0 * et * d[p];
            }
            de[t] = d;
        }
        let cnt = (n - start) as f64;
        (sse / cnt, grad.into_iter().map(|g| g / cnt).collect())
    }
}

pub fn arima_fit(series: &[f64], spec: &ArimaSpec) -> Result<ArimaSpec> {
    Ok(arima_fit_traced(series, spec, CssOptions::default())?.spec)
}

/// CSS fit by gradient descent with Barzilai-Borwein step proposals and
/// Armijo backtracking, so the recorded loss never increases.
pub fn arima_fit_traced(series: &[f64], spec: &ArimaSpec, opts: CssOptions) -> Result<ArimaFit> {
    spec.check_shapes()?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::domain("arima input must be finite"));
    }
    let mut w = series.to_vec();
    for lag in spec.lags() {
        if w.len() <= lag {
            return Err(StatsError::domain("series too short for the differencing orders"));
        }
        w = difference(&w, lag);
    }
    let ar_order = spec.p + spec.sp * spec.m;
    let ma_order = spec.q + spec.sq * spec.m;
    if w.len() < ar_order.max(ma_order) + 2 {
        return Err(StatsError::domain(format!(
            "{} observations left after differencing; need at least {}",
            w.len(),
            ar_order.max(ma_order) + 2
        )));
    }
    let wm = mean(&w);
    let ws = std_dev(&w);
    let mut out = spec.clone();
    out.fitted = true;
    if ws <= 1e-12 * (1.0 + wm.abs()) {
        // constant after differencing: pure mean model
        out.phi = vec![0.0; spec.p];
        out.theta = vec![0.0; spec.q];
        out.sphi = vec![0.0; spec.sp];
        out.stheta = vec![0.0; spec.sq];
        out.mu = wm;
        return Ok(ArimaFit {
            spec: out,
            loss_history: vec![0.0],
        });
    }
    let z: Vec<f64> = w.iter().map(|v| (v - wm) / ws).collect();
    let css = Css { z: &z, spec };
    let np = css.n_params();
    let mut x = vec![0.0; np];
    let (mut loss, mut g) = css.eval(&x);
    let mut history = vec![loss];
    let mut step = 0.1;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() <= opts.grad_tol {
            converged = true;
            break;
        }
        let mut eta = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - eta * gi).collect();
            // the residual recursion diverges outside the invertible region
            if !css.unpack(&cand).is_invertible() {
                eta *= 0.5;
                continue;
            }
            let (l2, g2) = css.eval(&cand);
            if l2.is_finite() && l2 <= loss - 1e-4 * eta * gnorm2 {
                accepted = Some((cand, l2, g2));
                break;
            }
            eta *= 0.5;
        }
        let Some((nx, nl, ng)) = accepted else {
            converged = true;
            break;
        };
        let sv: Vec<f64> = nx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = sv.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss: f64 = sv.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-6, 10.0) } else { eta * 2.0 };
        let rel = (loss - nl) / (1.0 + loss);
        x = nx;
        loss = nl;
        g = ng;
        history.push(loss);
        if rel <= opts.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(StatsError::Convergence {
            iterations: opts.max_iter,
            loss,
        });
    }
    let fitted = css.unpack(&x);
    out.phi = fitted.phi;
    out.sphi = fitted.sphi;
    out.theta = fitted.theta;
    out.stheta = fitted.stheta;
    let c = x[np - 1];
    let sum_a: f64 = out.ar_expanded().iter().sum();
    out.mu = (wm + ws * c) * (1.0 - sum_a);
    if !out.is_stationary() {
        log::warn!("fitted AR polynomial is not stationary: phi={:?} sphi={:?}", out.phi, out.sphi);
    }
    Ok(ArimaFit {
        spec: out,
        loss_history: history,
    })
}

/// Iterated one-step forecasts with future shocks at zero, integrated back
/// through the seasonal and regular differences.
pub fn arima_forecast(fitted: &ArimaSpec, series: &[f64], h: usize) -> Result<Vec<f64>> {
    if !fitted.fitted {
        return Err(StatsError::domain("arima model has no fitted coefficients"));
    }
    fitted.check_shapes()?;
    let mut stages: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut w = series.to_vec();
    for lag in fitted.lags() {
        if w.len() <= lag {
            return Err(StatsError::domain("series too short for the differencing orders"));
        }
        let next = difference(&w, lag);
        stages.push((w, lag));
        w = next;
    }
    let a = fitted.ar_expanded();
    let b = fitted.ma_expanded();
    let n = w.len();
    let start = a.len();
    let mut e = vec![0.0; n];
    for t in start.min(n)..n {
        let mut et = w[t] - fitted.mu;
        for (k, ak) in a.iter().enumerate() {
            et -= ak * w[t - k - 1];
        }
        for (k, bk) in b.iter().enumerate() {
            if t > k {
                et -= bk * e[t - k - 1];
            }
        }
        e[t] = et;
    }
    let mut ext = w.clone();
    e.resize(n + h, 0.0);
    for step in 0..h {
        let t = n + step;
        let mut v = fitted.mu;
        for (k, ak) in a.iter().enumerate() {
            if t > k {
                v += ak * ext[t - k - 1];
            }
        }
        for (k, bk) in b.iter().enumerate() {
            if t > k {
                v += bk * e[t - k - 1];
            }
        }
        ext.push(v);
    }
    let mut fc: Vec<f64> = ext[n..].to_vec();
    for (base, lag) in stages.into_iter().rev() {
        let mut full = base;
        let len0 = full.len();
        for v in &fc {
            let prev = full[full.len() - lag];
            full.push(v + prev);
        }
        fc = full[len0..].to_vec();
    }
    Ok(fc)
}

/// Stable names of the candidate methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ma,
    Wma,
    Ets,
    Arima,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ma, Method::Wma, Method::Ets, Method::Arima];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ma => "ma",
            Method::Wma => "wma",
            Method::Ets => "ets",
            Method::Arima => "arima",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StatsError::domain(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub ma_window: usize,
    pub wma_window: usize,
    pub season: usize,
    pub arima: ArimaSpec,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            ma_window: 7,
            wma_window: 7,
            season: 7,
            arima: ArimaSpec::default_daily(),
        }
    }
}

/// Fits `method` on the history and returns `h` point forecasts.
pub fn forecast_method(method: Method, history: &[f64], h: usize, cfg: &MethodConfig) -> Result<Vec<f64>> {
    match method {
        Method::Ma => Ok(vec![ma_forecast(history, cfg.ma_window)?; h]),
        Method::Wma => Ok(vec![wma_forecast(history, cfg.wma_window)?; h]),
        Method::Ets => Ok(ets_grid_fit(history, cfg.season)?.forecast(h)),
        Method::Arima => {
            let fit = arima_fit(history, &cfg.arima)?;
            arima_forecast(&fit, history, h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn invertibility_of_expanded_ma() {
        assert!(ArimaSpec::with_coefficients(0, vec![], vec![0.9], 0.0).is_invertible());
        assert!(!ArimaSpec::with_coefficients(0, vec![], vec![-1.2], 0.0).is_invertible());
        // 1 + 2.5B + B^2 = (1 + 2B)(1 + 0.5B) has a root inside the circle
        assert!(!ArimaSpec::with_coefficients(0, vec![], vec![2.5, 1.0], 0.0).is_invertible());
    }

    #[test]
    fn overdifferenced_white_noise_stays_invertible() {
        // white noise around a weekly pattern; the regular difference pushes
        // the MA term to the unit circle
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = Normal::new(0.0, 1.0).unwrap();
        let shape = [0.0, 1.0, 0.5, -0.3, -1.0, -0.7, 0.5];
        for k in 0..8 {
            let s: Vec<f64> = (0..120).map(|t| 40.0 + 10.0 * shape[t % 7] + e.sample(&mut rng)).collect();
            let fit = arima_fit(&s, &ArimaSpec::default_daily()).unwrap_or_else(|e| panic!("series {k}: {e}"));
            assert!(fit.is_invertible());
            assert!(arima_forecast(&fit, &s, 7).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| nd.sample(&mut rng)).collect()
    }

    #[test]
    fn moving_averages() {
        assert_eq!(ma_forecast(&[1.0, 2.0, 3.0], 3).unwrap(), 2.0);
        assert_eq!(ma_forecast(&[4.0], 1).unwrap(), 4.0);
        assert!(ma_forecast(&[1.0], 0).is_err());
        assert!(ma_forecast(&[1.0], 2).is_err());
        assert_abs_diff_eq!(wma_forecast(&[1.0, 2.0, 3.0], 3).unwrap(), 14.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            wma_forecast_with(&[1.0, 2.0, 3.0], 3, WmaScaling::Printed).unwrap(),
            28.0 / 18.0,
            epsilon = 1e-12
        );
        assert!(wma_forecast(&[1.0, 2.0], 1).is_err());
        assert_eq!(wma_forecast(&[0.3; 9], 7).unwrap(), 0.3);
    }

    #[test]
    fn ets_constant_series_exact() {
        let y = vec![12.5; 40];
        for p in [EtsParams::new(0.1, 0.9, 0.5).unwrap(), EtsParams::new(1.0, 0.0, 1.0).unwrap()] {
            let f = ets_fit_forecast(&y, 7, p, 10).unwrap();
            assert!(f.iter().all(|v| *v == 12.5), "{f:?}");
        }
    }

    #[test]
    fn ets_reproduces_seasonal_pattern() {
        let pattern = [3.0, -1.0, 4.0, 1.0, -5.0];
        let y: Vec<f64> = (0..50).map(|t| 20.0 + pattern[t % 5]).collect();
        let f = ets_fit_forecast(&y, 5, EtsParams::new(0.3, 0.1, 1.0).unwrap(), 12).unwrap();
        for (k, v) in f.iter().enumerate() {
            assert_abs_diff_eq!(*v, 20.0 + pattern[(50 + k) % 5], epsilon = 1e-9);
        }
    }

    #[test]
    fn ets_follows_linear_trend() {
        let y: Vec<f64> = (0..60).map(|t| 2.0 * t as f64).collect();
        let f = ets_fit_forecast(&y, 7, EtsParams::new(0.5, 0.95, 0.1).unwrap(), 10).unwrap();
        let last = y[59];
        for (k, v) in f.iter().enumerate() {
            let want = last + 2.0 * (k + 1) as f64;
            assert!((v - want).abs() <= 0.05 * want, "h={} got {v} want {want}", k + 1);
        }
    }

    #[test]
    fn ets_needs_two_seasons() {
        assert!(ets_fit(&[1.0; 13], 7, EtsParams::new(0.5, 0.5, 0.5).unwrap()).is_err());
        assert!(EtsParams::new(1.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn arima_recovers_ar1() {
        let eps = gaussian(600, 11);
        let mut y = vec![0.0; 600];
        for t in 1..600 {
            y[t] = 0.8 * y[t - 1] + eps[t];
        }
        let fit = arima_fit(&y[100..], &ArimaSpec::new(1, 0, 0)).unwrap();
        assert!((fit.phi[0] - 0.8).abs() < 0.1, "phi={}", fit.phi[0]);
    }

    #[test]
    fn arima_white_noise() {
        let y = gaussian(500, 5);
        let fit = arima_fit(&y, &ArimaSpec::new(1, 0, 0)).unwrap();
        assert!(fit.phi[0].abs() < 0.1, "phi={}", fit.phi[0]);
    }

    #[test]
    fn arima_differenced_ramp() {
        let y: Vec<f64> = (1..=30).map(f64::from).collect();
        let fit = arima_fit(&y, &ArimaSpec::new(1, 1, 0)).unwrap();
        assert_abs_diff_eq!(fit.mu, 1.0, epsilon = 1e-9);
        let rw = arima_fit(&[1.0, 2.0, 3.0], &ArimaSpec::new(0, 1, 0)).unwrap();
        let f = arima_forecast(&rw, &[1.0, 2.0, 3.0], 3).unwrap();
        for (a, b) in f.iter().zip([4.0, 5.0, 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn arima_forecast_examples() {
        let m = ArimaSpec::with_coefficients(0, vec![], vec![], 7.0);
        assert_eq!(arima_forecast(&m, &[1.0, 2.0], 3).unwrap(), vec![7.0; 3]);
        let ar = ArimaSpec::with_coefficients(0, vec![0.5], vec![], 0.0);
        let f = arima_forecast(&ar, &[3.0, 8.0], 3).unwrap();
        assert_eq!(f, vec![4.0, 2.0, 1.0]);
        let f = arima_forecast(&ar, &[3.0, 8.0], 80).unwrap();
        assert!(f[79].abs() < 1e-20);
    }

    #[test]
    fn css_gradient_matches_finite_differences() {
        let eps = gaussian(120, 3);
        let mut z = vec![0.0; 120];
        for t in 8..120 {
            z[t] = 0.4 * z[t - 1] + eps[t] + 0.3 * eps[t - 1] - 0.2 * eps[t - 7];
        }
        let spec = ArimaSpec::new(1, 0, 1).seasonal(1, 0, 1, 7);
        let css = Css { z: &z, spec: &spec };
        let x = [0.3, -0.1, 0.2, -0.15, 0.05];
        let (_, g) = css.eval(&x);
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (css.eval(&xp).0 - css.eval(&xm).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn css_loss_nonincreasing_on_default_orders() {
        let eps = gaussian(200, 17);
        let y: Vec<f64> = (0..200)
            .map(|t| 50.0 + 0.1 * t as f64 + 5.0 * ((t % 7) as f64 - 3.0) + eps[t])
            .collect();
        let fit = arima_fit_traced(&y, &ArimaSpec::default_daily(), CssOptions::default()).unwrap();
        for w in fit.loss_history.windows(2) {
            assert!(w[1] <= w[0], "{w:?}");
        }
        let f = arima_forecast(&fit.spec, &y, 14).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        // weekly pattern carried forward
        assert!((f[7] - f[0] - 0.7).abs() < 2.0);
    }

    #[test]
    fn stationarity_step_down() {
        assert!(ArimaSpec::with_coefficients(0, vec![0.5], vec![], 0.0).is_stationary());
        assert!(!ArimaSpec::with_coefficients(0, vec![1.1], vec![], 0.0).is_stationary());
        // roots of 1 - 1.5B + 0.56B^2 are 1/0.7 and 1/0.8
        assert!(ArimaSpec::with_coefficients(0, vec![1.5, -0.56], vec![], 0.0).is_stationary());
        // 1 - 1.5B - 0.5B^2 has a root inside the unit circle
        assert!(!ArimaSpec::with_coefficients(0, vec![1.5, 0.5], vec![], 0.0).is_stationary());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("prophet").is_err());
    }

    proptest! {
        #[test]
        fn averages_shift_equivariant(v in prop::collection::vec(-100.0f64..100.0, 7..20), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = ma_forecast(&v, 5).unwrap();
            let b = ma_forecast(&shifted, 5).unwrap();
            prop_assert!((a + c - b).abs() < 1e-9);
            let a = wma_forecast(&v, 5).unwrap();
            let b = wma_forecast(&shifted, 5).unwrap();
            prop_assert!((a + c - b).abs() < 1e-9);
        }

        #[test]
        fn ets_constant_any_params(c in -1e3f64..1e3, a in 0.0f64..=1.0, b in 0.0f64..=1.0, g in 0.0f64..=1.0) {
            let f = ets_fit_forecast(&[c; 21], 7, EtsParams::new(a, b, g).unwrap(), 9).unwrap();
            prop_assert!(f.iter().all(|v| *v == c));
        }
    }
}
