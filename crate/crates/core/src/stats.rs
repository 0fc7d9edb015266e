//! Numeric primitives: Pearson correlation, least squares, asymmetric-loss
//! linear regression, the weighted residual-spread offset, and percentiles.
//!
//! All functions are pure, take plain `f64` samples (byte counts convert
//! losslessly below 2^53), and accumulate sums in index order so results
//! are reproducible bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::MemBytes;

/// A fitted line `y = a * x + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: f64,
    pub b: f64,
}

impl LinearModel {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// Knobs for [`asymmetric_fit`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Weight on positive residuals of the fitted line (overpredictions);
    /// underpredictions always weigh 1. Must lie in (0, 1].
    pub lambda: f64,
    pub max_iterations: u32,
    /// Relative loss-improvement threshold that declares convergence.
    pub rel_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 1.0 / 50.0,
            max_iterations: 10_000,
            rel_tolerance: 1e-9,
        }
    }
}

/// Outcome of [`asymmetric_fit`]; `converged` is a warning flag, the model
/// is the best iterate either way.
#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    pub model: LinearModel,
    pub loss: f64,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("input lengths differ: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("all x values are equal; no line is determined")]
    DegenerateX,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidConfig(&'static str),
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch { x: xs.len(), y: ys.len() });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples { got: xs.len(), need: 2 });
    }
    Ok(())
}

/// Pearson correlation coefficient; 0 when either variance is zero.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mut sx = 0.0;
    for x in xs {
        sx += x;
    }
    let mut sy = 0.0;
    for y in ys {
        sy += y;
    }
    let mx = sx / n;
    let my = sy / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<LinearModel, StatsError> {
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sw += w;
        swx += w * x;
        swy += w * y;
    }
    let mx = swx / sw;
    let my = swy / sw;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        let dx = x - mx;
        num += w * dx * (y - my);
        den += w * dx * dx;
    }
    if den == 0.0 {
        return Err(StatsError::DegenerateX);
    }
    let a = num / den;
    Ok(LinearModel { a, b: my - a * mx })
}

/// Ordinary least squares.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<LinearModel, StatsError> {
    check_pair(xs, ys)?;
    let ones = vec![1.0; xs.len()];
    weighted_linear_fit(xs, ys, &ones)
}

/// Sum of squared residuals where positive residuals (actual above the
/// line) count fully and non-positive ones are scaled by `lambda`.
pub fn asymmetric_loss(xs: &[f64], ys: &[f64], model: &LinearModel, lambda: f64) -> f64 {
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - model.eval(*x);
        let e = r * r;
        loss += if r > 0.0 { e } else { lambda * e };
    }
    loss
}

/// Minimizes the asymmetric squared loss over (a, b).
///
/// Starts at the least-squares solution and iterates reweighted
/// least-squares solves (weight 1 on points above the current line,
/// `lambda` on the rest), halving the step whenever a solve overshoots.
/// The loss is convex, every accepted step decreases it, and the result
/// never exceeds the least-squares loss.
pub fn asymmetric_fit(xs: &[f64], ys: &[f64], cfg: &FitConfig) -> Result<FitResult, StatsError> {
    check_pair(xs, ys)?;
    if cfg.lambda.is_nan() || cfg.lambda <= 0.0 || cfg.lambda > 1.0 {
        return Err(StatsError::InvalidConfig("lambda must lie in (0, 1]"));
    }
    if cfg.rel_tolerance.is_nan() || cfg.rel_tolerance <= 0.0 {
        return Err(StatsError::InvalidConfig("rel_tolerance must be positive"));
    }
    if cfg.max_iterations == 0 {
        return Err(StatsError::InvalidConfig("max_iterations must be positive"));
    }

    let ones = vec![1.0; xs.len()];
    let ols = weighted_linear_fit(xs, ys, &ones)?;
    let mut cur = ols;
    let mut cur_loss = asymmetric_loss(xs, ys, &cur, cfg.lambda);
    let mut iterations = 0;
    let mut converged = cur_loss == 0.0;

    let mut ws = vec![0.0; xs.len()];
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
            let r = y - cur.eval(*x);
            ws[i] = if r > 0.0 { 1.0 } else { cfg.lambda };
        }
        let cand = weighted_linear_fit(xs, ys, &ws)?;
        let mut next = cand;
        let mut next_loss = asymmetric_loss(xs, ys, &next, cfg.lambda);
        if next_loss.is_nan() || next_loss > cur_loss {
            // The reweighted quadratic is not a global bound on the loss,
            // so a full solve can overshoot; shrink the step until it helps.
            let mut t = 0.5;
            let mut improved = false;
            for _ in 0..30 {
                let m = LinearModel {
                    a: cur.a + t * (cand.a - cur.a),
                    b: cur.b + t * (cand.b - cur.b),
                };
                let l = asymmetric_loss(xs, ys, &m, cfg.lambda);
                if l < cur_loss {
                    next = m;
                    next_loss = l;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                converged = true;
                break;
            }
        }
        let drop = cur_loss - next_loss;
        cur = next;
        cur_loss = next_loss;
        if cur_loss == 0.0 || drop <= cfg.rel_tolerance * cur_loss {
            converged = true;
        }
    }

    Ok(FitResult { model: cur, loss: cur_loss, iterations, converged })
}

/// Twice the weighted spread of the model residuals, rounded up to whole
/// bytes; 0 when the weighted variance or its denominator degenerates.
///
/// Weights fall off linearly with the distance of each `x_i` from the
/// query point `x_n`, normalised by the largest input seen (including
/// `x_n`), plus a small constant term below ten samples so every point
/// keeps nonzero weight.
pub fn weighted_offset(
    xs: &[f64],
    ys: &[f64],
    model: &LinearModel,
    x_n: f64,
) -> Result<MemBytes, StatsError> {
    check_pair(xs, ys)?;
    let count = xs.len() as f64;
    let mut d_max = x_n;
    for x in xs {
        if *x > d_max {
            d_max = *x;
        }
    }
    let extra = (1.0 - count / 10.0).max(0.0) / 100.0;
    let ws: Vec<f64> = xs
        .iter()
        .map(|x| {
            let frac = if d_max > 0.0 { (x - x_n).abs() / d_max } else { 0.0 };
            1.0 - frac + extra
        })
        .collect();
    let ds: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| model.eval(*x) - y).collect();

    let mut v1 = 0.0;
    for w in &ws {
        v1 += w;
    }
    let mut v2 = 0.0;
    for w in &ws {
        v2 += w * w;
    }
    if v1 <= 0.0 {
        return Ok(MemBytes::ZERO);
    }
    let mut m = 0.0;
    for (w, d) in ws.iter().zip(&ds) {
        m += d * w;
    }
    m /= v1;
    let mut num = 0.0;
    for (w, d) in ws.iter().zip(&ds) {
        let dev = d - m;
        num += w * dev * dev;
    }
    let denom = v1 - v2 / v1;
    if denom <= 0.0 {
        return Ok(MemBytes::ZERO);
    }
    let rad = num / denom;
    if rad <= 0.0 {
        return Ok(MemBytes::ZERO);
    }
    Ok(MemBytes::from_f64_ceil(2.0 * rad.sqrt()))
}

/// Unbiased sample standard deviation (denominator n - 1).
pub fn sample_stddev(vals: &[f64]) -> Result<f64, StatsError> {
    if vals.len() < 2 {
        return Err(StatsError::TooFewSamples { got: vals.len(), need: 2 });
    }
    let n = vals.len() as f64;
    let mut s = 0.0;
    for v in vals {
        s += v;
    }
    let mean = s / n;
    let mut ss = 0.0;
    for v in vals {
        let d = v - mean;
        ss += d * d;
    }
    Ok((ss / (n - 1.0)).sqrt())
}

/// Nearest-rank percentile: sort ascending, take the element at index
/// ceil(p/100 * n) - 1.
pub fn percentile(values: &[MemBytes], p: f64) -> Result<MemBytes, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(StatsError::InvalidConfig("percentile must lie in (0, 100]"));
    }
    let mut sorted: Vec<u64> = values.iter().map(|v| v.0).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    // Multiply before dividing so integral percentiles stay exact in f64.
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    let idx = rank.clamp(1, n) - 1;
    Ok(MemBytes(sorted[idx]))
}
