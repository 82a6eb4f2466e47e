//! Least-squares fits for the three model shapes the estimators need:
//! a saturating curve, a decaying power law, and a growing power law.
//!
//! All three are nonlinear in a single exponent only, which makes variable
//! projection the natural solver: for each candidate exponent the remaining
//! parameters are a linear least-squares problem with a closed form, so the
//! outer search is a one-dimensional minimization of the projected residual.
//! That search is a coarse scan over the admissible exponent interval
//! followed by golden-section refinement, which is immune to the flat,
//! non-convex residual landscapes these data sets produce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of scan points across the exponent interval before refinement.
const SCAN_POINTS: usize = 64;
/// Final width of the golden-section bracket. Small enough that exponent
/// placement error no longer shows in the recovered coefficients.
const GOLDEN_WIDTH: f64 = 1e-8;

/// Fitted saturating model y = c1 - c1' h^beta1.
///
/// `c1` is the predicted plateau, the quantity of interest downstream;
/// `beta1` the approach rate. `residual_rms` is measured over the pairs the
/// fit actually used.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SaturatingFit {
    pub c1: f64,
    pub c1_prime: f64,
    pub beta1: f64,
    pub residual_rms: f64,
}

/// Fitted decaying power law y = c2 h^beta2.
///
/// The exponent comes from an ordinary log-log slope; the coefficient is then
/// raised until the curve dominates every observed pair, so the fit can be
/// used as an envelope in tail-sum bounds. `residual_rms_log` is the scatter
/// of log y around the fitted slope line, before the envelope shift.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub c2: f64,
    pub beta2: f64,
    pub residual_rms_log: f64,
}

/// Fitted growing power law y = a h^(-gamma), used to test whether a norm
/// sequence is blowing up rather than saturating.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthFit {
    pub amplitude: f64,
    pub gamma: f64,
    pub residual_rms: f64,
}

fn validate_pairs(h: &[f64], y: &[f64], min_len: usize, what: &str) -> Result<()> {
    if h.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{what}: {} abscissae vs {} ordinates",
            h.len(),
            y.len()
        )));
    }
    if h.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {min_len} pairs, got {}",
            h.len()
        )));
    }
    if h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!("{what}: abscissae must be positive")));
    }
    if h.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(format!(
            "{what}: abscissae must be strictly decreasing (coarse to fine)"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: ordinates must be finite")));
    }
    Ok(())
}

/// Coarsest pairs sacrificed before fitting: up to two, but never so many
/// that fewer than `floor` remain.
fn head_drop(n: usize, floor: usize) -> usize {
    n.saturating_sub(floor).min(2)
}

/// Golden-section minimization of `f` on [a, b] down to GOLDEN_WIDTH.
/// `f` may return infinity for infeasible arguments.
fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > GOLDEN_WIDTH {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Fits y ~ c1 - c1' h^beta on (h, y) pairs ordered coarse to fine.
///
/// The exponent is searched over `beta_range`. For each candidate the linear
/// pair (c1, c1') has a closed form; candidates with a nonpositive slope
/// coefficient, or a plateau below the largest observed ordinate, are
/// rejected outright. For an increasing sequence of lower bounds a plateau
/// under an observation is self-contradictory, and rejecting it is what
/// keeps the fit honest on pre-asymptotic data.
///
/// At least four pairs are required. Up to two of the coarsest pairs are
/// dropped before fitting (keeping at least four), since the coarsest levels
/// are the furthest from the asymptotic regime the model describes.
pub fn fit_saturating(h: &[f64], y: &[f64], beta_range: (f64, f64)) -> Result<SaturatingFit> {
    validate_pairs(h, y, 4, "saturating fit")?;
    let (lo, hi) = beta_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!(
            "exponent range ({lo}, {hi}] is not a positive interval"
        )));
    }
    let n = h.len();
    let drop = head_drop(n, 4);
    let hk = &h[drop..];
    let yk = &y[drop..];
    let y_max_all = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Projected linear solve at a fixed exponent. None when infeasible.
    let solve = |beta: f64| -> Option<(f64, f64, f64)> {
        let m = hk.len() as f64;
        let mut s_g = 0.0;
        let mut s_gg = 0.0;
        let mut s_y = 0.0;
        let mut s_gy = 0.0;
        for (&hv, &yv) in hk.iter().zip(yk) {
            let g = hv.powf(beta);
            s_g += g;
            s_gg += g * g;
            s_y += yv;
            s_gy += g * yv;
        }
        let det = m * s_gg - s_g * s_g;
        if det <= 0.0 {
            return None;
        }
        let c1 = (s_gg * s_y - s_g * s_gy) / det;
        let c1p = (s_g * s_y - m * s_gy) / det;
        if c1p <= 0.0 || c1 < y_max_all - 1e-9 {
            return None;
        }
        let mut rss = 0.0;
        for (&hv, &yv) in hk.iter().zip(yk) {
            let r = yv - (c1 - c1p * hv.powf(beta));
            rss += r * r;
        }
        Some((c1, c1p, rss))
    };

    let mut best: Option<(usize, f64)> = None;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    for i in 0..SCAN_POINTS {
        let beta = lo + step * i as f64;
        if let Some((_, _, rss)) = solve(beta) {
            if best.map_or(true, |(_, b)| rss < b) {
                best = Some((i, rss));
            }
        }
    }
    let (i0, _) = best.ok_or_else(|| {
        Error::InsufficientData("no feasible saturating fit in the exponent range".into())
    })?;
    let a = lo + step * i0.saturating_sub(1) as f64;
    let b = lo + step * (i0 + 1).min(SCAN_POINTS - 1) as f64;
    let objective = |t: f64| solve(t).map_or(f64::INFINITY, |(_, _, rss)| rss);
    let mut beta = golden_min(a, b, objective);
    let mut params = solve(beta);
    if params.is_none() {
        beta = lo + step * i0 as f64;
        params = solve(beta);
    }
    let (c1, c1p, rss) = params.expect("grid winner must stay feasible");
    Ok(SaturatingFit {
        c1,
        c1_prime: c1p,
        beta1: beta,
        residual_rms: (rss / hk.len() as f64).sqrt(),
    })
}

/// Fits y ~ c2 h^beta2 on positive pairs ordered coarse to fine.
///
/// The slope comes from ordinary least squares in log-log coordinates; the
/// coefficient is then the smallest value such that c2 h^beta2 >= y on every
/// pair, dropped or not. Up to two of the coarsest pairs are excluded from
/// the slope (keeping at least three, falling back to all for tiny inputs).
/// Constant ordinates yield slope zero and coefficient equal to the level.
pub fn fit_powerlaw(h: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    validate_pairs(h, y, 1, "power-law fit")?;
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("power-law fit needs positive ordinates".into()));
    }
    let n = h.len();
    let drop = head_drop(n, 3);
    let hk = &h[drop..];
    let yk = &y[drop..];
    let m = hk.len() as f64;
    let lh: Vec<f64> = hk.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = yk.iter().map(|v| v.ln()).collect();
    let mh = lh.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (a, b) in lh.iter().zip(&ly) {
        cov += (a - mh) * (b - my);
        var += (a - mh) * (a - mh);
    }
    let beta2 = if var > 0.0 { cov / var } else { 0.0 };
    let intercept = my - beta2 * mh;
    // Envelope: raise the line until it clears every observation, dropped
    // pairs included, so the curve never understates an increment.
    let c2 = h
        .iter()
        .zip(y)
        .map(|(&hv, &yv)| yv * hv.powf(-beta2))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut rss = 0.0;
    for (a, b) in lh.iter().zip(&ly) {
        let r = b - (intercept + beta2 * a);
        rss += r * r;
    }
    Ok(PowerLawFit { c2, beta2, residual_rms_log: (rss / m).sqrt() })
}

/// Fits y ~ a h^(-gamma) with a > 0, gamma in `gamma_range`, by the same
/// scan-then-refine search as the saturating fit. Infeasible when no
/// positive amplitude fits, which happens only for pathological ordinates.
pub fn fit_growth(h: &[f64], y: &[f64], gamma_range: (f64, f64)) -> Result<GrowthFit> {
    validate_pairs(h, y, 4, "growth fit")?;
    let (lo, hi) = gamma_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!(
            "exponent range ({lo}, {hi}] is not a positive interval"
        )));
    }
    let n = h.len();
    let drop = head_drop(n, 4);
    let hk = &h[drop..];
    let yk = &y[drop..];

    let solve = |gamma: f64| -> Option<(f64, f64)> {
        let mut s_py = 0.0;
        let mut s_pp = 0.0;
        for (&hv, &yv) in hk.iter().zip(yk) {
            let p = hv.powf(-gamma);
            s_py += p * yv;
            s_pp += p * p;
        }
        if s_pp <= 0.0 {
            return None;
        }
        let a = s_py / s_pp;
        if a <= 0.0 {
            return None;
        }
        let mut rss = 0.0;
        for (&hv, &yv) in hk.iter().zip(yk) {
            let r = yv - a * hv.powf(-gamma);
            rss += r * r;
        }
        Some((a, rss))
    };

    let mut best: Option<(usize, f64)> = None;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    for i in 0..SCAN_POINTS {
        let gamma = lo + step * i as f64;
        if let Some((_, rss)) = solve(gamma) {
            if best.map_or(true, |(_, b)| rss < b) {
                best = Some((i, rss));
            }
        }
    }
    let (i0, _) = best.ok_or_else(|| {
        Error::InsufficientData("no feasible growth fit in the exponent range".into())
    })?;
    let a_end = lo + step * i0.saturating_sub(1) as f64;
    let b_end = lo + step * (i0 + 1).min(SCAN_POINTS - 1) as f64;
    let objective = |t: f64| solve(t).map_or(f64::INFINITY, |(_, rss)| rss);
    let mut gamma = golden_min(a_end, b_end, objective);
    let mut params = solve(gamma);
    if params.is_none() {
        gamma = lo + step * i0 as f64;
        params = solve(gamma);
    }
    let (amplitude, rss) = params.expect("grid winner must stay feasible");
    Ok(GrowthFit { amplitude, gamma, residual_rms: (rss / hk.len() as f64).sqrt() })
}
