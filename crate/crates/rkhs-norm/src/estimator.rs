//! Norm traces and the two norm estimators.
//!
//! A *norm trace* records, level by level over a refinement schedule, the
//! fill distance, the squared interpolant norm, and the squared norm of the
//! increment between consecutive interpolants. On nested levels the
//! increments are orthogonal, so the squared norms telescope:
//!
//! ```text
//!     |s_L|^2 = |s_0|^2 + sum_l |s_{l+1} - s_l|^2 <= |f|^2.
//! ```
//!
//! Two estimators read the trace:
//!
//! * `algorithm1` fits the saturating model c1 - c1' h^b to the squared
//!   norms and reports sqrt(c1), the extrapolated plateau;
//! * `algorithm2` fits a power law to the increment norms, sums the implied
//!   geometric tail beyond the finest level, and reports
//!   sqrt(|s_L|^2 + tail). When the increment fit really dominates the
//!   remaining increments this is an upper bound, which is what makes it
//!   usable as a certificate constant.
//!
//! `detect_membership` guards both: it compares how well a saturating versus
//! a growing power law explains the squared norms, and flags traces that are
//! blowing up, the signature of a function outside the native space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{
    fit_growth, fit_powerlaw, fit_saturating, PowerLawFit, SaturatingFit,
};
use crate::geometry::{fill_distance, NestedSchedule};
use crate::interpolation::{
    increment_norm_squared_general, increment_norm_squared_nested, Interpolant, JitterPolicy,
};
use crate::kernel::KernelSpec;

/// Levels with squared norm below this fraction of the final squared norm
/// are treated as dead: the function is numerically invisible there (it
/// vanishes on every sample point) and the levels carry no signal.
const DEAD_LEVEL_REL: f64 = 1e-20;

/// Relative floor below which an increment counts as converged. Drives both
/// the captured shortcut and the exclusion of noise-floor increments from
/// the power-law fit.
const CONVERGED_REL: f64 = 1e-10;

/// Number of finest levels the extrapolating fits look at. Coarse levels sit
/// outside the asymptotic regime the models describe; keeping a short recent
/// window makes the fitted rate track the observed late-stage decay.
const FIT_WINDOW: usize = 6;

/// Squared-norm spread below which a trace counts as constant, in which case
/// extrapolation is pointless and the last value is returned as is.
const DEGENERATE_REL: f64 = 1e-8;

/// Per-level record of a refinement run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTrace {
    pub kernel: KernelSpec,
    pub dim: usize,
    /// Whether each level's centers are an exact subset of the next level's.
    pub nested: bool,
    /// Points per level; zero when unknown (externally supplied traces).
    pub sizes: Vec<usize>,
    /// Fill distances, strictly decreasing.
    pub fills: Vec<f64>,
    /// Squared interpolant norms, non-decreasing on nested schedules.
    pub norm_squared: Vec<f64>,
    /// Squared increment norms; entry i sits between levels i and i+1.
    pub increments: Vec<f64>,
    /// True when refinement stopped early because a level failed to factor.
    pub truncated: bool,
    pub warnings: Vec<String>,
}

impl NormTrace {
    /// Assembles a trace from raw components and validates it.
    #[allow(clippy::too_many_arguments)]
    pub fn from_components(
        kernel: KernelSpec,
        dim: usize,
        nested: bool,
        sizes: Vec<usize>,
        fills: Vec<f64>,
        norm_squared: Vec<f64>,
        increments: Vec<f64>,
    ) -> Result<Self> {
        let t = Self {
            kernel,
            dim,
            nested,
            sizes,
            fills,
            norm_squared,
            increments,
            truncated: false,
            warnings: Vec::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.fills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fills.is_empty()
    }

    /// Structural invariants: consistent lengths, decreasing fills, and on
    /// nested traces monotone norms plus the telescoping identity between
    /// increments and norm differences (up to conditioning noise; increments
    /// at the noise floor are exempt).
    pub fn validate(&self) -> Result<()> {
        let n = self.fills.len();
        if n == 0 {
            return Err(Error::InvalidInput("trace has no levels".into()));
        }
        if self.norm_squared.len() != n {
            return Err(Error::InvalidInput("trace norm column length mismatch".into()));
        }
        if self.increments.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "trace with {n} levels must carry {} increments, has {}",
                n - 1,
                self.increments.len()
            )));
        }
        if !self.sizes.is_empty() && self.sizes.len() != n {
            return Err(Error::InvalidInput("trace size column length mismatch".into()));
        }
        if self.fills.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidInput("trace fills must be positive".into()));
        }
        if self.fills.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("trace fills must be strictly decreasing".into()));
        }
        if self.norm_squared.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("trace norms must be nonnegative".into()));
        }
        if self.increments.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("trace increments must be nonnegative".into()));
        }
        if self.nested {
            let last = *self.norm_squared.last().unwrap();
            let slack = 1e-9 * last.max(1.0);
            for w in self.norm_squared.windows(2) {
                if w[1] < w[0] - slack {
                    return Err(Error::InvalidInput(format!(
                        "nested trace norms decreased: {} then {}",
                        w[0], w[1]
                    )));
                }
            }
            let floor = 1e-8 * last;
            let tol = 1e-5 * last.max(f64::MIN_POSITIVE);
            for (i, &inc) in self.increments.iter().enumerate() {
                if inc < floor {
                    continue;
                }
                let diff = self.norm_squared[i + 1] - self.norm_squared[i];
                if (inc - diff).abs() > tol {
                    return Err(Error::InvalidInput(format!(
                        "increment {i} ({inc:.6e}) disagrees with norm difference ({diff:.6e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Index of the first level carrying signal. Levels where the function
    /// vanishes on all samples (squared norm at the dead floor) are skipped.
    pub fn live_start(&self) -> usize {
        let last = *self.norm_squared.last().unwrap_or(&0.0);
        let floor = DEAD_LEVEL_REL * last.max(1.0);
        self.norm_squared
            .iter()
            .position(|&v| v > floor)
            .unwrap_or(self.norm_squared.len() - 1)
    }

    /// CSV rendering with embedded metadata comments; 17 significant digits
    /// so the numbers survive a round trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# kernel_order,{}\n", self.kernel.order));
        out.push_str(&format!("# kernel_shape,{:.16e}\n", self.kernel.shape));
        out.push_str(&format!("# dim,{}\n", self.dim));
        out.push_str(&format!("# nested,{}\n", self.nested));
        out.push_str(&format!("# truncated,{}\n", self.truncated));
        out.push_str("level,size,fill,norm_squared,increment_squared\n");
        for i in 0..self.len() {
            let size = self.sizes.get(i).copied().unwrap_or(0);
            let inc = if i == 0 {
                String::new()
            } else {
                format!("{:.16e}", self.increments[i - 1])
            };
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                i, size, self.fills[i], self.norm_squared[i], inc
            ));
        }
        out
    }

    /// Parses the format written by `to_csv`. Line numbers in errors are
    /// 1-based over the whole file, comments included.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut order: Option<u32> = None;
        let mut shape: Option<f64> = None;
        let mut dim: Option<usize> = None;
        let mut nested = true;
        let mut truncated = false;
        let mut header_seen = false;
        let mut sizes = Vec::new();
        let mut fills = Vec::new();
        let mut norms = Vec::new();
        let mut incs = Vec::new();
        let bad = |lineno: usize, msg: &str| {
            Error::InvalidInput(format!("trace CSV line {lineno}: {msg}"))
        };
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.trim().splitn(2, ',');
                let key = it.next().unwrap_or("").trim();
                let val = it.next().unwrap_or("").trim();
                match key {
                    "kernel_order" => {
                        order = Some(val.parse().map_err(|_| bad(lineno, "bad kernel_order"))?)
                    }
                    "kernel_shape" => {
                        shape = Some(val.parse().map_err(|_| bad(lineno, "bad kernel_shape"))?)
                    }
                    "dim" => dim = Some(val.parse().map_err(|_| bad(lineno, "bad dim"))?),
                    "nested" => {
                        nested = val.parse().map_err(|_| bad(lineno, "bad nested flag"))?
                    }
                    "truncated" => {
                        truncated = val.parse().map_err(|_| bad(lineno, "bad truncated flag"))?
                    }
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if !line.starts_with("level,") {
                    return Err(bad(lineno, "expected header line starting with 'level,'"));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(lineno, &format!("expected 5 fields, got {}", fields.len())));
            }
            let level: usize =
                fields[0].trim().parse().map_err(|_| bad(lineno, "bad level index"))?;
            if level != fills.len() {
                return Err(bad(lineno, "level indices must be consecutive from 0"));
            }
            sizes.push(fields[1].trim().parse().map_err(|_| bad(lineno, "bad size"))?);
            fills.push(fields[2].trim().parse().map_err(|_| bad(lineno, "bad fill"))?);
            norms.push(fields[3].trim().parse().map_err(|_| bad(lineno, "bad norm"))?);
            let inc_field = fields[4].trim();
            if level == 0 {
                if !inc_field.is_empty() {
                    return Err(bad(lineno, "level 0 must have an empty increment"));
                }
            } else {
                incs.push(inc_field.parse().map_err(|_| bad(lineno, "bad increment"))?);
            }
        }
        let order = order.ok_or_else(|| Error::InvalidInput("trace CSV missing kernel_order".into()))?;
        let shape = shape.ok_or_else(|| Error::InvalidInput("trace CSV missing kernel_shape".into()))?;
        let dim = dim.ok_or_else(|| Error::InvalidInput("trace CSV missing dim".into()))?;
        let mut t = Self::from_components(
            KernelSpec::new(order, shape)?,
            dim,
            nested,
            sizes,
            fills,
            norms,
            incs,
        )?;
        t.truncated = truncated;
        Ok(t)
    }
}

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Saturating fit to the squared norms, extrapolated to fill zero.
    AsymptoteFit,
    /// Finest norm plus a geometric bound on the remaining increments.
    GeometricTail,
}

/// Output of either estimator, with enough diagnostics to judge the fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub algorithm: Algorithm,
    /// The norm estimate itself, on the norm (not squared) scale.
    pub estimate: f64,
    /// Levels that carried signal and entered the estimate.
    pub levels_used: usize,
    /// The saturating fit on squared norms (asymptote estimator only).
    pub saturating: Option<SaturatingFit>,
    /// The power-law fit on increment norms (tail estimator only).
    pub powerlaw: Option<PowerLawFit>,
    /// Squared-norm mass the tail sum added beyond the finest level.
    pub tail_sum: f64,
    /// Geometric mean of consecutive fill ratios (tail estimator only).
    pub fill_ratio: f64,
    /// The trace was flat; the estimate is just the final norm.
    pub degenerate_constant: bool,
    /// Increments hit the convergence floor; the estimate is the final norm.
    pub captured: bool,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    fn base(algorithm: Algorithm, estimate: f64, levels_used: usize) -> Self {
        Self {
            algorithm,
            estimate,
            levels_used,
            saturating: None,
            powerlaw: None,
            tail_sum: 0.0,
            fill_ratio: f64::NAN,
            degenerate_constant: false,
            captured: false,
            warnings: Vec::new(),
        }
    }
}

/// Runs the refinement loop: interpolate on every level of the schedule,
/// record fills, squared norms and squared increment norms.
///
/// When a level fails to factor (near-duplicate points, extreme conditioning)
/// and at least one level already completed, the trace is truncated there
/// with a warning instead of failing outright.
pub fn build_trace(
    schedule: &NestedSchedule,
    kernel: KernelSpec,
    f: &dyn Fn(&[f64]) -> f64,
    jitter: Option<JitterPolicy>,
) -> Result<NormTrace> {
    let mut sizes = Vec::new();
    let mut fills = Vec::new();
    let mut norms = Vec::new();
    let mut incs = Vec::new();
    let mut warnings = Vec::new();
    let mut truncated = false;
    let mut prev: Option<Interpolant> = None;
    for (l, pts) in schedule.levels.iter().enumerate() {
        let values: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let fitted = match jitter {
            Some(policy) => Interpolant::fit_with_jitter(kernel, pts.clone(), values, policy),
            None => Interpolant::fit(kernel, pts.clone(), values),
        };
        let interp = match fitted {
            Ok(s) => s,
            Err(e @ Error::Factorization { .. }) if l > 0 => {
                warnings.push(format!("refinement truncated at level {l}: {e}"));
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(ref p) = prev {
            let inc = if schedule.nested {
                increment_norm_squared_nested(&interp, p)?
            } else {
                increment_norm_squared_general(&interp, p)?
            };
            incs.push(inc.max(0.0));
        }
        sizes.push(pts.len());
        fills.push(fill_distance(pts, &schedule.domain));
        norms.push(interp.norm_squared());
        prev = Some(interp);
    }
    let mut trace = NormTrace::from_components(
        kernel,
        schedule.domain.dim(),
        schedule.nested,
        sizes,
        fills,
        norms,
        incs,
    )?;
    trace.truncated = truncated;
    trace.warnings = warnings;
    Ok(trace)
}

/// Live view of a trace: fills and squared norms past any dead levels.
fn live_slices(trace: &NormTrace) -> (usize, &[f64], &[f64]) {
    let k = trace.live_start();
    (k, &trace.fills[k..], &trace.norm_squared[k..])
}

fn default_beta_hi(trace: &NormTrace, beta_max: Option<f64>) -> f64 {
    beta_max.unwrap_or_else(|| 2.0 * trace.kernel.tau(trace.dim))
}

/// Asymptote estimator: fit the saturating model to the squared norms of
/// the finest levels and report the square root of the plateau.
///
/// The exponent search runs over (0.05, beta_max], where `beta_max` defaults
/// to twice the kernel's smoothness exponent, the steepest squared-norm
/// decay the native space permits. A flat trace short-circuits to the final
/// norm with the `degenerate_constant` flag set.
pub fn algorithm1(trace: &NormTrace, beta_max: Option<f64>) -> Result<EstimateReport> {
    trace.validate()?;
    let (start, h_live, y_live) = live_slices(trace);
    if h_live.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "asymptote fit needs at least 4 live levels, got {} ({} dead)",
            h_live.len(),
            start
        )));
    }
    let last = *y_live.last().unwrap();
    let spread = y_live.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y_live.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= DEGENERATE_REL * last.max(1.0) {
        let mut rep = EstimateReport::base(Algorithm::AsymptoteFit, last.sqrt(), h_live.len());
        rep.degenerate_constant = true;
        rep.warnings.push("trace is constant; reporting the final norm".into());
        return Ok(rep);
    }
    let window = h_live.len().min(FIT_WINDOW);
    let hk = &h_live[h_live.len() - window..];
    let yk = &y_live[y_live.len() - window..];
    let hi = default_beta_hi(trace, beta_max);
    let fit = fit_saturating(hk, yk, (0.05, hi))?;
    let mut rep = EstimateReport::base(Algorithm::AsymptoteFit, fit.c1.sqrt(), window);
    rep.saturating = Some(fit);
    Ok(rep)
}

/// Tail estimator: fit a power law to the increment norms, then add the
/// geometric series it predicts for all unseen increments.
///
/// Each increment is paired with the *finer* of its two fills, and the tail
/// is anchored one mean fill ratio past the finest kept pair, i.e. at the
/// fill the next refinement level would have. Increments at the convergence
/// floor are excluded from the fit; if the final increment itself is at the
/// floor the sequence has converged and the final norm is returned with the
/// `captured` flag.
pub fn algorithm2(trace: &NormTrace) -> Result<EstimateReport> {
    trace.validate()?;
    if !trace.nested {
        return Err(Error::InvalidInput(
            "tail estimator requires a nested trace; increments must telescope".into(),
        ));
    }
    let (start, h_live, y_live) = live_slices(trace);
    let inc_live = &trace.increments[start..];
    if inc_live.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "tail estimator needs at least 4 live increments, got {}",
            inc_live.len()
        )));
    }
    let last_n2 = *y_live.last().unwrap();
    let floor = CONVERGED_REL * last_n2.sqrt();
    let deltas: Vec<f64> = inc_live.iter().map(|v| v.sqrt()).collect();
    let mut rep = EstimateReport::base(Algorithm::GeometricTail, last_n2.sqrt(), h_live.len());
    if *deltas.last().unwrap() <= floor {
        rep.captured = true;
        rep.warnings.push("increments reached the convergence floor; no tail added".into());
        return Ok(rep);
    }
    let mut ph = Vec::new();
    let mut pd = Vec::new();
    for (j, &d) in deltas.iter().enumerate() {
        if d > floor {
            ph.push(h_live[j + 1]);
            pd.push(d);
        }
    }
    if ph.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} increments above the convergence floor",
            ph.len()
        )));
    }
    let fit = fit_powerlaw(&ph, &pd)?;
    if fit.beta2 <= 0.0 {
        return Err(Error::NoDecay { beta: fit.beta2 });
    }
    // Mean fill ratio over the live window, the decay the tail extrapolates.
    let log_rho: f64 = h_live.windows(2).map(|w| (w[1] / w[0]).ln()).sum::<f64>()
        / (h_live.len() - 1) as f64;
    let rho = log_rho.exp();
    let h_anchor = *ph.last().unwrap() * rho;
    let first_tail = fit.c2 * h_anchor.powf(fit.beta2);
    let ratio2 = rho.powf(2.0 * fit.beta2);
    let tail = first_tail * first_tail / (1.0 - ratio2);
    rep.estimate = (last_n2 + tail).sqrt();
    rep.tail_sum = tail;
    rep.fill_ratio = rho;
    rep.powerlaw = Some(fit);
    Ok(rep)
}

/// Verdict of the membership detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    /// The squared norms saturate; the function behaves like a member.
    Converging,
    /// The squared norms grow like a power of 1/h; the function does not
    /// appear to lie in the native space.
    Diverging,
    /// Neither model wins clearly.
    Inconclusive,
}

/// Compares a saturating fit against a growth fit on the squared norms of
/// the finest levels. A model must beat the other's residual by a factor of
/// two to win; infeasibility of one side settles it immediately.
pub fn detect_membership(trace: &NormTrace, beta_max: Option<f64>) -> Result<Membership> {
    trace.validate()?;
    let (_, h_live, y_live) = live_slices(trace);
    if h_live.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "membership detection needs at least 4 live levels, got {}",
            h_live.len()
        )));
    }
    let window = h_live.len().min(FIT_WINDOW);
    let hk = &h_live[h_live.len() - window..];
    let yk = &y_live[y_live.len() - window..];
    let hi = default_beta_hi(trace, beta_max);
    let sat = fit_saturating(hk, yk, (0.05, hi)).ok();
    let gro = fit_growth(hk, yk, (0.05, hi)).ok();
    Ok(match (sat, gro) {
        (None, None) => Membership::Inconclusive,
        (Some(_), None) => Membership::Converging,
        (None, Some(_)) => Membership::Diverging,
        (Some(s), Some(g)) => {
            let rss_s = s.residual_rms * s.residual_rms;
            let rss_g = g.residual_rms * g.residual_rms;
            if rss_g < 0.5 * rss_s {
                Membership::Diverging
            } else if rss_s < 0.5 * rss_g {
                Membership::Converging
            } else {
                Membership::Inconclusive
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_interior_schedule, BoxDomain};

    fn synthetic_trace(fills: &[f64], n2: &[f64]) -> NormTrace {
        let incs: Vec<f64> = n2.windows(2).map(|w| w[1] - w[0]).collect();
        NormTrace::from_components(
            KernelSpec::new(0, 1.0).unwrap(),
            1,
            true,
            vec![0; fills.len()],
            fills.to_vec(),
            n2.to_vec(),
            incs,
        )
        .unwrap()
    }

    #[test]
    fn trace_validation_catches_inconsistencies() {
        let k = KernelSpec::new(0, 1.0).unwrap();
        // increasing fills
        assert!(NormTrace::from_components(
            k,
            1,
            true,
            vec![],
            vec![0.1, 0.2],
            vec![1.0, 2.0],
            vec![1.0]
        )
        .is_err());
        // decreasing norms on a nested trace
        assert!(NormTrace::from_components(
            k,
            1,
            true,
            vec![],
            vec![0.2, 0.1],
            vec![2.0, 1.0],
            vec![0.1]
        )
        .is_err());
        // increment contradicting the norm difference
        assert!(NormTrace::from_components(
            k,
            1,
            true,
            vec![],
            vec![0.2, 0.1],
            vec![1.0, 2.0],
            vec![0.5]
        )
        .is_err());
    }

    #[test]
    fn asymptote_fit_recovers_exact_plateau() {
        let fills: Vec<f64> = (0..8).map(|i| 0.4 * 0.5f64.powi(i)).collect();
        let n2: Vec<f64> = fills.iter().map(|h| 25.0 - 7.0 * h.powf(1.2)).collect();
        let t = synthetic_trace(&fills, &n2);
        let rep = algorithm1(&t, None).unwrap();
        assert!((rep.estimate - 5.0).abs() < 1e-4, "estimate {}", rep.estimate);
        let fit = rep.saturating.unwrap();
        assert!((fit.beta1 - 1.2).abs() < 1e-4);
        assert!(rep.estimate >= t.norm_squared.last().unwrap().sqrt() - 1e-9);
    }

    #[test]
    fn constant_trace_is_flagged_degenerate() {
        let fills: Vec<f64> = (0..5).map(|i| 0.4 * 0.5f64.powi(i)).collect();
        let n2 = vec![9.0; 5];
        let t = synthetic_trace(&fills, &n2);
        let rep = algorithm1(&t, None).unwrap();
        assert!(rep.degenerate_constant);
        assert!((rep.estimate - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tail_estimator_matches_geometric_series_formula() {
        // Increments exactly delta = h^(1/2) on halving fills ending at 0.1:
        // the tail past the finest level is 0.1 and the estimate sqrt(4.1).
        let fills = vec![1.6, 0.8, 0.4, 0.2, 0.1];
        let mut n2 = vec![0.0; 5];
        n2[4] = 4.0;
        for i in (0..4).rev() {
            n2[i] = n2[i + 1] - fills[i + 1];
        }
        let t = synthetic_trace(&fills, &n2);
        let rep = algorithm2(&t).unwrap();
        let fit = rep.powerlaw.unwrap();
        assert!((fit.c2 - 1.0).abs() < 1e-9, "c2 {}", fit.c2);
        assert!((fit.beta2 - 0.5).abs() < 1e-10, "beta2 {}", fit.beta2);
        assert!((rep.fill_ratio - 0.5).abs() < 1e-12);
        assert!((rep.tail_sum - 0.1).abs() < 1e-10, "tail {}", rep.tail_sum);
        assert!((rep.estimate - 4.1f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn converged_increments_trigger_the_captured_shortcut() {
        let fills = vec![1.6, 0.8, 0.4, 0.2, 0.1];
        let n2 = vec![4.0 - 3e-25, 4.0 - 2e-25, 4.0 - 1e-25, 4.0, 4.0];
        let t = synthetic_trace(&fills, &n2);
        let rep = algorithm2(&t).unwrap();
        assert!(rep.captured);
        assert_eq!(rep.estimate, 2.0);
        assert_eq!(rep.tail_sum, 0.0);
    }

    #[test]
    fn growing_increments_are_refused() {
        let fills = vec![1.6, 0.8, 0.4, 0.2, 0.1];
        // squared increments growing as h shrinks: no geometric tail exists
        let n2 = vec![1.0, 2.1, 3.5, 5.2, 7.4];
        let t = synthetic_trace(&fills, &n2);
        match algorithm2(&t) {
            Err(Error::NoDecay { beta }) => assert!(beta <= 0.0),
            other => panic!("expected NoDecay, got {other:?}"),
        }
    }

    #[test]
    fn dead_levels_are_skipped() {
        let fills: Vec<f64> = (0..8).map(|i| 0.4 * 0.5f64.powi(i)).collect();
        let mut n2: Vec<f64> = fills.iter().map(|h| 25.0 - 7.0 * h.powf(1.2)).collect();
        n2[0] = 0.0;
        n2[1] = 0.0;
        let mut incs: Vec<f64> = n2.windows(2).map(|w| w[1] - w[0]).collect();
        incs[0] = 0.0;
        let t = NormTrace::from_components(
            KernelSpec::new(0, 1.0).unwrap(),
            1,
            true,
            vec![0; 8],
            fills,
            n2,
            incs,
        )
        .unwrap();
        assert_eq!(t.live_start(), 2);
        let rep = algorithm1(&t, None).unwrap();
        assert!((rep.estimate - 5.0).abs() < 1e-3, "estimate {}", rep.estimate);
    }

    #[test]
    fn membership_detector_separates_growth_from_saturation() {
        let fills: Vec<f64> = (0..8).map(|i| 0.4 * 0.5f64.powi(i)).collect();
        let diverging: Vec<f64> = fills.iter().map(|h| 3.0 + h.powf(-0.4)).collect();
        let t = synthetic_trace(&fills, &diverging);
        assert_eq!(detect_membership(&t, None).unwrap(), Membership::Diverging);

        let converging: Vec<f64> = fills.iter().map(|h| 25.0 - 7.0 * h.powf(1.2)).collect();
        let t = synthetic_trace(&fills, &converging);
        assert_eq!(detect_membership(&t, None).unwrap(), Membership::Converging);
    }

    #[test]
    fn built_trace_satisfies_the_telescoping_identity() {
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        let sched = make_interior_schedule(&dom, 3, 5, 10_000).unwrap();
        let kernel = KernelSpec::new(0, 1.0).unwrap();
        let f = |x: &[f64]| x[0] * x[0];
        let t = build_trace(&sched, kernel, &f, None).unwrap();
        assert_eq!(t.len(), 5);
        t.validate().unwrap();
        assert!(!t.truncated);
        // increasing lower bounds
        for w in t.norm_squared.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let fills: Vec<f64> = (0..6).map(|i| 0.4 * 0.5f64.powi(i)).collect();
        let n2: Vec<f64> = fills.iter().map(|h| 10.0 - 3.0 * h.powf(0.9)).collect();
        let t = synthetic_trace(&fills, &n2);
        let csv = t.to_csv();
        let u = NormTrace::from_csv(&csv).unwrap();
        assert_eq!(t.fills, u.fills);
        assert_eq!(t.norm_squared, u.norm_squared);
        assert_eq!(t.increments, u.increments);
        assert_eq!(t.kernel, u.kernel);
        assert_eq!(t.nested, u.nested);
    }

    #[test]
    fn trace_csv_errors_carry_line_numbers() {
        let text = "# kernel_order,0\n# kernel_shape,1\n# dim,1\nlevel,size,fill,norm_squared,increment_squared\n0,3,0.5,1.0,\n1,5,0.25,oops,0.1\n";
        let err = NormTrace::from_csv(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 6"), "message was: {msg}");
    }
}
