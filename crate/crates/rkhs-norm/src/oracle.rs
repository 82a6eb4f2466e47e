//! Reference norms to validate the estimators against.
//!
//! Two independent sources of truth:
//!
//! * For the order-0 kernel exp(-eps r) on an interval [a, b] the native
//!   norm has a closed form,
//!
//!   ```text
//!       |f|^2 = 1/(2 eps) * int_a^b (f'(x)^2 + eps^2 f(x)^2) dx
//!               + (f(a)^2 + f(b)^2) / 2,
//!   ```
//!
//!   evaluated here by Gauss-Legendre panels with node doubling. One checks
//!   the formula on f = k(., c): the integral contributes
//!   1 - (e^{-2 eps (c-a)} + e^{-2 eps (b-c)})/2 and the boundary term the
//!   complement, totalling k(0) = 1 as it must.
//!
//! * For every kernel and dimension, the norm of an interpolant on a very
//!   dense grid. Interpolant norms increase toward the true norm under
//!   refinement, so the dense value is a certified lower reference that any
//!   estimate can be compared against.

use crate::error::{Error, Result};
use crate::geometry::BoxDomain;
use crate::interpolation::Interpolant;
use crate::kernel::KernelSpec;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence. No tables; any order works.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Symmetric rule: compute the upper half, mirror the rest.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and its derivative by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Integrates `f` over [a, b], splitting at the interior `kinks` where the
/// integrand loses smoothness, then doubling the Gauss order per panel until
/// the value settles to relative 1e-13 (or 4096 nodes).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, kinks: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = kinks.iter().cloned().filter(|&k| k > a && k < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (pa, pb) = (w[0], w[1]);
        let mut n = 8;
        let (nodes, weights) = gauss_legendre(n);
        let mut prev = gl_panel(f, pa, pb, &nodes, &weights);
        loop {
            n *= 2;
            let (nodes, weights) = gauss_legendre(n);
            let cur = gl_panel(f, pa, pb, &nodes, &weights);
            if (cur - prev).abs() <= 1e-13 * cur.abs().max(1.0) || n >= 4096 {
                prev = cur;
                break;
            }
            prev = cur;
        }
        total += prev;
    }
    total
}

/// Closed-form native norm for the order-0 kernel on an interval.
///
/// Needs the derivative of `f` and the locations of any derivative kinks so
/// the quadrature can split panels there.
pub fn order0_norm(
    f: &dyn Fn(f64) -> f64,
    f_prime: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    shape: f64,
    kinks: &[f64],
) -> f64 {
    assert!(shape > 0.0 && a < b);
    let integrand = |x: f64| {
        let d = f_prime(x);
        let v = f(x);
        d * d + shape * shape * v * v
    };
    let bulk = integrate(&integrand, a, b, kinks) / (2.0 * shape);
    let boundary = 0.5 * (f(a) * f(a) + f(b) * f(b));
    (bulk + boundary).sqrt()
}

/// A brute-force lower reference for the norm.
#[derive(Debug, Clone, Copy)]
pub struct DenseReference {
    /// Interpolant norm on the densest grid that factored.
    pub norm: f64,
    /// Interior points per axis actually used.
    pub per_axis: usize,
    /// Relative gap to the half-resolution norm; small means well resolved.
    pub half_gap_rel: f64,
    /// Set when the requested resolution had to be reduced to factor.
    pub under_resolved: bool,
}

/// Interpolates `f` on a dense interior grid and reports the norm.
///
/// If the kernel matrix fails to factor at the requested resolution, the
/// grid is repeatedly halved until it factors (smoother kernels saturate
/// f64 conditioning at coarser grids). The half-resolution norm is always
/// computed too; the relative gap between the two says how converged the
/// reference is.
pub fn dense_reference_norm(
    f: &dyn Fn(&[f64]) -> f64,
    kernel: KernelSpec,
    domain: &BoxDomain,
    per_axis: usize,
) -> Result<DenseReference> {
    if per_axis < 8 {
        return Err(Error::InvalidInput("dense reference needs at least 8 points per axis".into()));
    }
    let mut n = per_axis;
    let mut reduced = false;
    loop {
        match norm_on_interior_grid(f, kernel, domain, n) {
            Ok(norm) => {
                let half = (n - 1) / 2;
                let half_norm = norm_on_interior_grid(f, kernel, domain, half)?;
                let gap = (norm - half_norm).abs() / norm.max(f64::MIN_POSITIVE);
                return Ok(DenseReference {
                    norm,
                    per_axis: n,
                    half_gap_rel: gap,
                    under_resolved: reduced,
                });
            }
            Err(Error::Factorization { .. }) if n > 16 => {
                n = (n - 1) / 2;
                reduced = true;
            }
            Err(e) => return Err(e),
        }
    }
}

fn norm_on_interior_grid(
    f: &dyn Fn(&[f64]) -> f64,
    kernel: KernelSpec,
    domain: &BoxDomain,
    per_axis: usize,
) -> Result<f64> {
    let pts = domain.interior_grid(per_axis);
    let values: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let interp = Interpolant::fit(kernel, pts, values)?;
    Ok(interp.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_nodes_integrate_polynomials_exactly() {
        // An n-point rule is exact through degree 2n-1.
        let (nodes, weights) = gauss_legendre(5);
        for deg in 0..=9 {
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let num: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * x.powi(deg))
                .sum();
            assert!((num - exact).abs() < 1e-14, "degree {deg}: {num} vs {exact}");
        }
    }

    #[test]
    fn integration_handles_kinks() {
        // int_{-1}^{1} |x| dx = 1, with the kink declared.
        let v = integrate(&|x: f64| x.abs(), -1.0, 1.0, &[0.0]);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn norm_of_kernel_translate_is_one() {
        for c in [-0.6, 0.0, 0.45] {
            for shape in [0.5, 1.0, 2.5] {
                let f = move |x: f64| (-shape * (x - c).abs()).exp();
                let fp = move |x: f64| {
                    let s = if x >= c { -shape } else { shape };
                    s * (-shape * (x - c).abs()).exp()
                };
                let n = order0_norm(&f, &fp, -1.0, 1.0, shape, &[c]);
                assert!((n - 1.0).abs() < 1e-12, "c={c} shape={shape}: {n}");
            }
        }
    }

    #[test]
    fn closed_form_values_for_simple_functions() {
        // |x| on [-1, 1] at shape 1: 1/2 (2 + 2/3) + 1 = 7/3.
        let n = order0_norm(
            &|x: f64| x.abs(),
            &|x: f64| x.signum(),
            -1.0,
            1.0,
            1.0,
            &[0.0],
        );
        assert!((n - (7.0f64 / 3.0).sqrt()).abs() < 1e-12, "{n}");

        // x^2: 1/2 (8/3 + 2/5) + 1 = 38/15.
        let n = order0_norm(&|x: f64| x * x, &|x: f64| 2.0 * x, -1.0, 1.0, 1.0, &[]);
        assert!((n - (38.0f64 / 15.0).sqrt()).abs() < 1e-12, "{n}");

        // sin(2 pi x): 1/2 (4 pi^2 + 1) and vanishing boundary values.
        let tau = 2.0 * std::f64::consts::PI;
        let n = order0_norm(
            &|x: f64| (tau * x).sin(),
            &|x: f64| tau * (tau * x).cos(),
            -1.0,
            1.0,
            1.0,
            &[],
        );
        let expect = ((4.0 * std::f64::consts::PI.powi(2) + 1.0) / 2.0).sqrt();
        assert!((n - expect).abs() < 1e-12, "{n} vs {expect}");
    }

    #[test]
    fn dense_reference_sits_just_below_the_analytic_norm() {
        let kernel = KernelSpec::new(0, 1.0).unwrap();
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        let truth = (38.0f64 / 15.0).sqrt();
        let f = |x: &[f64]| x[0] * x[0];
        let r = dense_reference_norm(&f, kernel, &dom, 255).unwrap();
        assert!(!r.under_resolved);
        assert_eq!(r.per_axis, 255);
        assert!(r.norm <= truth + 1e-10, "reference {} above truth {truth}", r.norm);
        assert!((truth - r.norm) / truth < 0.01, "reference {} too far below {truth}", r.norm);
        assert!(r.half_gap_rel < 0.01);
    }

    #[test]
    fn dense_reference_halves_until_it_factors() {
        // Order-2 kernel matrices saturate f64 conditioning quickly; ask for
        // a hopeless resolution and watch it back off rather than fail.
        let kernel = KernelSpec::new(2, 1.0).unwrap();
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        let f = |x: &[f64]| x[0].abs();
        let r = dense_reference_norm(&f, kernel, &dom, 2047).unwrap();
        assert!(r.norm.is_finite() && r.norm > 0.0);
        if r.under_resolved {
            assert!(r.per_axis < 2047);
        }
    }
}
