//! Kernel interpolants, their native-space norms, and pointwise error
//! certificates.
//!
//! Given centers X = {x_1..x_n} and values f(x_i), the interpolant is
//! s = sum_i a_i k(., x_i) with K a = f(X). Two facts carry the whole crate:
//!
//! * the squared native norm of s is the quadratic form a' K a = a' f(X),
//!   and it never exceeds the norm of any function in the space that
//!   interpolates the same data;
//! * for every x, |f(x) - s(x)| <= P(x) |f| where
//!   P(x)^2 = k(0) - k_x' K^{-1} k_x is the power function, computable
//!   without knowing f.
//!
//! The estimators turn the first fact into a convergent lower-bound sequence;
//! the certificates turn the second into verified error bounds once a norm
//! upper bound is available.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::kernel::KernelSpec;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// stored row-major and dense.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors `k` (row-major, n x n, symmetric). Fails with the offending
    /// pivot when the matrix is not numerically positive definite.
    pub fn new(k: &[f64], n: usize) -> Result<Self> {
        assert_eq!(k.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = l[i * n..i * n + j]
                    .iter()
                    .zip(&l[j * n..j * n + j])
                    .map(|(a, b)| a * b)
                    .sum();
                let s = k[i * n + j] - dot;
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Factorization { index: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves L y = b in place.
    pub fn forward(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let dot: f64 = self.l[i * self.n..i * self.n + i]
                .iter()
                .zip(b.iter())
                .map(|(a, y)| a * y)
                .sum();
            b[i] = (b[i] - dot) / self.l[i * self.n + i];
        }
    }

    /// Solves L' y = b in place.
    pub fn backward(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for j in (i + 1)..self.n {
                s -= self.l[j * self.n + i] * b[j];
            }
            b[i] = s / self.l[i * self.n + i];
        }
    }

    /// Solves K x = b in place via the two triangular solves.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    /// The quadratic form v' K v = |L' v|^2, nonnegative by construction.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n);
        let mut acc = 0.0;
        // row i of L' is column i of L; accumulate y_i = sum_{j>=i} L[j][i] v_j.
        for i in 0..self.n {
            let mut y = 0.0;
            for j in i..self.n {
                y += self.l[j * self.n + i] * v[j];
            }
            acc += y * y;
        }
        acc
    }
}

/// Adaptive diagonal regularization for nearly singular kernel matrices.
/// Off by default; when enabled, the fit retries with a ridge starting at
/// `start_scale * n * max_diag` and doubling until the factorization
/// succeeds or the ridge passes `cap * max_diag`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub start_scale: f64,
    pub cap: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { start_scale: 1e-12, cap: 1e-8 }
    }
}

/// A fitted kernel interpolant together with its factorization, so that
/// evaluations, power functions and increment norms stay cheap.
#[derive(Debug, Clone)]
pub struct Interpolant {
    spec: KernelSpec,
    centers: PointSet,
    values: Vec<f64>,
    coeffs: Vec<f64>,
    factor: CholeskyFactor,
    /// Absolute ridge that was added to the diagonal; zero when none.
    ridge: f64,
    norm_squared: f64,
}

/// On-disk form: enough to rebuild the factorization deterministically.
#[derive(Serialize, Deserialize)]
struct InterpolantRecord {
    kernel: KernelSpec,
    dim: usize,
    centers: Vec<f64>,
    values: Vec<f64>,
    ridge: f64,
}

impl Interpolant {
    /// Interpolates `values` at `centers` without regularization.
    pub fn fit(spec: KernelSpec, centers: PointSet, values: Vec<f64>) -> Result<Self> {
        Self::fit_ridge(spec, centers, values, 0.0)
    }

    /// Like `fit`, but retries with growing diagonal jitter when the plain
    /// factorization breaks down.
    pub fn fit_with_jitter(
        spec: KernelSpec,
        centers: PointSet,
        values: Vec<f64>,
        policy: JitterPolicy,
    ) -> Result<Self> {
        match Self::fit_ridge(spec, centers, values.clone(), 0.0) {
            Ok(s) => Ok(s),
            Err(Error::Factorization { .. }) => {
                let n = centers.len();
                let mut ridge = policy.start_scale * n as f64;
                let mut last = None;
                while ridge <= policy.cap {
                    match Self::fit_ridge(spec, centers.clone(), values.clone(), ridge) {
                        Ok(s) => return Ok(s),
                        Err(e) => last = Some(e),
                    }
                    ridge *= 2.0;
                }
                Err(last.unwrap_or(Error::InvalidInput("jitter cap too small".into())))
            }
            Err(e) => Err(e),
        }
    }

    fn fit_ridge(
        spec: KernelSpec,
        centers: PointSet,
        values: Vec<f64>,
        ridge: f64,
    ) -> Result<Self> {
        let n = centers.len();
        if n == 0 {
            return Err(Error::InvalidInput("cannot interpolate zero points".into()));
        }
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} values for {} centers",
                values.len(),
                n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample values must be finite".into()));
        }
        let mut k = spec.kernel_matrix(&centers);
        if ridge > 0.0 {
            for i in 0..n {
                k[i * n + i] += ridge;
            }
        }
        let factor = CholeskyFactor::new(&k, n)?;
        let mut coeffs = values.clone();
        factor.solve(&mut coeffs);
        // a' K a = a' f up to roundoff; the dot is cheaper and the clamp
        // protects against cancellation on near-singular systems.
        let norm_squared = coeffs
            .iter()
            .zip(&values)
            .map(|(a, f)| a * f)
            .sum::<f64>()
            .max(0.0);
        Ok(Self { spec, centers, values, coeffs, factor, ridge, norm_squared })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.spec
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn norm_squared(&self) -> f64 {
        self.norm_squared
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared.sqrt()
    }

    /// Value of the interpolant at `x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(p, a)| a * self.spec.eval_pair(p, x))
            .sum()
    }

    /// Power function P(x): the worst-case pointwise error per unit of
    /// native norm. Zero at the centers, positive elsewhere.
    pub fn power_function(&self, x: &[f64]) -> f64 {
        let mut col = vec![0.0; self.centers.len()];
        self.spec.kernel_column(&self.centers, x, &mut col);
        self.factor.forward(&mut col);
        let reduced: f64 = col.iter().map(|w| w * w).sum();
        let p2 = self.spec.eval(0.0) - reduced;
        debug_assert!(p2 > -1e-8, "power function square went negative: {p2}");
        p2.max(0.0).sqrt()
    }

    /// Certified bound C * P(x) on |f(x) - s(x)|, valid whenever C bounds the
    /// native norm of f. A constant below the interpolant norm is rejected,
    /// because |s| <= |f| makes such a C impossible.
    pub fn error_bound(&self, constant: f64, x: &[f64]) -> Result<f64> {
        let norm = self.norm();
        if constant < norm {
            return Err(Error::BoundBelowNorm { constant, norm });
        }
        Ok(constant * self.power_function(x))
    }

    /// Same bound without the norm precondition. Exists so a caller can
    /// deliberately probe what happens when the constant is too small.
    pub fn error_bound_unchecked(&self, constant: f64, x: &[f64]) -> f64 {
        constant * self.power_function(x)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = InterpolantRecord {
            kernel: self.spec,
            dim: self.centers.dim(),
            centers: self.centers.coords().to_vec(),
            values: self.values.clone(),
            ridge: self.ridge,
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    /// Rebuilds the interpolant from its JSON form by re-running the fit;
    /// bit-identical coefficients follow from the deterministic solve.
    pub fn from_json(s: &str) -> Result<Self> {
        let rec: InterpolantRecord = serde_json::from_str(s)?;
        let centers = PointSet::new(rec.dim, rec.centers)?;
        Self::fit_ridge(rec.kernel, centers, rec.values, rec.ridge)
    }
}

/// Squared native norm of the difference s_fine - s_coarse when the coarse
/// centers all occur among the fine ones. The difference then lives in the
/// fine span, so its coefficient vector is the fine coefficients minus the
/// coarse ones scattered into fine positions, and the norm is a quadratic
/// form in the already-computed fine factorization.
pub fn increment_norm_squared_nested(fine: &Interpolant, coarse: &Interpolant) -> Result<f64> {
    if fine.kernel() != coarse.kernel() {
        return Err(Error::InvalidInput("increment across different kernels".into()));
    }
    let mut delta = fine.coefficients().to_vec();
    let mut index = std::collections::HashMap::with_capacity(fine.centers().len());
    for (i, p) in fine.centers().iter().enumerate() {
        index.insert(p.iter().map(|c| c.to_bits()).collect::<Vec<u64>>(), i);
    }
    for (p, a) in coarse.centers().iter().zip(coarse.coefficients()) {
        let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
        let i = index.get(&key).ok_or_else(|| {
            Error::InvalidInput("coarse center not found in fine level; levels are not nested".into())
        })?;
        delta[*i] -= a;
    }
    Ok(fine.factor().quadratic_form(&delta))
}

/// Squared native norm of s_fine - s_coarse for arbitrary center sets. The
/// difference lives in the span of the union, so the norm is the quadratic
/// form of the stacked coefficients in the union kernel matrix. No
/// factorization is needed, only kernel evaluations.
pub fn increment_norm_squared_general(fine: &Interpolant, coarse: &Interpolant) -> Result<f64> {
    if fine.kernel() != coarse.kernel() {
        return Err(Error::InvalidInput("increment across different kernels".into()));
    }
    let spec = fine.kernel();
    let dim = fine.centers().dim();
    let mut union = PointSet::new(dim, Vec::new())?;
    let mut delta: Vec<f64> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut add = |p: &[f64], a: f64, union: &mut PointSet, delta: &mut Vec<f64>| {
        let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
        match seen.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => delta[*e.get()] += a,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(union.len());
                union.push(p);
                delta.push(a);
            }
        }
    };
    for (p, &a) in fine.centers().iter().zip(fine.coefficients()) {
        add(p, a, &mut union, &mut delta);
    }
    for (p, &a) in coarse.centers().iter().zip(coarse.coefficients()) {
        add(p, -a, &mut union, &mut delta);
    }
    let m = union.len();
    let k = spec.kernel_matrix(&union);
    let mut acc = 0.0;
    for i in 0..m {
        let row: f64 = k[i * m..(i + 1) * m].iter().zip(&delta).map(|(kij, d)| kij * d).sum();
        acc += delta[i] * row;
    }
    Ok(acc.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDomain;

    fn toy() -> Interpolant {
        let spec = KernelSpec::new(1, 2.0).unwrap();
        let centers = PointSet::from_1d(&[-0.8, -0.3, 0.1, 0.6, 0.9]);
        let values: Vec<f64> = centers.iter().map(|p| (p[0] * 3.0).sin()).collect();
        Interpolant::fit(spec, centers, values).unwrap()
    }

    #[test]
    fn interpolates_exactly_at_centers() {
        let s = toy();
        for (p, v) in s.centers().clone().iter().zip(s.values().to_vec()) {
            assert!((s.evaluate(p) - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_duplicate_points() {
        let spec = KernelSpec::new(0, 1.0).unwrap();
        let centers = PointSet::from_1d(&[0.2, 0.2, 0.7]);
        let err = Interpolant::fit(spec, centers, vec![1.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Factorization { .. }));
    }

    #[test]
    fn jitter_rescues_duplicate_points() {
        let spec = KernelSpec::new(0, 1.0).unwrap();
        let centers = PointSet::from_1d(&[0.2, 0.2, 0.7]);
        let s = Interpolant::fit_with_jitter(
            spec,
            centers,
            vec![1.0, 1.0, 2.0],
            JitterPolicy::default(),
        )
        .unwrap();
        assert!(s.ridge() > 0.0);
        assert!(s.norm_squared().is_finite());
    }

    #[test]
    fn norm_matches_quadratic_form() {
        let s = toy();
        let qf = s.factor().quadratic_form(s.coefficients());
        assert!((s.norm_squared() - qf).abs() < 1e-9 * qf.max(1.0));
    }

    #[test]
    fn single_kernel_translate_has_unit_norm() {
        // f = k(., 0) has native norm exactly k(0) = 1.
        let spec = KernelSpec::new(2, 1.5).unwrap();
        let centers = PointSet::from_1d(&[0.0]);
        let s = Interpolant::fit(spec, centers, vec![1.0]).unwrap();
        assert!((s.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_function_vanishes_at_centers_and_stays_below_one() {
        let s = toy();
        for p in s.centers().clone().iter() {
            assert!(s.power_function(p) < 1e-7);
        }
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        for x in dom.grid(101).iter() {
            let pw = s.power_function(x);
            assert!((0.0..=1.0 + 1e-12).contains(&pw), "power {pw} out of range");
        }
    }

    #[test]
    fn error_bound_requires_constant_at_least_the_norm() {
        let s = toy();
        let too_small = s.norm() * 0.5;
        assert!(matches!(
            s.error_bound(too_small, &[0.05]),
            Err(Error::BoundBelowNorm { .. })
        ));
        let ok = s.error_bound(s.norm() * 2.0, &[0.05]).unwrap();
        assert!(ok > 0.0);
        assert!((s.error_bound_unchecked(too_small, &[0.05]) - 0.5 * ok / 2.0 * 2.0).is_finite());
    }

    #[test]
    fn pointwise_bound_holds_for_in_span_functions() {
        // f built inside the space with known norm; bound must dominate the
        // true error everywhere.
        let spec = KernelSpec::new(1, 3.0).unwrap();
        let gen = PointSet::from_1d(&[-0.5, 0.2, 0.7]);
        let w = [0.8, -0.4, 1.1];
        let f = |x: &[f64]| -> f64 {
            gen.iter().zip(&w).map(|(p, c)| c * spec.eval_pair(p, x)).sum()
        };
        let km = spec.kernel_matrix(&gen);
        let mut norm2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                norm2 += w[i] * km[i * 3 + j] * w[j];
            }
        }
        let fnorm = norm2.sqrt();

        let centers = PointSet::from_1d(&[-0.9, -0.4, 0.0, 0.4, 0.9]);
        let values: Vec<f64> = centers.iter().map(f).collect();
        let s = Interpolant::fit(spec, centers, values).unwrap();
        assert!(s.norm() <= fnorm + 1e-10, "interpolant norm may not exceed the true norm");
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        for x in dom.grid(301).iter() {
            let err = (f(x) - s.evaluate(x)).abs();
            let bound = s.error_bound(fnorm, x).unwrap();
            assert!(err <= bound + 1e-10, "error {err} above bound {bound}");
        }
    }

    #[test]
    fn nested_increment_matches_norm_difference() {
        // On nested sets the projection is orthogonal, so
        // |s_f - s_c|^2 = |s_f|^2 - |s_c|^2 up to roundoff.
        let spec = KernelSpec::new(1, 2.0).unwrap();
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        let f = |x: &[f64]| (2.0 * x[0]).cos();
        let coarse_pts = dom.grid(9);
        let fine_pts = dom.grid(17);
        let coarse =
            Interpolant::fit(spec, coarse_pts.clone(), coarse_pts.iter().map(f).collect())
                .unwrap();
        let fine = Interpolant::fit(spec, fine_pts.clone(), fine_pts.iter().map(f).collect())
            .unwrap();
        let inc = increment_norm_squared_nested(&fine, &coarse).unwrap();
        let pyth = fine.norm_squared() - coarse.norm_squared();
        assert!((inc - pyth).abs() < 1e-8 * fine.norm_squared().max(1.0));
        let gen = increment_norm_squared_general(&fine, &coarse).unwrap();
        assert!((gen - inc).abs() < 1e-8 * fine.norm_squared().max(1.0));
    }

    #[test]
    fn general_increment_handles_disjoint_sets() {
        let spec = KernelSpec::new(0, 1.0).unwrap();
        let f = |x: &[f64]| x[0] * x[0];
        let a_pts = PointSet::from_1d(&[-0.75, -0.25, 0.25, 0.75]);
        let b_pts = PointSet::from_1d(&[-0.9, -0.5, 0.0, 0.5, 0.9]);
        let a = Interpolant::fit(spec, a_pts.clone(), a_pts.iter().map(f).collect()).unwrap();
        let b = Interpolant::fit(spec, b_pts.clone(), b_pts.iter().map(f).collect()).unwrap();
        let inc = increment_norm_squared_general(&b, &a).unwrap();
        assert!(inc > 0.0);
        // Triangle inequality sanity: |s_b - s_a| <= |s_a| + |s_b|.
        assert!(inc.sqrt() <= a.norm() + b.norm() + 1e-12);
    }

    #[test]
    fn json_round_trip_reproduces_evaluations() {
        let s = toy();
        let json = s.to_json().unwrap();
        let t = Interpolant::from_json(&json).unwrap();
        let dom = BoxDomain::interval(-1.0, 1.0).unwrap();
        for x in dom.grid(64).iter() {
            assert!((s.evaluate(x) - t.evaluate(x)).abs() < 1e-12);
            assert!((s.power_function(x) - t.power_function(x)).abs() < 1e-12);
        }
        assert!((s.norm_squared() - t.norm_squared()).abs() < 1e-12);
    }
}
