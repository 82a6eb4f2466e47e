//! The radial kernels whose native spaces we estimate norms in.
//!
//! The family is indexed by a smoothness order n in {0, 1, 2} and a shape
//! parameter eps > 0:
//!
//! ```text
//!     k_0(r) = exp(-eps r)
//!     k_1(r) = (1 + eps r) exp(-eps r)
//!     k_2(r) = (1 + eps r + (eps r)^2 / 3) exp(-eps r)
//! ```
//!
//! All three are normalized to k(0) = 1. Order n gives a native space that
//! is norm-equivalent to a Sobolev space of smoothness n + (d+1)/2 on R^d,
//! which is where the default exponent search ceiling `2 tau` below comes
//! from: interpolation error in these spaces cannot decay faster than fill^tau,
//! so squared-norm asymptotes cannot be steeper than fill^(2 tau).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// Kernel choice: polynomial-times-exponential family of the given order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Smoothness order, 0 through 2.
    pub order: u32,
    /// Shape parameter eps; larger means faster decay and a more local kernel.
    pub shape: f64,
}

impl KernelSpec {
    pub fn new(order: u32, shape: f64) -> Result<Self> {
        if order > 2 {
            return Err(Error::InvalidInput(format!(
                "kernel order {order} not supported; use 0, 1 or 2"
            )));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel shape {shape} must be positive")));
        }
        Ok(Self { order, shape })
    }

    /// Kernel value at distance r >= 0.
    pub fn eval(&self, r: f64) -> f64 {
        let t = self.shape * r;
        let poly = match self.order {
            0 => 1.0,
            1 => 1.0 + t,
            2 => 1.0 + t + t * t / 3.0,
            _ => unreachable!("order validated at construction"),
        };
        poly * (-t).exp()
    }

    /// Kernel value between two points.
    pub fn eval_pair(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.eval(r2.sqrt())
    }

    /// Smoothness exponent tau of the native space on R^d.
    pub fn tau(&self, dim: usize) -> f64 {
        self.order as f64 + (dim as f64 + 1.0) / 2.0
    }

    /// Dense symmetric kernel matrix K[i][j] = k(|x_i - x_j|), row-major.
    pub fn kernel_matrix(&self, points: &PointSet) -> Vec<f64> {
        let n = points.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = self.eval_pair(points.point(i), points.point(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }

    /// Kernel column (k(|x - x_i|))_i for a single evaluation point.
    pub fn kernel_column(&self, points: &PointSet, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), points.len());
        for (o, p) in out.iter_mut().zip(points.iter()) {
            *o = self.eval_pair(p, x);
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "order {} (shape {})", self.order, self.shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelSpec::new(3, 1.0).is_err());
        assert!(KernelSpec::new(0, 0.0).is_err());
        assert!(KernelSpec::new(0, -2.0).is_err());
        assert!(KernelSpec::new(0, f64::NAN).is_err());
    }

    #[test]
    fn unit_diagonal_and_known_values() {
        for order in 0..=2 {
            let k = KernelSpec::new(order, 1.7).unwrap();
            assert_eq!(k.eval(0.0), 1.0);
        }
        let k1 = KernelSpec::new(1, 2.0).unwrap();
        // (1 + 2*0.5) e^{-1}
        assert!((k1.eval(0.5) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let k2 = KernelSpec::new(2, 1.0).unwrap();
        assert!((k2.eval(3.0) - (1.0 + 3.0 + 3.0) * (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn shape_rescales_distance_exactly() {
        let base = KernelSpec::new(2, 1.0).unwrap();
        let scaled = KernelSpec::new(2, 4.0).unwrap();
        for r in [0.1, 0.37, 1.4, 9.0] {
            assert_eq!(base.eval(4.0 * r), scaled.eval(r));
        }
    }

    #[test]
    fn values_decay_monotonically() {
        for order in 0..=2 {
            let k = KernelSpec::new(order, 1.0).unwrap();
            let mut prev = k.eval(0.0);
            for i in 1..200 {
                let v = k.eval(i as f64 * 0.05);
                assert!(v < prev, "order {order} not decreasing at r={}", i as f64 * 0.05);
                assert!(v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_with_radial_entries() {
        let pts = PointSet::from_1d(&[-0.9, -0.2, 0.3, 0.8]);
        let k = KernelSpec::new(1, 3.0).unwrap();
        let m = k.kernel_matrix(&pts);
        let n = pts.len();
        for i in 0..n {
            assert_eq!(m[i * n + i], 1.0);
            for j in 0..n {
                assert_eq!(m[i * n + j], m[j * n + i]);
                let r = (pts.point(i)[0] - pts.point(j)[0]).abs();
                assert!((m[i * n + j] - k.eval(r)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tau_tracks_order_and_dimension() {
        let k = KernelSpec::new(1, 1.0).unwrap();
        assert_eq!(k.tau(1), 2.0);
        assert_eq!(k.tau(2), 2.5);
        let k0 = KernelSpec::new(0, 1.0).unwrap();
        assert_eq!(k0.tau(1), 1.0);
    }
}
