//! Estimating the native-space (reproducing-kernel Hilbert space) norm of a
//! function from noise-free samples.
//!
//! The idea: interpolate the samples with a positive definite kernel on a
//! sequence of refining point sets. The interpolant norms form an increasing
//! sequence of lower bounds on the unknown norm. Extrapolating that sequence
//! gives a point estimate; summing a fitted geometric tail over the norm
//! *increments* gives an upper bound. With an upper bound in hand, the power
//! function of any interpolant turns into a certified pointwise error bound
//! on the function itself.
//!
//! Module map, bottom to top:
//!
//! * [`geometry`]: point sets, fill and separation distances, refinement
//!   schedules with bit-exact nesting;
//! * [`kernel`]: the polynomial-times-exponential kernel family;
//! * [`interpolation`]: interpolants, norms, power functions, increments;
//! * [`fitting`]: the saturating / power-law / growth model fits;
//! * [`estimator`]: norm traces and the two norm estimators plus a
//!   membership detector;
//! * [`oracle`]: closed-form and brute-force reference norms for validation;
//! * [`testbed`]: canned test functions, experiment tables, certification;
//! * a `rkhsnorm` binary exposing all of it from the command line.

pub mod error;
pub mod estimator;
pub mod fitting;
pub mod geometry;
pub mod interpolation;
pub mod kernel;
pub mod oracle;
pub mod testbed;

pub use error::{Error, Result};
pub use estimator::{
    algorithm1, algorithm2, build_trace, detect_membership, EstimateReport, Membership, NormTrace,
};
pub use fitting::{fit_powerlaw, fit_saturating, PowerLawFit, SaturatingFit};
pub use geometry::{
    fill_distance, make_dyadic_schedule, make_interior_schedule, make_quasi_uniform_schedule,
    separation_distance, uniformity, BoxDomain, NestedSchedule, PointSet,
};
pub use interpolation::{Interpolant, JitterPolicy};
pub use kernel::KernelSpec;
