//! Shear-based adaptation primitives: the transform Ψ, the fit Λ and the
//! amplitude-dependent shear curve.

pub mod curve;
pub mod fit;
pub mod transform;

pub use curve::{fit_shear_curve, fit_shear_curve_with, CurveFitParams, ShearCurve, ShearPoint};
pub use fit::{fit_shear, fit_shear_with, shear_objective, ShearFit, ShearFitParams};
pub use transform::{
    check_lambda, feasible_range, shear_mean, shear_profile, shear_profile_with, shear_values, Interpolation,
};
