//! Special functions: the Jacobi theta kernel and inverse Fourier transforms.

pub mod fourier;
pub mod theta;

pub use fourier::{
    combine_profiles, inverse_fourier, BuiltinSymbol, DecayProfile, FourierValue, HorizontalStrip, SampledSymbol,
    Symbol,
};
pub use theta::{
    calibrate_cqk, tail_bound, theta_eval, theta_lower_bound, theta_qdiff_residual, QdiffResidual, Scaled, ThetaBound,
    ThetaSpec,
};
