//! Semiparametric estimation of the monotone index model
//! `P(y = 1 | x0, x) = G(x0 + x'beta)` with an unknown increasing link `G`.
//!
//! The link is estimated by Nadaraya-Watson regression on the current index
//! and `beta` by (mini-batch) gradient descent with iterate averaging.
//! Plug-in standard errors, a link-curve export and a simulation lab sit on
//! top. All numerical code is generic over [`Real`] (`f32` or `f64`).

pub mod error;
pub mod gd;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod nw;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use gd::{
    bgd_step_known_g, check_stop, draw_subsample, kbgd_step, kmbgd_step, logit_init, run_akmbgd, AveragedEstimate,
    Estimator, GdConfig, IterationState, RunOptions, StopRule, SubsampleDraw, TraceLevel,
};
pub use inference::{
    confidence_intervals, covariance, estimate_cdf_curve, estimate_lambda, estimate_sigma_xi, known_link_covariance,
    CdfCurve, CovarianceEstimate, GridSpec, InferenceConfig,
};
pub use kernel::{bandwidth, make_kernel, verify_moments, BandwidthRule, BandwidthScale, KernelSpec, MomentReport};
pub use linalg::Matrix;
pub use model::{compute_index, trimming_mask, Coefficients, Dataset, IndexValues, TrimmingSpec};
pub use nw::{nw_components, nw_full, nw_subsample_truncated, NWComponents, NwOptions, NwPath, TruncationFloor};
pub use scalar::Real;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Coefficients64 = Coefficients<f64>;
pub type Coefficients32 = Coefficients<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type GdConfig64 = GdConfig<f64>;
pub type CovarianceEstimate64 = CovarianceEstimate<f64>;
