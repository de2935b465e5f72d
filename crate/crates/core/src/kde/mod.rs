//! Bivariate Gaussian kernel density estimation of `(t, c)` clouds and the
//! highest-density-region anomaly score built on it.
//!
//! The anomaly score of a status `x` is `A(x) = P(f̂(Y) > f̂(x))`, the
//! probability mass of statuses denser than `x`, estimated from reference
//! points that were not used to fit `f̂`. `A ≥ 0.95` places `x` outside the
//! 95% highest-density region.

mod anomaly;
mod bandwidth;
mod density;

pub use anomaly::{
    percentile_rectangle, write_density_grid, ConfidenceRectangle, Contour, DensityConfig,
    DensityModel, CONTOUR_LEVELS, DENSITY_GRID_HEADER,
};
pub use bandwidth::{
    normal_scale_bandwidth, scv_bandwidth, scv_bandwidth_with, scv_objective, scv_pilot,
    BandwidthMatrix, BandwidthMethod, BandwidthSelection, ScvOptions,
};
pub use density::{kde_fit, KernelDensity};
