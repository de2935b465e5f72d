use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, ClassifierParams, Target};
use crate::gam::{AnovaResult, GamKind, GamParams};
use crate::geometry::{GridSpec, Polyline};
use crate::kde::{BandwidthMethod, ConfidenceRectangle, Contour};
use crate::linalg::{Point, Sym2};
use crate::project::EvmStatus;

use super::config::RunConfig;

/// Everything the methodology says about one observed project status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub config: RunConfig,
    pub fingerprint: String,
    pub ev_level: f64,
    pub bac: f64,
    pub pd: f64,
    pub status: EvmStatus,
    pub p_anomaly: f64,
    pub p_overcost: f64,
    pub p_delay: f64,
    pub expected_final_cost: f64,
    /// `expected_final_cost − BAC`; negative means no over-cost.
    pub expected_overcost: f64,
    pub expected_final_duration: f64,
    /// `expected_final_duration − PD`; negative means no delay.
    pub expected_delay: f64,
    pub variability: VariabilityBand,
    pub models: ModelSummary,
    pub boundaries: BoundarySummaries,
    pub anova: AnovaSummary,
    pub trust: TrustFlags,
    pub overlays: ChartOverlays,
}

/// Marginal extent of the 95% highest-density region of the cloud at the
/// current EV level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariabilityBand {
    pub level: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub density: DensitySummary,
    pub over_budget: ClassifierChoice,
    pub late: ClassifierChoice,
    pub final_cost: RegressorChoice,
    pub final_duration: RegressorChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    /// `None` when the cloud has no spread in some direction and the score
    /// falls back to a point-mass rule.
    pub bandwidth: Option<Sym2>,
    pub method: Option<BandwidthMethod>,
    pub warning: Option<String>,
    pub n_points: usize,
}

/// Score of one model family in nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: String,
    pub outer_error_mean: f64,
    pub outer_error_sd: f64,
    pub inner_selected_mean: f64,
    pub final_params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub family: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierChoice {
    pub target: Target,
    pub n_train: usize,
    pub positive_fraction: f64,
    /// Set when the target cannot be learned, for instance when every
    /// training run has the same label; the probability is then this value.
    pub fixed_probability: Option<f64>,
    pub family: Option<ClassifierKind>,
    pub params: Option<ClassifierParams>,
    /// Mean outer-fold misclassification rate of the chosen family.
    pub outer_error: Option<f64>,
    pub candidates: Vec<Candidate>,
    pub failures: Vec<CandidateFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorChoice {
    pub response: String,
    pub n_train: usize,
    /// Set when no additive model can be fitted; predictions are then this
    /// training mean.
    pub constant: Option<f64>,
    pub family: Option<GamKind>,
    pub params: Option<GamParams>,
    /// Mean outer-fold squared error of the chosen family.
    pub outer_mse: Option<f64>,
    pub candidates: Vec<Candidate>,
    pub failures: Vec<CandidateFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySummaries {
    pub over_budget: BoundarySummary,
    pub late: BoundarySummary,
}

/// The `p = 0.5` level set of a deployed classifier on the export grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySummary {
    /// Boundary pieces inside the training hull.
    pub trusted_segments: usize,
    pub segments: usize,
    /// Probability range over grid cells inside the training hull.
    pub trusted_min: Option<f64>,
    pub trusted_max: Option<f64>,
}

/// Approximate F comparison of the spline and loess models per response,
/// reported for information only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaSummary {
    pub final_cost: Option<AnovaResult>,
    pub final_duration: Option<AnovaResult>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustFlags {
    /// Status lies in the convex hull of the classifier and regressor
    /// training points.
    pub in_training_hull: bool,
    /// `p_anomaly ≤ 0.95`.
    pub in_expected_variability: bool,
    pub in_chart_grid: bool,
    pub cost_extrapolated: bool,
    pub duration_extrapolated: bool,
    pub over_budget_fixed: bool,
    pub late_fixed: bool,
    pub density_degenerate: bool,
}

impl TrustFlags {
    /// Classifier and regressor outputs at the status can be relied on.
    pub fn predictions_trusted(&self) -> bool {
        self.in_training_hull && !self.cost_extrapolated && !self.duration_extrapolated
    }
}

/// Geometry needed to draw the control charts without refitting anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartOverlays {
    /// Breakpoints `(t, PV)` of the baseline planned value curve.
    pub pv_curve: Vec<(f64, f64)>,
    pub sample: Vec<SamplePoint>,
    pub contours: Vec<Contour>,
    pub rectangles: Vec<ConfidenceRectangle>,
    pub hull: Vec<Point>,
    pub heat_grid: GridSpec,
    /// Per heat-grid node (row-major): inside the training hull.
    pub trusted_nodes: Vec<bool>,
    pub p_overcost: Vec<f64>,
    pub p_delay: Vec<f64>,
    pub expected_final_cost: Vec<f64>,
    pub expected_final_duration: Vec<f64>,
    pub boundary_overcost: BoundaryLines,
    pub boundary_delay: BoundaryLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub c: f64,
    pub final_t: f64,
    pub final_c: f64,
    pub over_budget: bool,
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryLines {
    pub trusted: Vec<Polyline>,
    pub all: Vec<Polyline>,
}
