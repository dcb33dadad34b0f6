//! Charts and their first- and second-order geometry.

mod chart;
mod divergence;
mod frame;
pub mod registry;

pub use chart::{
    Chart, DerivativeMode, Embedding, SecondDerivatives, FIRST_STEP, RANK_TOL, SECOND_STEP,
};
pub use divergence::{divergence_of_normal, project_to_surface, DivergenceCheck, AMBIENT_STEP};
pub use frame::{
    align_frame, curvature_forms, frame_cross_terms, normal_frame, CurvatureData, FormSet,
    FrameCrossTerms, DEPENDENCE_THRESHOLD, FORM_SYMMETRY_TOL, SYMMETRY_RESIDUAL,
};

use nalgebra::DMatrix;

use crate::error::Result;

/// Columns `d r / d u_a`; see [`Chart::jacobian`].
pub fn jacobian(chart: &Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    chart.jacobian(u)
}

/// Induced metric `J^T J`.
pub fn metric(chart: &Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    chart.metric(u)
}
