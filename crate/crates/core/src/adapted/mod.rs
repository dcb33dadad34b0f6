//! Offset surfaces and adapted coordinates: area ratios, the
//! normal-momentum constraint replay and the determinant behind the
//! general-codimension potential.

mod determinant;
mod offset;
mod prokhorov;

pub use determinant::{
    det_expansion_check, det_expansion_order, vq_numeric_fd, DetExpansion, ExpansionOrder,
    FdOptions, NumericVq,
};
pub use offset::{
    area_ratio_exact, area_ratio_series, log_grid, verify_series_order, AreaRatioSeries,
    OffsetFrame, SeriesOrder, SeriesOutcome, TERMINATION_TOL,
};
pub use prokhorov::{
    default_chi, laplace_beltrami, prokhorov_equivalence_check, prokhorov_equivalence_check_with,
    ProkhorovCheck, MIN_CHI,
};
