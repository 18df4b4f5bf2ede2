//! Moment estimates, moment-series conditions, recursion traces and the
//! corollary checkers.

mod corollary;
mod estimate;
mod lfss_law;
mod recursion;
mod series;

pub use estimate::{estimate_abs_moment, MomentEstimate, ScalarLaw};
pub use series::{
    condition_series_rect, condition_series_sphere, corollary_bound_series, series_verdict, MomentSeriesReport,
    PlanCheck, ProbeSet, SeriesRow, SeriesSetup, Verdict, VerdictRule,
};
pub use recursion::{
    estimate_recursion_trace, RecursionCheck, RecursionGeometry, RecursionLevel, RecursionSetup, RecursionTrace,
};
pub use lfss_law::{lfss_moment_law, LawRow, LfssLawReport};
pub use corollary::{
    check_moricz_quasi_orthogonal, check_orthogonal_conditions, check_quasi_stationary_condition, dyadic_blocks,
    estimate_c5, C5Estimate, C5Row, MoriczReport, OrthogonalReport, QuasiStationaryReport, SeriesSummary,
};
