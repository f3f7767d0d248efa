//! Probabilistic estimation of Riesz transforms through the background process
//! `(B^M, B)` and the damped process `Z`.

pub mod background;
pub mod estimator;
pub mod field;
pub mod geometry;
pub mod oracle;
pub mod sweep;

pub use background::{bridge_crossing_probability, simulate_background, BackgroundState, Layering};
pub use estimator::{bin_targets, gv_li_doubling, gv_li_estimator, height_shift, relative_l2_error, Bins, EstimatorConfig, RieszEstimate};
pub use field::{riesz_closed_form, PoissonField, TestFunction};
pub use geometry::Geometry;
pub use oracle::fft_riesz_oracle;
pub use sweep::{dimension_free_sweep, trend_report, SweepFamily, SweepRow};
