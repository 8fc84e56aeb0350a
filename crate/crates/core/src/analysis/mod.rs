//! Empirical checks of the two-sided estimate, local positivity, the
//! negative part, near-diagonal lower bounds, blow-up limits and the
//! reflection across a flat boundary.

mod blowup;
mod duffin;
mod estimate;
mod nehari;
mod samples;

pub use blowup::{blowup_sequence, BlowupConfig, BlowupOutcome, BlowupStep, Regime};
pub use duffin::{
    check_boundary_data, duffin_extend, duffin_extend_unchecked, duffin_residual, duffin_study, fornberg_weights,
    DuffinResidual, DuffinWindow, HalfPlaneData, ReflectionField,
};
pub use estimate::{
    check_sandwich, estimate_constants, negative_part_report, positivity_radius, EstimateBand, NegativePartReport,
    NegativeSample,
};
pub use nehari::{exact_ball_samples, nehari_region_check, nehari_shape, NehariReport};
pub use samples::{discrete_samples, exact_disk_samples, SamplePlan};
