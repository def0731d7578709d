//! Target-averaged objectives, optimization over rate families,
//! variational evaluation over harmonic candidates and growth fits.

mod growth;
mod objective;
mod optimize;
mod variational;

pub use growth::{estimate_growth, GrowthFit, GrowthModel, GrowthModelChoice};
pub use objective::{expected_search_time, expected_search_time_with, ObjectiveOptions, ObjectiveValue};
pub use optimize::{optimize_constant_rate, optimize_family, FamilyBox, OptimizationReport, TraceEntry};
pub use variational::variational_objective;
