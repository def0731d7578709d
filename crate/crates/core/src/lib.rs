//! Expected hitting times for one-dimensional Brownian search with
//! position-dependent stochastic resetting.
//!
//! A searcher diffuses with constant `D` from the origin and is returned to
//! the origin at rate `r(x)`. The crate computes `E₀ T_a`, the expected time
//! to reach a target at `a`, averages it over target laws, optimizes it over
//! rate families, and cross-checks everything by simulation.
//!
//! ```
//! use resetsearch::hitting::expected_hitting_constant;
//!
//! let e = expected_hitting_constant(2.0, 2.0, 1.0).unwrap();
//! assert!((e.value() - 1.55663).abs() < 1e-5);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harmonic;
pub mod hitting;
pub mod model;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};
