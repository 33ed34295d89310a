//! Numerical laboratory for disordered two-dimensional Chern insulators.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: Bravais geometry, boxes, cores and inner boundaries.
//! * [`model`]: finite-range magnetic-periodic hopping Hamiltonians, including the Haldane model.
//! * [`bloch`]: clean band structures and Fukui-Hatsugai-Suzuki Chern numbers.
//! * [`disorder`]: single-site laws, their regularity constants and reproducible sampling.
//! * [`finite_volume`]: box restrictions, eigendecompositions, projections and resolvents.
//! * [`topology`]: real-space Chern marker and the index of a pair of projections.
//! * [`bounds`]: closed-form localization constants and thresholds.
//! * [`probes`]: Monte-Carlo estimators built on the pieces above.
//! * [`output`]: CSV tables with metadata headers.

pub mod bloch;
pub mod bounds;
pub mod disorder;
mod error;
pub mod finite_volume;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod output;
pub mod probes;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use faer::c64;
