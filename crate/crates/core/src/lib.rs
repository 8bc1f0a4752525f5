//! Projective-geometry graph folding.
//!
//! Builds P(m, GF(q)) from a Galois field, splits its points into a spread
//! of disjoint flats by coset decomposition, derives a conflict-free
//! two-phase schedule for the point/hyperplane incidence graph, and replays
//! that schedule against a fully parallel reference.

pub mod check;
pub mod error;
pub mod folding;
pub mod galois;
pub mod lemmas;
mod par;
pub mod partition;
pub mod plan_file;
pub mod projective;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};
pub use par::num_threads;
