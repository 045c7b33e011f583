//! Topological feature pipeline for EEG segments.
//!
//! The crate follows the processing chain of a single recording:
//!
//! 1. [`io`] reads EDF/CSV recordings, re-references them through a
//!    [`Montage`](io::Montage) and cuts labeled [`Segment`](io::Segment)s.
//! 2. [`dimred`] reduces each segment to a low-dimensional
//!    [`Trajectory`](dimred::Trajectory) with PCA or dynamical component
//!    analysis (DyCA).
//! 3. [`homology`] computes Vietoris–Rips persistence (H0 and H1) of the
//!    trajectory point cloud.
//! 4. [`landscape`] builds exact persistence landscapes from the diagram.
//! 5. [`features`] condenses diagram and landscapes into a fixed
//!    40-dimensional vector.
//! 6. [`svm`] standardizes the features and trains an SMO support vector
//!    classifier with stratified grid-search cross-validation.
//!
//! [`synth`] generates ground-truth recordings (harmonic oscillator,
//! Rössler system, filtered noise) used by tests and the demo corpus.

pub mod dimred;
pub mod error;
pub mod features;
pub mod homology;
pub mod io;
pub mod landscape;
pub mod pipeline;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
