//! Inhomogeneous random graphs, their pruned forests, and the spectral
//! statistics that describe eigenvector localization near high-degree vertices.

pub mod analytics;
pub mod coupling;
pub mod diagnostics;
pub mod eigenbasis;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod pruning;
pub mod rng;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{degree_order, sample_grg, DegreeOrder, SparseGraph};
pub use weights::{Model, WeightSequence};
