//! Coverage path planning on triangle meshes with holomorphic quadratic
//! differentials.
//!
//! The pipeline computes a basis of holomorphic one-forms, multiplies them
//! into a quadratic differential Φ, locates the zeros of Φ, traces the
//! critical horizontal trajectories, cuts the surface into cells, and walks
//! an Euler cycle of the doubled cell graph with interlaced zig-zag sweeps.

pub mod cli;
pub mod coverage;
pub mod decomposition;
pub mod error;
pub mod homology;
pub mod linalg;
pub mod mesh;
pub mod one_forms;
pub mod par;
pub mod pipeline;
pub mod planner;
pub mod quad_diff;
pub mod shapes;
pub mod singularities;

pub use error::{Error, Result};
pub use mesh::{HalfEdgeMesh, TopologySummary};
