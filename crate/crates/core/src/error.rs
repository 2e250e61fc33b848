//! Typed failures for every stage of the pipeline.
//!
//! Each variant maps to a distinct process exit status (see [`Error::exit_code`])
//! so that scripted runs can tell failures apart without parsing stderr.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("IOError: {0}")]
    Io(#[from] std::io::Error),

    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("NonManifoldError: {0}")]
    NonManifold(String),

    #[error("NonTriangleError: face on line {line} has {count} vertices")]
    NonTriangle { line: usize, count: usize },

    #[error("DisconnectedMeshError: mesh has {components} connected components")]
    DisconnectedMesh { components: usize },

    #[error("NoBoundaryError: the symmetric double needs at least one boundary loop")]
    NoBoundary,

    #[error("GenusZeroError: surface has genus 0, no holomorphic one-forms exist")]
    GenusZero,

    #[error("DegenerateBasisError: period matrix reciprocal condition {rcond:e}")]
    DegenerateBasis { rcond: f64 },

    #[error("SolverError: residual {residual:e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("DegenerateFaceError: face {face} has zero area")]
    DegenerateFace { face: usize },

    #[error("EmptyCombinationError: no term with a nonzero coefficient")]
    EmptyCombination,

    #[error("ZeroFaceError: quadratic differential vanishes on face {face}")]
    ZeroFace { face: usize },

    #[error("InconsistentHolonomyError: square root sign flips across halfedge {halfedge}")]
    InconsistentHolonomy { halfedge: usize },

    #[error("ChartNotSimplyConnectedError: face set has Euler characteristic {euler}")]
    ChartNotSimplyConnected { euler: i64 },

    #[error("ZeroCountMismatchError: found {found} zeros (counted with order), expected {expected}")]
    ZeroCountMismatch { found: usize, expected: usize },

    #[error("HighOrderZeroError: vertex {vertex} has cone angle {angle_sum:.6} rad")]
    HighOrderZero { vertex: usize, angle_sum: f64 },

    #[error("TracingStallError: {0}")]
    TracingStall(String),

    #[error("NonTerminationError: trajectory exceeded {max_steps} steps")]
    NonTermination { max_steps: usize },

    #[error("DanglingArcError: critical arc {arc} has an unterminated end")]
    DanglingArc { arc: usize },

    #[error("CellCountMismatchError: found {found} cells, expected {expected}")]
    CellCountMismatch { found: usize, expected: usize },

    #[error("DisconnectedGraphError: dual graph is not connected")]
    DisconnectedGraph,

    #[error("OddDegreeError: node {node} has odd degree {degree}")]
    OddDegree { node: usize, degree: usize },

    #[error("StepTooLargeError: step {epsilon} does not fit in cell {cell} of height {height}")]
    StepTooLarge { cell: usize, epsilon: f64, height: f64 },

    #[error("EmptyPathError: coverage path has no segments")]
    EmptyPath,

    #[error("ResolutionError: {0}")]
    Resolution(String),

    #[error("ConfigError: {0}")]
    Config(String),
}

impl Error {
    /// Stable name of the error kind, printed on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io(_) => "IOError",
            Error::Parse { .. } => "ParseError",
            Error::NonManifold(_) => "NonManifoldError",
            Error::NonTriangle { .. } => "NonTriangleError",
            Error::DisconnectedMesh { .. } => "DisconnectedMeshError",
            Error::NoBoundary => "NoBoundaryError",
            Error::GenusZero => "GenusZeroError",
            Error::DegenerateBasis { .. } => "DegenerateBasisError",
            Error::Solver { .. } => "SolverError",
            Error::DegenerateFace { .. } => "DegenerateFaceError",
            Error::EmptyCombination => "EmptyCombinationError",
            Error::ZeroFace { .. } => "ZeroFaceError",
            Error::InconsistentHolonomy { .. } => "InconsistentHolonomyError",
            Error::ChartNotSimplyConnected { .. } => "ChartNotSimplyConnectedError",
            Error::ZeroCountMismatch { .. } => "ZeroCountMismatchError",
            Error::HighOrderZero { .. } => "HighOrderZeroError",
            Error::TracingStall(_) => "TracingStallError",
            Error::NonTermination { .. } => "NonTerminationError",
            Error::DanglingArc { .. } => "DanglingArcError",
            Error::CellCountMismatch { .. } => "CellCountMismatchError",
            Error::DisconnectedGraph => "DisconnectedGraphError",
            Error::OddDegree { .. } => "OddDegreeError",
            Error::StepTooLarge { .. } => "StepTooLargeError",
            Error::EmptyPath => "EmptyPathError",
            Error::Resolution(_) => "ResolutionError",
            Error::Config(_) => "ConfigError",
        }
    }

    /// Process exit status for this error kind. Documented in `docs/exit-codes.md`.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Parse { .. } => 3,
            Error::NonManifold(_) => 4,
            Error::NonTriangle { .. } => 5,
            Error::DisconnectedMesh { .. } => 6,
            Error::NoBoundary => 7,
            Error::GenusZero => 8,
            Error::DegenerateBasis { .. } => 9,
            Error::Solver { .. } => 10,
            Error::DegenerateFace { .. } => 11,
            Error::EmptyCombination => 12,
            Error::ZeroFace { .. } => 13,
            Error::InconsistentHolonomy { .. } => 14,
            Error::ChartNotSimplyConnected { .. } => 15,
            Error::ZeroCountMismatch { .. } => 16,
            Error::HighOrderZero { .. } => 17,
            Error::TracingStall(_) => 18,
            Error::NonTermination { .. } => 19,
            Error::DanglingArc { .. } => 20,
            Error::CellCountMismatch { .. } => 21,
            Error::DisconnectedGraph => 22,
            Error::OddDegree { .. } => 23,
            Error::StepTooLarge { .. } => 24,
            Error::EmptyPath => 25,
            Error::Resolution(_) => 26,
            Error::Config(_) => 27,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
