//! Configuration, drivers and exporters behind the `qdcover` binary.

pub mod config;
pub mod export;
pub mod json;
pub mod run;

pub use config::{Exports, PipelineConfig, SurfaceOverride};
pub use run::{load_surface, run_inspect, run_pipeline, run_sweep, PlanOutcome, SweepRow};
