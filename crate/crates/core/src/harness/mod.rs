//! Configuration-driven experiments: sweeps, surfaces, outputs and the
//! self-check suite.

pub mod config;
pub mod output;
pub mod surface;
pub mod sweep;
pub mod validate;

pub use config::{ExperimentConfig, Preset, UserDistribution};
pub use output::{emit_outputs, parse_results_csv, CsvWriter, ResultRow, CSV_HEADER};
pub use surface::{fig3_surface, SurfacePoint, SurfaceResult};
pub use sweep::{base_layout, batch_ids, draw_users, run_sweep, swarm_seed, SweepOutput};
pub use validate::{run_validation, CheckResult};
