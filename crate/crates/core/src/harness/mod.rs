//! Experiment orchestration: configuration, tracking runs, field maps,
//! seed sweeps and file emission.

pub mod config;
pub mod emit;
pub mod field;
pub mod rig;
pub mod script;
pub mod sweep;
pub mod track;

pub use config::{RunConfig, TrackingConfig};
pub use emit::{emit, emit_field_map, Manifest};
pub use field::{field_map, field_map_with, FieldCell, FieldMap};
pub use rig::Rig;
pub use script::{PathScript, Segment, Until};
pub use sweep::{sweep_seeds, SeedOutcome, SweepReport};
pub use track::{run_track, run_track_with, ResetRecord, TrackResult, TrailEntry};
