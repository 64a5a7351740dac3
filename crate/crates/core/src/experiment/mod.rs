//! JSON-configured experiments: sweeps over worker counts that write
//! traces, benchmark records and a manifest.

mod config;
mod run;

pub use config::{
    load_config, parse_config, AlgorithmSpec, DatasetSpec, DeviceRef, ExperimentConfig, ExperimentKind, SgdParams,
    SCHEMA_VERSION,
};
pub use run::{resolve_output_dir, run_experiment, Manifest, OutputEntry, RunStatus, DEFAULT_OUTPUT_DIR, OUTPUT_ENV};
