//! Experiment harness: TOML configuration, dataset and trace files,
//! deterministic seed derivation, and the experiment runner.

pub mod config;
pub mod dataset;
pub mod runner;
pub mod seed;
pub mod traces;

pub use config::{
    ModelConfig, ModelKind, OutputConfig, Predictive, ProposalKind, RunConfig, SamplerConfig,
};
pub use dataset::Dataset;
pub use runner::{
    run_experiment, run_iterated_baseline, simulate_dataset, BootstrapBuilder, ExperimentOutput,
    ModelInstance,
};
pub use seed::derive_seed;
pub use traces::{
    read_traces, series_by_variable, write_manifest, write_traces, Manifest, TraceRow,
};
