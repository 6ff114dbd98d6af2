//! Dataset parsing, sharding, trace CSV files and experiment configs.

mod config;
mod libsvm;
mod synthetic;
mod trace_csv;

pub use config::{
    parse_experiment_config, read_experiment_config, ConfigError, DataLayout, DataSource,
    ExperimentConfig, ProblemSpec, StartPoint,
};
pub use libsvm::{
    parse_libsvm, parse_libsvm_with, partition_data, LibSvmError, ParseOptions, SparseDataset,
};
pub use synthetic::{a1a_surrogate, A1A_FEATURES, A1A_ROWS};
pub use trace_csv::{
    read_trace_csv, write_mean_trace_csv, write_trace_csv, TRACE_HEADER,
};
