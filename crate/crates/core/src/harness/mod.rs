//! Reproducible Monte Carlo experiments and their result files.

pub mod config;
pub mod output;
pub mod run;
pub mod stats;

pub use config::{CodebookSpec, Precoder, RaConfigs, SimConfig, Strategy};
pub use output::{emit, load_result, BoundValues, ExperimentKind, ExperimentResult, Metric, Series};
pub use run::{
    rayleigh_source, run_contrast_experiment, run_contrast_with, run_delta_ra_experiment, run_delta_ra_with,
    run_scaling_experiment, run_sum_rate_experiment, run_sum_rate_with, ChannelSource,
};
