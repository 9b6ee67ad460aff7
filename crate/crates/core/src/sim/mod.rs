//! Simulation designs, Monte Carlo replications and timing benchmarks.

mod bench;
mod dgp;
mod monte_carlo;

pub use bench::{run_bench, write_traces_csv, Algorithm, BenchOptions, BenchTrace, TracePoint};
pub use dgp::{generate_dataset, BetaLayout, DgpSpec, ErrorFamily, DEFAULT_BETA_HEAD};
pub use monte_carlo::{
    aggregate, identity_residual, replicate, replication_seed, run_monte_carlo, run_monte_carlo_with, McReport,
    ReplicationOutcome, RuntimeStats, COVERAGE_Z,
};
