//! Seeded experiment runs, parameter sweeps, the uncertainty probe and the
//! numerical oracle checks behind the `eve` binary.

mod config;
pub mod oracle;
mod probe;
mod run;
pub mod stats;
mod sweep;

pub use config::{ActivationKind, AgentKind, EnvKind, RunConfig};
pub use oracle::{oracle_check, OracleCheck, OracleReport};
pub use probe::{probe_uncertainty, ProbeCell, ProbeReport};
pub use run::{
    build_agent, build_architecture, build_env, build_eve_agent, build_replay, csv_header,
    exploration_score, run, run_with_progress, write_run_csv, EpisodeRecord, RunMetrics,
    CSV_SCHEMA,
};
pub use sweep::{run_seeds, seeded_config, sweep, SeedOutcome, SweepPoint, SweepReport};
