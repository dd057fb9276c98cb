//! Experiment configuration, the round-by-round runner, hindsight regret,
//! CSV traces and the `verify` suites.

mod config;
mod run;
mod trace_csv;
pub mod verify;

pub use config::{parse_config, AlgorithmKind, ExperimentConfig, ScheduleOverrides};
pub use run::{
    build_learner, comparator_loss, comparator_loss_linear, realize, run_experiment, run_learner, run_seed,
    PrefixComparator, Realization, RegretReport, RoundTrace, SeedRun,
};
pub use trace_csv::{emit_csv, format_g17, oracle, read_csv, read_csv_file, write_csv, OracleReport, CSV_HEADER};
pub use verify::{verify_suites, CheckRow, VerifyReport};
