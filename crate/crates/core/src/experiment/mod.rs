//! Experiment configuration, the end-to-end runner, reports and fixtures.

pub mod config;
pub mod fixture;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Fusion, Modality, ModelKind, Task};
pub use fixture::{make_synthetic_fixture, write_fixture, Fixture, FixtureSpec};
pub use report::{
    emit_report, parse_csv, render_csv, render_table, render_text, ReportFormat, ReportRow,
};
pub use runner::{run_experiment, run_on_sets, write_outputs, ExperimentOutcome};
