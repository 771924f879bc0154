//! Operational surface: configuration, initial data, runs, sweeps and the
//! verification suites.

pub mod config;
pub mod data;
pub mod run;
pub mod suites;

pub use config::{Formulation, Generator, RunConfig};
pub use data::{generate_initial_data, InitialData};
pub use run::{integrate, integrate_from, simulate, sweep, thread_pool, RunSummary, SweepRow, Trajectory};
pub use suites::{run_suite, Check, Suite, SuiteReport};
