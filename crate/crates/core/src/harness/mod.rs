//! Configuration, sweeps, classification and output for end-to-end runs.

pub mod audit;
pub mod certify;
pub mod classify;
pub mod config;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod plot;
pub mod problem;
pub mod sweep;

pub use audit::{audit_trajectory, certify_euler_lagrange, ElCertificate, TrajectoryAudit};
pub use certify::{certify_jump, JumpCertificate};
pub use classify::{classify_solution, Classification, ClassifySettings, SolutionClass};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use oracle::play_oracle;
pub use pipeline::{execute_jumpcost, execute_run, execute_sweep, RunOutcome, SweepOutcome};
pub use problem::{build_problem, scheme_config};
pub use sweep::{run_sweep, Certificate, ConvergenceReport, RunResult, SweepPlan};
