//! Minimizing-movement solver for rate-independent systems with vanishing
//! inertia and viscosity, plus the tooling to audit its output: interpolants,
//! discrete energy ledgers, jump detection and viscoinertial transition costs.

pub mod diagnostics;
pub mod dissipation;
pub mod energy;
pub mod error;
pub mod harness;
pub mod jumps;
pub mod spaces;
pub mod stepper;
mod vecops;

pub use dissipation::DissipationPotential;
pub use energy::{ChainEnergy, EnergyModel, Load, Onsite, QuadraticEnergy, Schedule};
pub use error::{Error, Result};
pub use spaces::{Boundary, DiscreteSpace, MetricOperator, NormFamily};
pub use stepper::{DiscreteTrajectory, Problem, SchemeConfig, StepRecord};
