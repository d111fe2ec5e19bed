//! Power synchronization control of grid-forming wind turbine strings
//! feeding a diode-rectifier HVDC link, with an averaged plant model and a
//! fixed-step simulator.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line tool live in `upsc-cli`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod controller;
pub mod filter;
pub mod plant;
pub mod record;
pub mod scenario;
pub mod sim;
pub mod spacevec;

pub use controller::{controller_step, ControllerParams, ControllerState, FeedbackConfig, StepOutputs};
pub use plant::{Plant, PlantParams, PlantState};
pub use record::{RunRecord, RunStatus};
pub use scenario::{compute_metrics, preset, Metrics, ScenarioSpec};
pub use sim::{run, SimConfig, SimError, Simulation};
pub use spacevec::{PerUnitBase, SpaceVector};
