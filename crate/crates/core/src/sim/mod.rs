//! Fixed-step Brownian-dynamics simulator of one transmitter and one
//! receiver carrying finite, individually tracked receptors.

pub mod analysis;
mod engine;
pub mod events;
pub mod octree;
pub mod placement;
pub mod rng;
mod run;

pub use engine::{build_scenario, default_window, BrownianKernel, Molecule, Receptor, SimOptions, SimState};
pub use events::{Event, EventKind, EventLog, EventTotals, LogPolicy};
pub use run::Warmup;
