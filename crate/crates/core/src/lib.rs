//! Receptor saturation in diffusion-based drug delivery.
//!
//! The crate bundles
//! * closed-form diffusion fields around a burst-train transmitter ([`diffusion`]),
//! * two analytical receiver models, per-receptor loss servers grouped into
//!   iso-distance zones and a pooled birth–death chain ([`queueing`]),
//! * a fixed-step Brownian-dynamics simulator with finite receptors ([`sim`]),
//! * a release-rate planner ([`planner`]) and the experiment harness
//!   ([`experiment`]) that ties them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod planner;
pub mod queueing;
pub mod report;
pub mod sim;

pub use config::{load_config, Profile, ScenarioConfig, ScenarioFile, Units};
pub use error::{ConfigError, ExperimentError, ModelError, SimError};
pub use report::{RateReport, WindowStats};
