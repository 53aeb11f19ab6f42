//! Scenario parameters, unit handling and the JSON scenario format.
//!
//! Scenario files use the units a bench scientist would write down
//! (µm, nm, ms, µs). Everything downstream of [`ScenarioConfig::si_normalize`]
//! works in SI base units.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

const NANO: f64 = 1e-9;
const MICRO: f64 = 1e-6;
const MILLI: f64 = 1e-3;

/// Unit system a [`ScenarioConfig`] is currently expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// The scenario-file units: µm for geometry, nm for molecular radii,
    /// ms for the emission period and µs for the simulation step.
    Schema,
    /// SI base units: m, s, K, Pa·s.
    Si,
}

/// Physical, geometric and emission parameters of one TX–RX scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub units: Units,
    /// Temperature, K.
    pub temperature: f64,
    /// Dynamic viscosity of the medium, Pa·s.
    pub viscosity: f64,
    /// Coefficient of restitution for partially inelastic collisions.
    pub restitution: f64,
    pub molecule_radius: f64,
    pub rx_radius: f64,
    pub tx_radius: f64,
    pub receptor_count: u32,
    pub receptor_radius: f64,
    /// Mean trafficking (service) time of a receptor, s.
    pub trafficking_mean: f64,
    /// Molecules released per burst.
    pub burst_size: u32,
    pub emission_period: f64,
    /// TX–RX center-to-center distance.
    pub distance: f64,
    pub sim_step: f64,
    pub cull_half_side: f64,
    pub molecule_collisions: bool,
    pub seed: u64,
}

/// On-disk JSON layout of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    #[serde(rename = "viscosity_PaS")]
    pub viscosity_pas: f64,
    pub restitution: f64,
    pub molecule_radius_nm: f64,
    pub rx_radius_um: f64,
    pub tx_radius_um: f64,
    pub receptor_count: u32,
    pub receptor_radius_nm: f64,
    pub trafficking_mean_s: f64,
    pub burst_size: u32,
    pub emission_period_ms: f64,
    pub distance_um: f64,
    #[serde(default = "default_sim_step_us")]
    pub sim_step_us: f64,
    #[serde(default = "default_cull_half_side_um")]
    pub cull_half_side_um: f64,
    #[serde(default = "default_molecule_collisions")]
    pub molecule_collisions: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_sim_step_us() -> f64 {
    50.0
}

fn default_cull_half_side_um() -> f64 {
    500.0
}

fn default_molecule_collisions() -> bool {
    true
}

impl From<ScenarioFile> for ScenarioConfig {
    fn from(f: ScenarioFile) -> Self {
        ScenarioConfig {
            units: Units::Schema,
            temperature: f.temperature_k,
            viscosity: f.viscosity_pas,
            restitution: f.restitution,
            molecule_radius: f.molecule_radius_nm,
            rx_radius: f.rx_radius_um,
            tx_radius: f.tx_radius_um,
            receptor_count: f.receptor_count,
            receptor_radius: f.receptor_radius_nm,
            trafficking_mean: f.trafficking_mean_s,
            burst_size: f.burst_size,
            emission_period: f.emission_period_ms,
            distance: f.distance_um,
            sim_step: f.sim_step_us,
            cull_half_side: f.cull_half_side_um,
            molecule_collisions: f.molecule_collisions,
            seed: f.seed,
        }
    }
}

impl ScenarioConfig {
    /// Parameter set of the reference scenario (T_traff = 4 s), in SI units.
    /// The burst size is not part of the reference set; 50 molecules per
    /// 20 ms burst is used as a placeholder.
    pub fn table_one() -> Self {
        ScenarioConfig {
            units: Units::Si,
            temperature: 310.0,
            viscosity: 0.0011,
            restitution: 0.95,
            molecule_radius: 1.75 * NANO,
            rx_radius: 2.5 * MICRO,
            tx_radius: 2.5 * MICRO,
            receptor_count: 10_000,
            receptor_radius: 4.0 * NANO,
            trafficking_mean: 4.0,
            burst_size: 50,
            emission_period: 20.0 * MILLI,
            distance: 26.5 * MICRO,
            sim_step: default_sim_step_us() * MICRO,
            cull_half_side: default_cull_half_side_um() * MICRO,
            molecule_collisions: default_molecule_collisions(),
            seed: 0,
        }
    }

    /// Returns the same scenario in SI base units. Idempotent; dimensionless
    /// fields, counts and flags are copied unchanged.
    pub fn si_normalize(&self) -> ScenarioConfig {
        match self.units {
            Units::Si => self.clone(),
            Units::Schema => ScenarioConfig {
                units: Units::Si,
                molecule_radius: self.molecule_radius * NANO,
                rx_radius: self.rx_radius * MICRO,
                tx_radius: self.tx_radius * MICRO,
                receptor_radius: self.receptor_radius * NANO,
                emission_period: self.emission_period * MILLI,
                distance: self.distance * MICRO,
                sim_step: self.sim_step * MICRO,
                cull_half_side: self.cull_half_side * MICRO,
                ..self.clone()
            },
        }
    }

    /// Converts to the on-disk layout. Schema-unit configs map one-to-one;
    /// SI configs are scaled back to schema units.
    pub fn to_file(&self) -> ScenarioFile {
        let (nm, um, ms, us) = match self.units {
            Units::Schema => (1.0, 1.0, 1.0, 1.0),
            Units::Si => (1.0 / NANO, 1.0 / MICRO, 1.0 / MILLI, 1.0 / MICRO),
        };
        ScenarioFile {
            temperature_k: self.temperature,
            viscosity_pas: self.viscosity,
            restitution: self.restitution,
            molecule_radius_nm: self.molecule_radius * nm,
            rx_radius_um: self.rx_radius * um,
            tx_radius_um: self.tx_radius * um,
            receptor_count: self.receptor_count,
            receptor_radius_nm: self.receptor_radius * nm,
            trafficking_mean_s: self.trafficking_mean,
            burst_size: self.burst_size,
            emission_period_ms: self.emission_period * ms,
            distance_um: self.distance * um,
            sim_step_us: self.sim_step * us,
            cull_half_side_um: self.cull_half_side * um,
            molecule_collisions: self.molecule_collisions,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// Parses and validates a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let config = ScenarioConfig::from(file);
        config.validate()?;
        Ok(config)
    }

    /// Checks every scenario invariant, naming the first one violated.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = self.si_normalize();
        let positive = [
            ("temperature", c.temperature),
            ("viscosity", c.viscosity),
            ("molecule_radius", c.molecule_radius),
            ("rx_radius", c.rx_radius),
            ("tx_radius", c.tx_radius),
            ("receptor_radius", c.receptor_radius),
            ("trafficking_mean", c.trafficking_mean),
            ("emission_period", c.emission_period),
            ("distance", c.distance),
            ("sim_step", c.sim_step),
            ("cull_half_side", c.cull_half_side),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if !(c.restitution > 0.0 && c.restitution <= 1.0) {
            return Err(invalid(format!(
                "restitution must lie in (0, 1], got {}",
                c.restitution
            )));
        }
        if c.receptor_count < 1 {
            return Err(invalid("receptor_count must be at least 1"));
        }
        if c.distance <= c.rx_radius + c.tx_radius {
            return Err(invalid(format!(
                "distance {} m does not exceed rx_radius + tx_radius = {} m (spheres overlap)",
                c.distance,
                c.rx_radius + c.tx_radius
            )));
        }
        if c.sim_step >= c.emission_period {
            return Err(invalid(format!(
                "sim_step {} s must be shorter than emission_period {} s",
                c.sim_step, c.emission_period
            )));
        }
        if c.distance + c.rx_radius >= c.cull_half_side || c.tx_radius >= c.cull_half_side {
            return Err(invalid("both nanomachines must lie inside the cull cube"));
        }
        Ok(())
    }

    /// Emission rate Q/Δt, molecules per second.
    pub fn release_rate(&self) -> f64 {
        let c = self.si_normalize();
        c.burst_size as f64 / c.emission_period
    }

    /// Stokes–Einstein diffusion coefficient of the emitted molecules, m²/s.
    pub fn diffusion_coefficient(&self) -> f64 {
        let c = self.si_normalize();
        crate::diffusion::diffusion_coefficient(c.temperature, c.viscosity, c.molecule_radius)
            .expect("validated scenario has positive parameters")
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Reads, parses and validates a scenario file. The returned config is in
/// schema units; call [`ScenarioConfig::si_normalize`] before computing.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_json(&text)
}

/// Scale preset applied on top of a loaded scenario before simulating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Shrunk geometry that runs in minutes on a laptop while keeping the
    /// receptor surface coverage of the source scenario.
    #[default]
    Desk,
    /// Scenario used exactly as given.
    Paper,
}

impl Profile {
    /// Default simulated duration for this profile, s.
    pub fn default_duration(self) -> f64 {
        match self {
            Profile::Desk => 30.0,
            Profile::Paper => 100.0,
        }
    }

    /// Applies the profile, returning an SI config.
    pub fn apply(self, config: &ScenarioConfig) -> ScenarioConfig {
        let c = config.si_normalize();
        match self {
            Profile::Paper => c,
            Profile::Desk => {
                let receptors = 500u32;
                let rx_radius = 1.0 * MICRO;
                // coverage = R (r_r + r_c)^2 / (4 r_RX^2) is held fixed
                let coverage = c.receptor_count as f64 * (c.receptor_radius + c.molecule_radius).powi(2)
                    / (4.0 * c.rx_radius * c.rx_radius);
                let contact = (coverage * 4.0 * rx_radius * rx_radius / receptors as f64).sqrt();
                ScenarioConfig {
                    receptor_count: receptors,
                    rx_radius,
                    tx_radius: 1.0 * MICRO,
                    receptor_radius: (contact - c.molecule_radius).max(0.1 * NANO),
                    distance: 5.0 * MICRO,
                    sim_step: 100.0 * MICRO,
                    cull_half_side: 10.0 * MICRO,
                    molecule_collisions: false,
                    ..c
                }
            }
        }
    }
}
