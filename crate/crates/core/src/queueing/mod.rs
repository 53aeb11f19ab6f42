//! Analytical receiver models: independent per-receptor loss servers grouped
//! into iso-distance zones, and the pooled birth–death chain.

mod chain;
mod loss;
mod zones;

pub use chain::{symmetric_calibrate, symmetric_chain_solve, ChainSolution};
pub use loss::{blocking_probability, mm11_rejection_rate};
pub use zones::{
    receptor_distance, solve_lambda_a1, system_rejection_rate, zone_partition, zone_rejection_rates, ReceptorLayout,
    Zone,
};
