//! Post-processing of simulator event logs.

use std::f64::consts::PI;

use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::events::{EventKind, EventLog};
use super::placement::{map_coordinates, Direction};
use super::rng::{stream, Domain};
use crate::config::ScenarioConfig;
use crate::error::SimError;

/// Fewest receiver contacts for which the hit ratio is reported.
pub const MIN_SURFACE_CONTACTS: u64 = 10_000;

/// Receptor hits over bare-surface hits for a uniformly hit sphere:
/// R (r_r + r_c)² / (4 r_RX²).
pub fn theoretical_collision_ratio(config: &ScenarioConfig) -> f64 {
    let c = config.si_normalize();
    c.receptor_count as f64 * (c.receptor_radius + c.molecule_radius).powi(2) / (4.0 * c.rx_radius * c.rx_radius)
}

/// Measured receptor hits (free or busy) per bare-surface hit.
pub fn collision_surface_ratio(log: &EventLog, config: &ScenarioConfig) -> Result<f64, SimError> {
    if config.receptor_count == 0 {
        return Ok(0.0);
    }
    let t = &log.totals;
    if t.surface_contacts() < MIN_SURFACE_CONTACTS || t.bare_hits == 0 {
        return Err(SimError::InsufficientEvents(format!(
            "{} receiver contacts ({} bare), need {MIN_SURFACE_CONTACTS}",
            t.surface_contacts(),
            t.bare_hits
        )));
    }
    Ok(t.receptor_hits() as f64 / t.bare_hits as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapCell {
    pub receptor: u32,
    pub theta: f64,
    pub phi: f64,
    pub count: u64,
}

/// Assimilations per receptor, keyed by the receptor's map coordinates.
pub fn assimilation_map(log: &EventLog, receptors: &[Direction]) -> Vec<MapCell> {
    let mut counts = vec![0u64; receptors.len()];
    for e in log.iter_kind(EventKind::Assimilation) {
        if let Some(r) = e.receptor {
            counts[r as usize] += 1;
        }
    }
    receptors
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (u, count))| {
            let (theta, phi) = map_coordinates(u);
            MapCell {
                receptor: i as u32,
                theta,
                phi,
                count,
            }
        })
        .collect()
}

/// Assimilations on the hemisphere facing the transmitter over those on the
/// far hemisphere.
pub fn front_back_ratio(map: &[MapCell]) -> f64 {
    let (mut front, mut back) = (0u64, 0u64);
    for c in map {
        if c.theta.abs() < PI / 2.0 {
            front += c.count;
        } else {
            back += c.count;
        }
    }
    front as f64 / back as f64
}

/// Receptor arrivals (assimilations plus rejections) counted in bins of
/// `bin` seconds over `[from, to)`.
pub fn arrival_counts(log: &EventLog, from: f64, to: f64, bin: f64) -> Vec<u64> {
    let n = ((to - from) / bin + 1e-9).floor() as usize;
    let mut counts = vec![0u64; n];
    for e in &log.events {
        if matches!(e.kind, EventKind::Assimilation | EventKind::Rejection) && e.time >= from {
            let i = ((e.time - from) / bin).floor() as usize;
            if i < n {
                counts[i] += 1;
            }
        }
    }
    counts
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Variance over mean of binned counts; 1 for a Poisson process.
pub fn dispersion_index(counts: &[u64]) -> f64 {
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (m, v) = mean_var(&xs);
    v / m
}

/// Sorted synthetic Poisson sample, sorted observed sample, paired by rank.
/// The synthetic sample has the observed mean and length.
pub fn qq_pairs(counts: &[u64], seed: u64) -> Vec<(f64, f64)> {
    let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    let mut observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    observed.sort_by(f64::total_cmp);
    let mut synthetic: Vec<f64> = match Poisson::new(mean) {
        Ok(p) => {
            let mut rng = stream(seed, Domain::Synthetic, 0);
            (0..counts.len()).map(|_| p.sample(&mut rng)).collect()
        }
        Err(_) => vec![0.0; counts.len()],
    };
    synthetic.sort_by(f64::total_cmp);
    synthetic.into_iter().zip(observed).collect()
}

/// Least-squares slope of observed on synthetic quantiles.
pub fn qq_slope(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn shell_volume(r1: f64, r2: f64) -> f64 {
    4.0 / 3.0 * PI * (r2.powi(3) - r1.powi(3))
}
