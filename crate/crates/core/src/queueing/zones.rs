//! Per-receptor loss-server model of the receiver.
//!
//! Every receptor is an independent M/M/1/1 server whose offered traffic is
//! proportional to the local concentration, i.e. to `1 / r` where `r` is its
//! distance from the transmitter. Receptors at equal distance are grouped
//! into zones so the model costs `O(zones)` rather than `O(R_RX)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::loss::mm11_rejection_rate;
use crate::error::ModelError;

/// Distance from the TX center to the RX surface point at angle `alpha`,
/// where `alpha = π/2` is the pole farthest from the TX and `−π/2` the
/// nearest one.
pub fn receptor_distance(alpha: f64, distance: f64, rx_radius: f64) -> Result<f64, ModelError> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&alpha) {
        return Err(ModelError::domain(format!("angle {alpha} outside [-π/2, π/2]")));
    }
    Ok(distance_unchecked(alpha, distance, rx_radius))
}

fn distance_unchecked(alpha: f64, distance: f64, rx_radius: f64) -> f64 {
    let along = distance + rx_radius * alpha.sin();
    let across = rx_radius * alpha.cos();
    (along * along + across * across).sqrt()
}

/// One band of receptors sharing the same distance from the TX.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// Signed zone index; `±(F+1)` are the polar caps.
    pub index: i32,
    pub alpha: f64,
    pub count: u64,
    pub distance: f64,
    /// Fractional receptor count before integer normalization.
    pub raw_count: f64,
}

/// Receptors on the RX sphere grouped by distance from the TX.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptorLayout {
    pub receptor_count: u64,
    /// Angular size of the polar cell, `2 / √R_RX`.
    pub beta: f64,
    /// Zone width, `√(4π / R_RX)`.
    pub zone_width: f64,
    /// Zones per hemisphere, excluding the polar cap.
    pub zones_per_hemisphere: u32,
    pub zones: Vec<Zone>,
    /// Distance of the farthest receptor, `d + r_RX`; per-receptor rates
    /// are expressed relative to the receptor sitting there.
    pub reference_distance: f64,
}

/// Splits `receptor_count` uniformly distributed receptors into iso-distance
/// zones. Zone `k` covers latitudes `[(k−1)Δα, kΔα]` and is represented by
/// `α_k = kΔα`; negative indices mirror the near hemisphere. Whatever the
/// `F` bands leave uncovered goes to the polar caps `±(F+1)`, then counts are
/// rounded to integers (largest remainder) so they sum to `receptor_count`.
pub fn zone_partition(receptor_count: u64, distance: f64, rx_radius: f64) -> Result<ReceptorLayout, ModelError> {
    if receptor_count < 4 {
        return Err(ModelError::domain(format!(
            "zone partition degenerates for {receptor_count} < 4 receptors"
        )));
    }
    if !(rx_radius > 0.0 && distance > rx_radius) {
        return Err(ModelError::domain("zone partition needs d > r_RX > 0"));
    }
    let total = receptor_count as f64;
    let beta = 2.0 / total.sqrt();
    let width = (4.0 * PI / total).sqrt();
    let bands = ((PI - beta) / (2.0 * width)).floor() as i32;
    let half = total / 2.0;

    let mut raw: Vec<(i32, f64, f64)> = Vec::with_capacity(2 * bands as usize + 2);
    let mut covered = 0.0;
    for k in 1..=bands {
        let a_hi = k as f64 * width;
        let n = half * (a_hi.sin() - (a_hi - width).sin());
        covered += n;
        raw.push((k, a_hi, n));
        raw.push((-k, -a_hi, n));
    }
    let cap = (half - covered).max(0.0);
    raw.push((bands + 1, FRAC_PI_2, cap));
    raw.push((-(bands + 1), -FRAC_PI_2, cap));
    raw.sort_by_key(|z| z.0);

    let counts = largest_remainder(&raw.iter().map(|z| z.2).collect::<Vec<_>>(), receptor_count);
    let zones = raw
        .into_iter()
        .zip(counts)
        .map(|((index, alpha, raw_count), count)| Zone {
            index,
            alpha,
            count,
            distance: distance_unchecked(alpha, distance, rx_radius),
            raw_count,
        })
        .collect();

    Ok(ReceptorLayout {
        receptor_count,
        beta,
        zone_width: width,
        zones_per_hemisphere: bands as u32,
        zones,
        reference_distance: distance + rx_radius,
    })
}

/// Integer apportionment of `total` proportional to `weights`, ties broken
/// by position so the result is deterministic.
fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

impl ReceptorLayout {
    /// Layout built from explicit `(alpha, count)` zones, e.g. one zone per
    /// receptor of a concrete placement.
    pub fn from_zones(zones: &[(f64, u64)], distance: f64, rx_radius: f64) -> Result<ReceptorLayout, ModelError> {
        if zones.is_empty() {
            return Err(ModelError::domain("layout needs at least one zone"));
        }
        let mut out = Vec::with_capacity(zones.len());
        for (i, &(alpha, count)) in zones.iter().enumerate() {
            out.push(Zone {
                index: i as i32,
                alpha,
                count,
                distance: receptor_distance(alpha, distance, rx_radius)?,
                raw_count: count as f64,
            });
        }
        let receptor_count = out.iter().map(|z| z.count).sum();
        let total = receptor_count as f64;
        Ok(ReceptorLayout {
            receptor_count,
            beta: 2.0 / total.sqrt(),
            zone_width: (4.0 * PI / total).sqrt(),
            zones_per_hemisphere: 0,
            zones: out,
            reference_distance: distance + rx_radius,
        })
    }

    /// Layout with one zone per receptor direction. Directions are unit
    /// vectors in the RX frame with `+x` pointing away from the TX.
    pub fn from_directions(
        directions: &[[f64; 3]],
        distance: f64,
        rx_radius: f64,
    ) -> Result<ReceptorLayout, ModelError> {
        let zones: Vec<(f64, u64)> = directions.iter().map(|u| (u[0].clamp(-1.0, 1.0).asin(), 1)).collect();
        ReceptorLayout::from_zones(&zones, distance, rx_radius)
    }

    fn relative_weight(&self) -> f64 {
        self.zones.iter().map(|z| z.count as f64 / z.distance).sum::<f64>() * self.reference_distance
    }

    /// Accepted rate of a receptor in zone `zone` given the reference rate.
    pub fn zone_rate(&self, zone: &Zone, reference_rate: f64) -> f64 {
        reference_rate * self.reference_distance / zone.distance
    }

    /// Sum of per-receptor accepted rates for a given reference rate; the
    /// forward direction of [`solve_lambda_a1`].
    pub fn total_absorbed(&self, reference_rate: f64) -> f64 {
        self.zones
            .iter()
            .map(|z| z.count as f64 * self.zone_rate(z, reference_rate))
            .sum()
    }

    /// Largest system absorption rate before the hottest occupied zone
    /// saturates at `1 / trafficking_mean`.
    pub fn saturation_absorbed(&self, trafficking_mean: f64) -> f64 {
        let nearest = self
            .zones
            .iter()
            .filter(|z| z.count > 0)
            .map(|z| z.distance)
            .fold(f64::INFINITY, f64::min);
        let reference = nearest / (self.reference_distance * trafficking_mean);
        self.total_absorbed(reference)
    }
}

/// Reference (farthest-receptor) accepted rate that reproduces the system
/// absorption rate `absorbed` over `layout`.
pub fn solve_lambda_a1(absorbed: f64, layout: &ReceptorLayout) -> Result<f64, ModelError> {
    if !(absorbed >= 0.0) {
        return Err(ModelError::domain(format!(
            "absorption rate must be ≥ 0, got {absorbed}"
        )));
    }
    Ok(absorbed / layout.relative_weight())
}

/// Per-zone breakdown of [`system_rejection_rate`].
pub fn zone_rejection_rates(
    absorbed: f64,
    layout: &ReceptorLayout,
    trafficking_mean: f64,
) -> Result<Vec<f64>, ModelError> {
    let reference = solve_lambda_a1(absorbed, layout)?;
    layout
        .zones
        .iter()
        .map(|z| {
            if z.count == 0 {
                return Ok(0.0);
            }
            let rate = layout.zone_rate(z, reference);
            mm11_rejection_rate(rate, trafficking_mean)
                .map(|r| z.count as f64 * r)
                .map_err(|_| {
                    ModelError::Saturation(format!(
                        "zone {} (α = {:.4}, r = {:.4e} m) would accept {:.4}/s per receptor, \
                         beyond the capacity 1/{}/s",
                        z.index, z.alpha, z.distance, rate, trafficking_mean
                    ))
                })
        })
        .collect()
}

/// System rejection rate λ*_r implied by a measured absorption rate λ*_a
/// when every receptor is an M/M/1/1 server.
pub fn system_rejection_rate(absorbed: f64, layout: &ReceptorLayout, trafficking_mean: f64) -> Result<f64, ModelError> {
    Ok(zone_rejection_rates(absorbed, layout, trafficking_mean)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const D: f64 = 26.5e-6;
    const A: f64 = 2.5e-6;

    #[test]
    fn distances_at_poles_and_equator() {
        assert_relative_eq!(
            receptor_distance(FRAC_PI_2, D, A).unwrap(),
            29.0e-6,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            receptor_distance(-FRAC_PI_2, D, A).unwrap(),
            24.0e-6,
            max_relative = 1e-14
        );
        assert_relative_eq!(receptor_distance(0.0, D, A).unwrap(), 26.617e-6, max_relative = 1e-4);
        assert!(receptor_distance(2.0, D, A).is_err());
    }

    #[test]
    fn table_one_partition() {
        let layout = zone_partition(10_000, D, A).unwrap();
        assert_relative_eq!(layout.beta, 0.02, max_relative = 1e-14);
        assert_relative_eq!(layout.zone_width, 0.035_449_077, max_relative = 1e-8);
        assert_eq!(layout.zones_per_hemisphere, 44);
        assert_eq!(layout.zones.len(), 2 * 44 + 2);
        let z1 = layout.zones.iter().find(|z| z.index == 1).unwrap();
        assert_relative_eq!(z1.raw_count, 177.208, max_relative = 1e-5);
        assert!(z1.count == 177 || z1.count == 178);
        assert_eq!(layout.zones.iter().map(|z| z.count).sum::<u64>(), 10_000);
        for z in &layout.zones {
            assert!(z.distance >= D - A - 1e-18 && z.distance <= D + A + 1e-18);
        }
    }

    #[test]
    fn tiny_partition_rejected() {
        assert!(zone_partition(3, D, A).is_err());
        assert!(zone_partition(4, D, A).is_ok());
    }

    #[test]
    fn single_receptor_identity() {
        let layout = ReceptorLayout::from_zones(&[(FRAC_PI_2, 1)], D, A).unwrap();
        assert_relative_eq!(solve_lambda_a1(3.7, &layout).unwrap(), 3.7, max_relative = 1e-15);
        assert_eq!(solve_lambda_a1(0.0, &layout).unwrap(), 0.0);
    }

    #[test]
    fn reference_rate_round_trip_table_one() {
        let layout = zone_partition(10_000, D, A).unwrap();
        let l1 = solve_lambda_a1(1000.0, &layout).unwrap();
        let forward: f64 = layout
            .zones
            .iter()
            .map(|z| z.count as f64 * l1 * (D + A) / z.distance)
            .sum();
        assert_relative_eq!(forward, 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_absorption_zero_rejection() {
        let layout = zone_partition(10_000, D, A).unwrap();
        assert_eq!(system_rejection_rate(0.0, &layout, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_layout_reduces_to_single_server() {
        let layout = ReceptorLayout::from_zones(&[(FRAC_PI_2, 10_000)], D, A).unwrap();
        let sys = system_rejection_rate(1000.0, &layout, 4.0).unwrap();
        let single = 10_000.0 * mm11_rejection_rate(0.1, 4.0).unwrap();
        assert_relative_eq!(sys, single, max_relative = 1e-12);
        assert_relative_eq!(sys, 666.666_666, max_relative = 1e-8);
    }

    #[test]
    fn zones_exceed_uniform_at_table_one() {
        let layout = zone_partition(10_000, D, A).unwrap();
        let zone = system_rejection_rate(1000.0, &layout, 4.0).unwrap();
        assert!(zone > 666.666_666, "zone model {zone}");
    }

    #[test]
    fn saturation_names_zone() {
        let layout = zone_partition(100, D, A).unwrap();
        let err = system_rejection_rate(30.0, &layout, 4.0).unwrap_err();
        assert!(
            matches!(err, ModelError::Saturation(ref m) if m.contains("zone -")),
            "{err}"
        );
        let edge = layout.saturation_absorbed(4.0);
        assert!(system_rejection_rate(edge * 0.999, &layout, 4.0).is_ok());
        assert!(system_rejection_rate(edge * 1.001, &layout, 4.0).is_err());
    }

    #[test]
    fn refinement_is_continuous() {
        // Adding one receptor never moves λ*_r by more than the largest
        // single-zone contribution.
        let absorbed = 500.0;
        let t = 2.0;
        let mut prev = system_rejection_rate(absorbed, &zone_partition(2000, D, A).unwrap(), t).unwrap();
        for r in 2001..=4000u64 {
            let layout = zone_partition(r, D, A).unwrap();
            let parts = zone_rejection_rates(absorbed, &layout, t).unwrap();
            let now: f64 = parts.iter().sum();
            let biggest = parts.iter().cloned().fold(0.0, f64::max);
            assert!(
                (now - prev).abs() <= biggest,
                "R = {r}: jump {} > {biggest}",
                (now - prev).abs()
            );
            prev = now;
        }
    }

    #[test]
    fn zone_and_per_receptor_forms_agree() {
        // Fibonacci directions stand in for a concrete uniform placement.
        let n = 10_000usize;
        let golden = PI * (3.0 - 5f64.sqrt());
        let dirs: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let x = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let rho = (1.0 - x * x).sqrt();
                let phi = golden * i as f64;
                [x, rho * phi.cos(), rho * phi.sin()]
            })
            .collect();
        let per_receptor = ReceptorLayout::from_directions(&dirs, D, A).unwrap();
        let zones = zone_partition(n as u64, D, A).unwrap();
        for &(la, t) in &[(100.0, 2.0), (1000.0, 4.0), (2000.0, 2.0)] {
            let a = system_rejection_rate(la, &per_receptor, t).unwrap();
            let b = system_rejection_rate(la, &zones, t).unwrap();
            assert_relative_eq!(a, b, max_relative = 2e-3);
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_layouts(
            zones in proptest::collection::vec((-FRAC_PI_2..FRAC_PI_2, 1u64..500), 1..40),
            absorbed in 0.0f64..1e5,
            d_um in 6.0f64..60.0,
        ) {
            let layout = ReceptorLayout::from_zones(&zones, d_um * 1e-6, A).unwrap();
            let l1 = solve_lambda_a1(absorbed, &layout).unwrap();
            let forward = layout.total_absorbed(l1);
            prop_assert!((forward - absorbed).abs() <= 1e-12 * absorbed.max(1e-300));
        }

        #[test]
        fn partition_conserves_receptors(r in 4u64..50_000, d_um in 6.0f64..60.0) {
            let layout = zone_partition(r, d_um * 1e-6, A).unwrap();
            prop_assert_eq!(layout.zones.iter().map(|z| z.count).sum::<u64>(), r);
            for z in &layout.zones {
                prop_assert!((z.count as f64 - z.raw_count).abs() < 1.0 + 1e-9);
            }
        }
    }
}
