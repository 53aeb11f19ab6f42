//! Release-rate planning under occupancy theory: how many molecules per
//! second a transmitter must emit so that at least a fraction `f` of the
//! target's receptors is bound on average.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::ModelError;
use crate::queueing::{system_rejection_rate, zone_partition, ReceptorLayout};

/// Outcome of evaluating (or planning) a release rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    #[serde(rename = "release_rate_per_s")]
    pub release_rate: f64,
    #[serde(rename = "lambda_o")]
    pub offered_rate: f64,
    #[serde(rename = "lambda_a")]
    pub absorbed_rate: f64,
    #[serde(rename = "lambda_r")]
    pub rejected_rate: f64,
    pub occupancy: f64,
    pub target_f: f64,
    pub feasible: bool,
}

/// Offered (binding-attempt) rate at a partially covered receiver:
/// `(r_RX / d) · R r_r / (π r_RX + R r_r) · Q / Δt`.
pub fn offered_rate_approx(
    burst_size: f64,
    period: f64,
    distance: f64,
    rx_radius: f64,
    receptor_count: f64,
    receptor_radius: f64,
) -> Result<f64, ModelError> {
    if !(burst_size >= 0.0) {
        return Err(ModelError::domain("burst size must be nonnegative"));
    }
    if !(period > 0.0 && distance > 0.0 && rx_radius > 0.0 && receptor_count > 0.0 && receptor_radius > 0.0) {
        return Err(ModelError::domain("geometric inputs must be positive"));
    }
    if distance <= rx_radius {
        return Err(ModelError::domain("distance must exceed the receiver radius"));
    }
    Ok(capture_fraction(distance, rx_radius, receptor_count, receptor_radius) * burst_size / period)
}

fn capture_fraction(distance: f64, rx_radius: f64, receptor_count: f64, receptor_radius: f64) -> f64 {
    let covered = receptor_count * receptor_radius;
    rx_radius / distance * covered / (PI * rx_radius + covered)
}

/// Fraction of busy receptors by Little's law, `λ*_a T / R`.
pub fn occupancy(absorbed: f64, trafficking_mean: f64, receptor_count: u64) -> Result<f64, ModelError> {
    if !(absorbed >= 0.0 && trafficking_mean >= 0.0) || receptor_count == 0 {
        return Err(ModelError::domain("occupancy needs nonnegative rates and receptors"));
    }
    let busy = absorbed * trafficking_mean;
    if busy > receptor_count as f64 {
        return Err(ModelError::Infeasible(format!(
            "{busy} busy receptors requested but only {receptor_count} exist"
        )));
    }
    Ok(busy / receptor_count as f64)
}

/// Splits an offered rate into accepted and rejected parts under the zone
/// model: finds λ*_a with `λ*_a + λ*_r(λ*_a) = offered` by bisection.
pub fn split_offered_rate(
    offered: f64,
    layout: &ReceptorLayout,
    trafficking_mean: f64,
) -> Result<(f64, f64), ModelError> {
    if !(offered >= 0.0) || !offered.is_finite() {
        return Err(ModelError::Saturation(format!(
            "no absorption rate carries offered rate {offered}"
        )));
    }
    if offered == 0.0 {
        return Ok((0.0, 0.0));
    }
    let total =
        |absorbed: f64| system_rejection_rate(absorbed, layout, trafficking_mean).map(|rejected| absorbed + rejected);
    let ceiling = if trafficking_mean > 0.0 {
        layout.saturation_absorbed(trafficking_mean).min(offered)
    } else {
        offered
    };
    let (mut lo, mut hi) = (0.0, ceiling);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match total(mid) {
            Ok(value) if value <= offered => {
                lo = mid;
                if offered - value <= 1e-13 * offered {
                    hi = mid;
                    break;
                }
            }
            _ => hi = mid,
        }
    }
    // `lo` always satisfies total(lo) ≤ offered; `hi` may sit on the
    // saturation edge, so settle on whichever side evaluates and is closer.
    let candidates = [lo, hi];
    let mut best: Option<(f64, f64)> = None;
    for absorbed in candidates {
        if let Ok(value) = total(absorbed) {
            if best.is_none_or(|(_, v)| (value - offered).abs() < (v - offered).abs()) {
                best = Some((absorbed, value));
            }
        }
    }
    let (absorbed, value) = best.ok_or_else(|| ModelError::Saturation("bisection lost feasibility".into()))?;
    if (value - offered).abs() > 1e-9 * offered {
        return Err(ModelError::Saturation(format!(
            "offered rate {offered}/s exceeds what the receiver can split (reached {value}/s)"
        )));
    }
    Ok((absorbed, value - absorbed))
}

/// Predicted receiver behaviour for a given release rate.
pub fn evaluate_release_rate(
    release_rate: f64,
    config: &ScenarioConfig,
    target_f: f64,
) -> Result<PlanResult, ModelError> {
    let c = config.si_normalize();
    let layout = zone_partition(c.receptor_count as u64, c.distance, c.rx_radius)?;
    evaluate_with_layout(release_rate, &c, &layout, target_f)
}

fn evaluate_with_layout(
    release_rate: f64,
    c: &ScenarioConfig,
    layout: &ReceptorLayout,
    target_f: f64,
) -> Result<PlanResult, ModelError> {
    let offered = offered_rate_approx(
        release_rate,
        1.0,
        c.distance,
        c.rx_radius,
        c.receptor_count as f64,
        c.receptor_radius,
    )?;
    let (absorbed, rejected) = split_offered_rate(offered, layout, c.trafficking_mean)?;
    let rho = occupancy(absorbed, c.trafficking_mean, c.receptor_count as u64)?;
    Ok(PlanResult {
        release_rate,
        offered_rate: offered,
        absorbed_rate: absorbed,
        rejected_rate: rejected,
        occupancy: rho,
        target_f,
        feasible: rho >= target_f,
    })
}

/// Smallest release rate Q/Δt whose predicted occupancy is at least
/// `target_f`.
pub fn min_release_rate(target_f: f64, config: &ScenarioConfig) -> Result<PlanResult, ModelError> {
    if !(target_f > 0.0 && target_f < 1.0) {
        return Err(ModelError::domain(format!(
            "target fraction must lie in (0, 1), got {target_f}"
        )));
    }
    let c = config.si_normalize();
    let layout = zone_partition(c.receptor_count as u64, c.distance, c.rx_radius)?;
    let max_occupancy = layout.saturation_absorbed(c.trafficking_mean) * c.trafficking_mean / c.receptor_count as f64;
    if target_f >= max_occupancy {
        return Err(ModelError::Infeasible(format!(
            "occupancy {target_f} needs the nearest receptors to saturate (limit {max_occupancy:.4})"
        )));
    }
    let rho = |rate: f64| evaluate_with_layout(rate, &c, &layout, target_f);
    let unit = capture_fraction(c.distance, c.rx_radius, c.receptor_count as f64, c.receptor_radius);
    // With no rejections, ρ = f needs λ_o = f R / T.
    let mut lo = 0.0;
    let mut hi = target_f * c.receptor_count as f64 / (c.trafficking_mean * unit);
    let mut at_hi = rho(hi)?;
    while !at_hi.feasible {
        lo = hi;
        hi *= 2.0;
        at_hi = rho(hi)?;
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        let at_mid = rho(mid)?;
        if at_mid.feasible {
            hi = mid;
            at_hi = at_mid;
        } else {
            lo = mid;
        }
    }
    Ok(at_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_one() -> ScenarioConfig {
        ScenarioConfig::table_one()
    }

    #[test]
    fn offered_rate_table_one() {
        let c = table_one();
        let per_unit = offered_rate_approx(1.0, 1.0, c.distance, c.rx_radius, 1e4, c.receptor_radius).unwrap();
        assert_relative_eq!(per_unit, 0.078_856, max_relative = 1e-4);
        let lo = offered_rate_approx(50.0, 0.02, c.distance, c.rx_radius, 1e4, c.receptor_radius).unwrap();
        assert_relative_eq!(lo, 197.14, max_relative = 1e-4);
        let doubled = offered_rate_approx(100.0, 0.02, c.distance, c.rx_radius, 1e4, c.receptor_radius).unwrap();
        assert_relative_eq!(doubled, 2.0 * lo, max_relative = 1e-15);
    }

    #[test]
    fn offered_rate_dense_limit() {
        let c = table_one();
        let dense = offered_rate_approx(1.0, 1.0, c.distance, c.rx_radius, 1e15, c.receptor_radius).unwrap();
        assert_relative_eq!(dense, c.rx_radius / c.distance, max_relative = 1e-6);
        assert!(offered_rate_approx(1.0, 1.0, 1e-6, 2e-6, 10.0, 1e-9).is_err());
        assert!(offered_rate_approx(1.0, 0.0, 1e-5, 2e-6, 10.0, 1e-9).is_err());
    }

    #[test]
    fn occupancy_cases() {
        assert_relative_eq!(occupancy(1000.0, 4.0, 10_000).unwrap(), 0.4, max_relative = 1e-15);
        assert_eq!(occupancy(0.0, 4.0, 10_000).unwrap(), 0.0);
        let a = occupancy(100.0, 1.0, 10_000).unwrap();
        let b = occupancy(100.0, 3.0, 10_000).unwrap();
        assert_relative_eq!(b, 3.0 * a, max_relative = 1e-15);
        assert!(matches!(occupancy(3000.0, 4.0, 10_000), Err(ModelError::Infeasible(_))));
    }

    #[test]
    fn split_edges() {
        let c = table_one();
        let layout = zone_partition(10_000, c.distance, c.rx_radius).unwrap();
        assert_eq!(split_offered_rate(0.0, &layout, 4.0).unwrap(), (0.0, 0.0));
        let (a, r) = split_offered_rate(500.0, &layout, 1e-6).unwrap();
        assert_relative_eq!(a, 500.0, max_relative = 1e-6);
        assert!(r < 1e-3);
    }

    #[test]
    fn split_recomposes() {
        let c = table_one();
        let layout = zone_partition(10_000, c.distance, c.rx_radius).unwrap();
        for &offered in &[1.0, 37.5, 400.0, 1500.0, 5000.0, 1e5] {
            let (a, r) = split_offered_rate(offered, &layout, 4.0).unwrap();
            assert_relative_eq!(a + r, offered, max_relative = 1e-9);
            let direct = system_rejection_rate(a, &layout, 4.0).unwrap();
            assert_relative_eq!(direct, r, max_relative = 1e-9);
        }
    }

    #[test]
    fn planning_near_zero_and_monotone() {
        let c = table_one();
        let tiny = min_release_rate(1e-6, &c).unwrap();
        assert!(tiny.release_rate < 1.0, "{tiny:?}");
        let mut prev = 0.0;
        for i in 1..10 {
            let f = i as f64 * 0.08;
            let plan = min_release_rate(f, &c).unwrap();
            assert!(plan.feasible && plan.occupancy >= f);
            assert_relative_eq!(
                plan.occupancy,
                plan.absorbed_rate * c.trafficking_mean / c.receptor_count as f64,
                max_relative = 1e-12
            );
            assert!(plan.release_rate >= prev);
            prev = plan.release_rate;
        }
    }

    #[test]
    fn congestion_makes_planning_superlinear() {
        let c = table_one();
        let r2 = min_release_rate(0.2, &c).unwrap().release_rate;
        let r4 = min_release_rate(0.4, &c).unwrap().release_rate;
        assert!(r4 > 2.0 * r2, "{r4} vs 2×{r2}");
    }

    #[test]
    fn invalid_targets() {
        let c = table_one();
        assert!(matches!(min_release_rate(0.0, &c), Err(ModelError::Domain(_))));
        assert!(matches!(min_release_rate(1.0, &c), Err(ModelError::Domain(_))));
        assert!(matches!(min_release_rate(0.99, &c), Err(ModelError::Infeasible(_))));
    }
}
