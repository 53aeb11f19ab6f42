//! Pooled-receptor ("symmetric") birth–death model of the receiver.
//!
//! State `i` is the number of bound receptors. Bonds form at
//! `λ_i = K (R − i)` and are internalized at `μ_i = i / T`, so all receptors
//! see the same concentration and behave as one pool of servers. Rejections
//! are attributed to hits on the `i` bound receptors in proportion to the
//! steady-state mean occupancy.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Steady state of the pooled-receptor chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSolution {
    pub receptor_count: u64,
    /// Per-free-receptor binding rate, 1/s.
    pub binding_rate: f64,
    pub trafficking_mean: f64,
    /// π_i for i = 0..=R.
    pub probabilities: Vec<f64>,
    /// n_b = Σ i π_i.
    pub mean_bound: f64,
    /// λ_a = Σ λ_i π_i.
    pub arrival_rate: f64,
    /// λ_r = Σ λ_{i,r} π_i.
    pub rejection_rate: f64,
    /// Largest global-balance violation relative to the largest state flow.
    pub balance_residual: f64,
}

const RESIDUAL_LIMIT: f64 = 1e-10;

/// Solves the chain for binding rate `binding_rate` (the lumped `k₊ c`).
pub fn symmetric_chain_solve(
    receptor_count: u64,
    binding_rate: f64,
    trafficking_mean: f64,
) -> Result<ChainSolution, ModelError> {
    if receptor_count == 0 {
        return Err(ModelError::domain("chain needs at least one receptor"));
    }
    if !(binding_rate >= 0.0 && binding_rate.is_finite()) {
        return Err(ModelError::domain(format!(
            "binding rate must be ≥ 0, got {binding_rate}"
        )));
    }
    if !(trafficking_mean > 0.0) {
        return Err(ModelError::domain("trafficking mean must be positive"));
    }
    let n = receptor_count as usize;
    let birth = |i: usize| binding_rate * (n - i) as f64;
    let death = |i: usize| i as f64 / trafficking_mean;

    let mut probabilities = vec![0.0; n + 1];
    if binding_rate == 0.0 {
        probabilities[0] = 1.0;
    } else {
        // Detailed-balance recursion in log space; the upper states of large
        // chains underflow otherwise.
        let mut logs = Vec::with_capacity(n + 1);
        logs.push(0.0f64);
        for i in 0..n {
            let prev = logs[i];
            logs.push(prev + birth(i).ln() - death(i + 1).ln());
        }
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
        for (p, l) in probabilities.iter_mut().zip(&logs) {
            *p = (l - peak).exp() / norm;
        }
    }

    let mut flow_scale = 0.0f64;
    let mut residual = 0.0f64;
    for i in 0..=n {
        let out = (birth(i) + death(i)) * probabilities[i];
        let inflow = if i > 0 {
            birth(i - 1) * probabilities[i - 1]
        } else {
            0.0
        } + if i < n {
            death(i + 1) * probabilities[i + 1]
        } else {
            0.0
        };
        flow_scale = flow_scale.max(out);
        residual = residual.max((inflow - out).abs());
    }
    let balance_residual = if flow_scale > 0.0 { residual / flow_scale } else { 0.0 };
    if !(balance_residual < RESIDUAL_LIMIT) {
        return Err(ModelError::Numeric(format!(
            "balance residual {balance_residual:e} exceeds {RESIDUAL_LIMIT:e}"
        )));
    }

    let mean_bound: f64 = probabilities.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let arrival_rate: f64 = (0..n).map(|i| birth(i) * probabilities[i]).sum();
    let free = receptor_count as f64 - mean_bound;
    // λ_{i,r} = λ_i n_b i / ((R − n_b)(R − i)) = K n_b i / (R − n_b)
    let rejection_rate = if mean_bound > 0.0 {
        (1..=n)
            .map(|i| binding_rate * mean_bound * i as f64 / free * probabilities[i])
            .sum()
    } else {
        0.0
    };

    Ok(ChainSolution {
        receptor_count,
        binding_rate,
        trafficking_mean,
        probabilities,
        mean_bound,
        arrival_rate,
        rejection_rate,
        balance_residual,
    })
}

/// Finds the binding rate whose steady-state arrival rate equals `target`
/// (to 1e-9 relative) and returns the corresponding solution.
pub fn symmetric_calibrate(
    target: f64,
    receptor_count: u64,
    trafficking_mean: f64,
) -> Result<ChainSolution, ModelError> {
    if !(target >= 0.0) {
        return Err(ModelError::domain(format!("target rate must be ≥ 0, got {target}")));
    }
    let capacity = receptor_count as f64 / trafficking_mean;
    if target >= capacity {
        return Err(ModelError::Infeasible(format!(
            "absorption rate {target}/s is at or above the pooled capacity {capacity}/s"
        )));
    }
    if target == 0.0 {
        return symmetric_chain_solve(receptor_count, 0.0, trafficking_mean);
    }
    let arrival = |k: f64| symmetric_chain_solve(receptor_count, k, trafficking_mean).map(|s| s.arrival_rate);

    // λ_a(K) ≤ K R, so K = target / R is a lower bound.
    let mut lo = target / receptor_count as f64;
    let mut hi = lo;
    while arrival(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(ModelError::Numeric("binding-rate bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = arrival(mid)?;
        if (value - target).abs() <= 1e-13 * target {
            lo = mid;
            hi = mid;
            break;
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let solution = symmetric_chain_solve(receptor_count, 0.5 * (lo + hi), trafficking_mean)?;
    if (solution.arrival_rate - target).abs() > 1e-9 * target {
        return Err(ModelError::Numeric(format!(
            "calibration stalled at λ_a = {} for target {target}",
            solution.arrival_rate
        )));
    }
    Ok(solution)
}
