use serde::{Deserialize, Serialize};

/// Counts collected over one fixed-length observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start: f64,
    pub length: f64,
    pub assimilations: u64,
    pub rejections: u64,
    /// Time-averaged number of busy receptors over the window.
    pub mean_busy: f64,
}

/// Measured (or predicted) reception rates of one receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// λ*_a, assimilations per second.
    pub absorbed_rate: f64,
    /// λ*_r, hits on busy receptors per second.
    pub rejected_rate: f64,
    /// λ_o = λ*_a + λ*_r.
    pub offered_rate: f64,
    pub blocking_probability: f64,
    pub mean_busy_receptors: f64,
    pub occupancy: f64,
    pub warmup_end: f64,
    /// False when the busy-receptor count was still drifting at the end of
    /// the run.
    pub converged: bool,
    pub windows: Vec<WindowStats>,
}

impl RateReport {
    /// Builds a report from the absorbed/rejected rates, deriving the offered
    /// rate, blocking probability and occupancy so that the identities
    /// between them hold by construction.
    pub fn new(absorbed_rate: f64, rejected_rate: f64, mean_busy_receptors: f64, receptor_count: u32) -> RateReport {
        let offered_rate = absorbed_rate + rejected_rate;
        let blocking_probability = if offered_rate > 0.0 {
            rejected_rate / offered_rate
        } else {
            0.0
        };
        RateReport {
            absorbed_rate,
            rejected_rate,
            offered_rate,
            blocking_probability,
            mean_busy_receptors,
            occupancy: (mean_busy_receptors / receptor_count as f64).clamp(0.0, 1.0),
            warmup_end: 0.0,
            converged: true,
            windows: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn identities_hold(a in 0.0f64..1e6, r in 0.0f64..1e6, busy in 0.0f64..1e4, n in 1u32..20_000) {
            let rep = RateReport::new(a, r, busy, n);
            prop_assert_eq!(rep.offered_rate, a + r);
            prop_assert!((0.0..=1.0).contains(&rep.blocking_probability));
            prop_assert!((0.0..=1.0).contains(&rep.occupancy));
            if rep.offered_rate > 0.0 {
                prop_assert_eq!(rep.blocking_probability, r / (a + r));
            }
        }
    }

    #[test]
    fn empty_report() {
        let rep = RateReport::new(0.0, 0.0, 0.0, 10);
        assert_eq!(rep.blocking_probability, 0.0);
        assert_eq!(rep.occupancy, 0.0);
    }
}
