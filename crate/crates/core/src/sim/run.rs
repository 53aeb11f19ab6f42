use super::engine::SimState;
use crate::error::SimError;
use crate::report::{RateReport, WindowStats};

/// Windows per block in the automatic warm-up test.
const BLOCK: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Warmup {
    /// First point where two successive blocks of windows agree on the mean
    /// busy count.
    #[default]
    Auto,
    /// Discard everything before this time, s.
    Fixed(f64),
}

/// End of the transient, as a window index, or `None` when no two
/// successive blocks agreed.
fn detect_warmup(busy: &[f64]) -> Option<usize> {
    let stats = |block: &[f64]| {
        let n = block.len() as f64;
        let mean = block.iter().sum::<f64>() / n;
        let var = block.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let blocks = busy.len() / BLOCK;
    for b in 0..blocks.saturating_sub(1) {
        let (ma, va) = stats(&busy[b * BLOCK..(b + 1) * BLOCK]);
        let (mb, vb) = stats(&busy[(b + 1) * BLOCK..(b + 2) * BLOCK]);
        if mb > 0.0 && (mb - ma).abs() <= (0.02 * mb).max(2.0 * (va + vb).sqrt()) {
            return Some((b + 1) * BLOCK);
        }
    }
    None
}

/// Least-squares slope of `y` against its index.
fn slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        sxy += (i as f64 - mx) * (v - my);
        sxx += (i as f64 - mx).powi(2);
    }
    sxy / sxx
}

impl SimState {
    /// Steps until `duration` seconds of simulated time have elapsed since
    /// the clock was zero and reports rates over the post-warm-up part.
    pub fn run(&mut self, duration: f64, warmup: Warmup) -> Result<RateReport, SimError> {
        let w = self.window_length();
        let windows = (duration / w + 1e-9).floor() as usize;
        match warmup {
            Warmup::Auto if windows < 2 * BLOCK => {
                return Err(SimError::InvalidRun(format!(
                    "duration {duration} s is shorter than the {} s needed to detect warm-up",
                    2.0 * BLOCK as f64 * w
                )))
            }
            Warmup::Fixed(t) if !(t >= 0.0 && t + w <= duration) => {
                return Err(SimError::InvalidRun(format!(
                    "warm-up {t} s leaves no full window in a {duration} s run"
                )))
            }
            _ => {}
        }
        let dt = self.config.sim_step;
        let end_step = (duration / dt).round() as u64;
        while ((self.clock() / dt).round() as u64) < end_step {
            self.step();
        }
        Ok(self.report(duration, warmup))
    }

    /// Rate report over windows fully inside `[0, duration]`.
    pub fn report(&self, duration: f64, warmup: Warmup) -> RateReport {
        let w = self.windows.length;
        let n = ((duration / w + 1e-9).floor() as usize).max(1);
        let get = |v: &Vec<u64>, i: usize| v.get(i).copied().unwrap_or(0);
        let busy: Vec<f64> = (0..n)
            .map(|i| self.windows.busy.get(i).copied().unwrap_or(0.0) / w)
            .collect();
        let stats: Vec<WindowStats> = (0..n)
            .map(|i| WindowStats {
                start: i as f64 * w,
                length: w,
                assimilations: get(&self.windows.assimilations, i),
                rejections: get(&self.windows.rejections, i),
                mean_busy: busy[i],
            })
            .collect();
        let idle = busy.iter().all(|&b| b == 0.0);
        let (first, mut converged) = match warmup {
            Warmup::Fixed(t) => (((t / w).ceil() as usize).min(n - 1), true),
            Warmup::Auto if idle => (0, true),
            Warmup::Auto => match detect_warmup(&busy) {
                Some(i) => (i, true),
                None => (n / 2, false),
            },
        };
        let post = &stats[first..];
        let span = post.len() as f64 * w;
        let assimilated: u64 = post.iter().map(|s| s.assimilations).sum();
        let rejected: u64 = post.iter().map(|s| s.rejections).sum();
        let mean_busy = busy[first..].iter().sum::<f64>() / post.len() as f64;
        if mean_busy > 0.0 && slope(&busy[first..]).abs() > 0.02 * mean_busy {
            converged = false;
        }
        let mut report = RateReport::new(
            assimilated as f64 / span,
            rejected as f64 / span,
            mean_busy,
            self.config.receptor_count,
        );
        report.warmup_end = first as f64 * w;
        report.converged = converged;
        report.windows = stats;
        report
    }
}
