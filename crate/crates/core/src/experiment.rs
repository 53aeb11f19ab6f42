//! Experiment harness: sweeps over scenario parameters that run the
//! simulator and the analytical models side by side and write CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Profile, ScenarioConfig, ScenarioFile};
use crate::diffusion::steady_concentration;
use crate::error::{ExperimentError, ModelError, SimError};
use crate::planner::{evaluate_release_rate, min_release_rate, offered_rate_approx};
use crate::queueing::{symmetric_calibrate, system_rejection_rate, zone_partition};
use crate::report::RateReport;
use crate::sim::analysis::{
    arrival_counts, assimilation_map, dispersion_index, front_back_ratio, qq_pairs, qq_slope, shell_volume,
};
use crate::sim::rng::{derive_seed, Domain};
use crate::sim::{LogPolicy, SimOptions, SimState, Warmup};

/// Arrival counting bin for the Poissonity analysis, s.
pub const ARRIVAL_BIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    QqPoisson,
    RejectionCurve,
    BlockingCurve,
    ReceptorSensitivity,
    OccupancyCurve,
    RangeCurve,
    AssimilationMap,
    ConcentrationProfile,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::QqPoisson => "qq_poisson",
            ExperimentKind::RejectionCurve => "rejection_curve",
            ExperimentKind::BlockingCurve => "blocking_curve",
            ExperimentKind::ReceptorSensitivity => "receptor_sensitivity",
            ExperimentKind::OccupancyCurve => "occupancy_curve",
            ExperimentKind::RangeCurve => "range_curve",
            ExperimentKind::AssimilationMap => "assimilation_map",
            ExperimentKind::ConcentrationProfile => "concentration_profile",
        }
    }

    /// The quantity this kind of experiment sweeps.
    pub fn sweep_variable(self) -> SweepVariable {
        match self {
            ExperimentKind::RejectionCurve | ExperimentKind::BlockingCurve => SweepVariable::LambdaA,
            ExperimentKind::ReceptorSensitivity => SweepVariable::ReceptorCount,
            ExperimentKind::RangeCurve => SweepVariable::DistanceUm,
            ExperimentKind::ConcentrationProfile => SweepVariable::RadiusUm,
            ExperimentKind::QqPoisson | ExperimentKind::OccupancyCurve | ExperimentKind::AssimilationMap => {
                SweepVariable::ReleaseRate
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Target absorption rate λ*_a, 1/s.
    LambdaA,
    /// Transmitter release rate Q/Δt, 1/s.
    ReleaseRate,
    ReceptorCount,
    DistanceUm,
    /// Shell radius around the transmitter, µm.
    RadiusUm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

fn one_u32() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, as read from a JSON spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Inline scenario; exclusive with `scenario_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioFile>,
    /// Scenario file, relative to the spec file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_path: Option<PathBuf>,
    #[serde(default)]
    pub profile: Profile,
    pub sweep: Sweep,
    #[serde(default = "one_u32")]
    pub replicates: u32,
    /// Simulated time per run; the profile default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Fixed warm-up; automatic detection when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_s: Option<f64>,
    /// Length of each emission-search pilot run; ten observation windows
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_s: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Model-only sweeps skip the simulator when false.
    #[serde(default = "yes")]
    pub simulate: bool,
    /// Occupancy target for `range_curve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_f: Option<f64>,
    /// Target absorption rate for `receptor_sensitivity`, 1/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_a: Option<f64>,
    /// Extra trafficking means for `rejection_curve` and `blocking_curve`;
    /// the scenario value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trafficking_means_s: Option<Vec<f64>>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<ExperimentSpec, ExperimentError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.scenario.is_some() == self.scenario_path.is_some() {
            return bad("give exactly one of `scenario` and `scenario_path`".into());
        }
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            return bad("sweep grid is empty".into());
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return bad("sweep grid contains a non-finite value".into());
        }
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return bad("sweep grid must be strictly monotone".into());
        }
        let expected = self.kind.sweep_variable();
        if self.sweep.variable != expected {
            return bad(format!(
                "{} sweeps {:?}, not {:?}",
                self.kind.name(),
                expected,
                self.sweep.variable
            ));
        }
        if grid.iter().any(|&v| v < 0.0) {
            return bad("sweep values must be nonnegative".into());
        }
        if self.replicates < 1 {
            return bad("replicate count must be at least 1".into());
        }
        if self.workers < 1 {
            return bad("worker count must be at least 1".into());
        }
        for (name, v) in [("duration_s", self.duration_s), ("pilot_s", self.pilot_s)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive"));
                }
            }
        }
        if let Some(w) = self.warmup_s {
            if !(w >= 0.0) || w >= self.duration_s.unwrap_or(self.profile.default_duration()) {
                return bad("warmup_s must lie in [0, duration_s)".into());
            }
        }
        match self.kind {
            ExperimentKind::RangeCurve if !self.target_f.is_some_and(|f| f > 0.0 && f < 1.0) => {
                bad("range_curve needs target_f in (0, 1)".into())
            }
            ExperimentKind::ReceptorSensitivity if !self.lambda_a.is_some_and(|l| l > 0.0) => {
                bad("receptor_sensitivity needs a positive lambda_a".into())
            }
            ExperimentKind::ReceptorSensitivity if grid.iter().any(|&v| v < 1.0 || v.fract() != 0.0) => {
                bad("receptor counts must be positive integers".into())
            }
            _ => {
                if let Some(ts) = &self.trafficking_means_s {
                    if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                        return bad("trafficking_means_s must be a nonempty list of positive times".into());
                    }
                }
                Ok(())
            }
        }
    }

    /// Loaded scenario with the profile applied, in SI units.
    pub fn resolve_scenario(&self, base_dir: &Path) -> Result<ScenarioConfig, ExperimentError> {
        let config = match (&self.scenario, &self.scenario_path) {
            (Some(file), _) => {
                let c = ScenarioConfig::from(file.clone());
                c.validate()?;
                c
            }
            (None, Some(path)) => crate::config::load_config(base_dir.join(path))?,
            (None, None) => return Err(ExperimentError::Invalid("no scenario".into())),
        };
        Ok(self.profile.apply(&config))
    }

    fn duration(&self) -> f64 {
        self.duration_s.unwrap_or(self.profile.default_duration())
    }

    fn warmup(&self) -> Warmup {
        self.warmup_s.map_or(Warmup::Auto, Warmup::Fixed)
    }
}

/// Reads and validates a spec file. Relative `scenario_path` and
/// `output_dir` entries are resolved against the spec's directory.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<(ExperimentSpec, PathBuf), ExperimentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if spec.output_dir.is_relative() {
        spec.output_dir = base.join(&spec.output_dir);
    }
    Ok((spec, base))
}

/// Same scenario, emitting `rate` molecules per second. The burst size is
/// kept unless the period would drop below two simulation steps.
pub fn with_release_rate(config: &ScenarioConfig, rate: f64) -> ScenarioConfig {
    let mut c = config.si_normalize();
    if rate <= 0.0 {
        c.burst_size = 0;
        return c;
    }
    let mut q = c.burst_size.max(1);
    if (q as f64 / rate) < 2.0 * c.sim_step {
        q = (2.0 * c.sim_step * rate).ceil() as u32;
    }
    c.burst_size = q;
    c.emission_period = q as f64 / rate;
    c
}

/// Outcome of one simulation run.
pub struct SimRun {
    pub report: RateReport,
    pub state: SimState,
}

/// Builds a fresh state from `config` and runs it.
pub fn simulate(
    config: &ScenarioConfig,
    duration: f64,
    warmup: Warmup,
    options: &SimOptions,
) -> Result<SimRun, SimError> {
    let mut state = SimState::new(config, options)?;
    let report = state.run(duration, warmup)?;
    Ok(SimRun { report, state })
}

fn quiet() -> SimOptions {
    SimOptions {
        log: LogPolicy::contacts_only(),
        ..SimOptions::default()
    }
}

/// Release rate at which the simulated absorption rate is within 5% of
/// `target`. Starts from the analytical offered-rate estimate and corrects
/// proportionally from short pilot runs.
pub fn search_release_rate(
    config: &ScenarioConfig,
    target: f64,
    pilot: f64,
    seed: u64,
) -> Result<f64, ExperimentError> {
    let c = config.si_normalize();
    let capacity = c.receptor_count as f64 / c.trafficking_mean;
    if !(target > 0.0) || target >= capacity {
        return Err(ModelError::Infeasible(format!("absorption rate {target}/s is outside (0, {capacity})/s")).into());
    }
    let unit = offered_rate_approx(
        1.0,
        1.0,
        c.distance,
        c.rx_radius,
        c.receptor_count as f64,
        c.receptor_radius,
    )?;
    let mut rate = target / unit;
    let warmup = Warmup::Fixed(pilot / 2.0);
    for round in 0..6u64 {
        let mut trial = with_release_rate(&c, rate);
        trial.seed = derive_seed(seed, Domain::Experiment, 0xffff_0000 + round);
        let opts = SimOptions {
            window: Some(pilot / 10.0),
            ..quiet()
        };
        let measured = simulate(&trial, pilot, warmup, &opts)?.report.absorbed_rate;
        if measured <= 0.0 {
            rate *= 10.0;
            continue;
        }
        let error = measured / target - 1.0;
        rate *= target / measured;
        if error.abs() < 0.05 {
            break;
        }
    }
    Ok(rate)
}

/// Both analytical receivers evaluated at the same absorption rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelComparison {
    pub lambda_a: f64,
    pub zone: Result<f64, ModelError>,
    pub symmetric: Result<f64, ModelError>,
}

impl ModelComparison {
    /// Zone-model over symmetric-model rejection rate.
    pub fn ratio(&self) -> Option<f64> {
        match (&self.zone, &self.symmetric) {
            (Ok(z), Ok(s)) if *s > 0.0 => Some(z / s),
            _ => None,
        }
    }
}

pub fn compare_models(lambda_a: f64, config: &ScenarioConfig) -> ModelComparison {
    let c = config.si_normalize();
    let zone = zone_partition(c.receptor_count as u64, c.distance, c.rx_radius)
        .and_then(|layout| system_rejection_rate(lambda_a, &layout, c.trafficking_mean));
    let symmetric =
        symmetric_calibrate(lambda_a, c.receptor_count as u64, c.trafficking_mean).map(|s| s.rejection_rate);
    ModelComparison {
        lambda_a,
        zone,
        symmetric,
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A CSV table held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&'static str]) -> Table {
        Table {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// Parsed numeric column; empty cells become NaN.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let i = self.column(name).expect("unknown column");
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn model_cell(r: &Result<f64, ModelError>) -> String {
    r.as_ref().map_or(String::new(), |v| num(*v))
}

fn model_status(cmp: &ModelComparison) -> Option<String> {
    [&cmp.zone, &cmp.symmetric]
        .into_iter()
        .find_map(|r| r.as_ref().err().map(|e| e.to_string()))
}

/// Per-point simulation outcome summarised over replicates.
#[derive(Clone, Debug, Default)]
struct Replicated {
    release_rate: f64,
    lambda_a: Vec<f64>,
    lambda_r: Vec<f64>,
    blocking: Vec<f64>,
    occupancy: Vec<f64>,
    dispersion: Vec<f64>,
    qq_slope: Vec<f64>,
    arrivals_per_bin: Vec<f64>,
    qq: Vec<Vec<(f64, f64)>>,
    map_counts: Vec<Vec<u64>>,
    map_coords: Vec<(f64, f64)>,
    front_back: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extras {
    None,
    Arrivals,
    Map,
}

/// Work shared by every simulated grid point.
struct Runner<'a> {
    spec: &'a ExperimentSpec,
    pool: rayon::ThreadPool,
}

impl Runner<'_> {
    fn replicate_seed(&self, point: usize, rep: u32) -> u64 {
        derive_seed(self.spec.seed, Domain::Experiment, ((point as u64) << 20) | rep as u64)
    }

    fn pilot(&self, config: &ScenarioConfig) -> f64 {
        self.spec
            .pilot_s
            .unwrap_or(10.0 * crate::sim::default_window(config.trafficking_mean))
    }

    /// Resolves each point's release rate (searching when the point is a
    /// target absorption rate), then runs every replicate.
    fn run_points(&self, points: Vec<(ScenarioConfig, PointRate)>, extras: Extras) -> Vec<Result<Replicated, String>> {
        use rayon::prelude::*;
        let rates: Vec<Result<f64, String>> = self.pool.install(|| {
            points
                .par_iter()
                .enumerate()
                .map(|(i, (config, rate))| match *rate {
                    PointRate::Fixed(r) => Ok(r),
                    PointRate::Target(t) => {
                        search_release_rate(config, t, self.pilot(config), self.replicate_seed(i, u32::MAX >> 12))
                            .map_err(|e| e.to_string())
                    }
                })
                .collect()
        });
        let tasks: Vec<(usize, u32)> = (0..points.len())
            .filter(|&i| rates[i].is_ok())
            .flat_map(|i| (0..self.spec.replicates).map(move |r| (i, r)))
            .collect();
        let duration = self.spec.duration();
        let warmup = self.spec.warmup();
        let outcomes: Vec<Result<(RateReport, SimState), String>> = self.pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, rep)| {
                    let mut config = with_release_rate(&points[i].0, *rates[i].as_ref().unwrap());
                    config.seed = self.replicate_seed(i, rep);
                    simulate(&config, duration, warmup, &quiet())
                        .map(|run| (run.report, run.state))
                        .map_err(|e| e.to_string())
                })
                .collect()
        });
        let mut results: Vec<Result<Replicated, String>> = rates
            .iter()
            .map(|r| match r {
                Ok(rate) => Ok(Replicated {
                    release_rate: *rate,
                    ..Replicated::default()
                }),
                Err(e) => Err(e.clone()),
            })
            .collect();
        for (&(i, rep), outcome) in tasks.iter().zip(outcomes) {
            let Ok(acc) = &mut results[i] else { continue };
            let (report, state) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    results[i] = Err(e);
                    continue;
                }
            };
            acc.lambda_a.push(report.absorbed_rate);
            acc.lambda_r.push(report.rejected_rate);
            acc.blocking.push(report.blocking_probability);
            acc.occupancy.push(report.occupancy);
            match extras {
                Extras::None => {}
                Extras::Arrivals => {
                    let counts = arrival_counts(state.log(), report.warmup_end, duration, ARRIVAL_BIN);
                    let pairs = qq_pairs(&counts, self.replicate_seed(i, rep));
                    acc.dispersion.push(dispersion_index(&counts));
                    acc.qq_slope.push(qq_slope(&pairs));
                    acc.arrivals_per_bin
                        .push(counts.iter().sum::<u64>() as f64 / counts.len() as f64);
                    acc.qq.push(pairs);
                }
                Extras::Map => {
                    let map = assimilation_map(state.log(), &state.receptor_directions());
                    acc.front_back.push(front_back_ratio(&map));
                    acc.map_coords = map.iter().map(|c| (c.theta, c.phi)).collect();
                    acc.map_counts.push(map.iter().map(|c| c.count).collect());
                }
            }
        }
        results
    }
}

#[derive(Clone, Copy, Debug)]
enum PointRate {
    Fixed(f64),
    Target(f64),
}

/// Runs an experiment and returns its tables without writing them.
pub fn build_tables(spec: &ExperimentSpec, base_dir: &Path) -> Result<Vec<Table>, ExperimentError> {
    spec.validate()?;
    let config = spec.resolve_scenario(base_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| ExperimentError::Invalid(format!("cannot start worker pool: {e}")))?;
    let runner = Runner { spec, pool };
    let grid = &spec.sweep.grid;
    let tables = match spec.kind {
        ExperimentKind::RejectionCurve | ExperimentKind::BlockingCurve => rejection_tables(&runner, &config),
        ExperimentKind::ReceptorSensitivity => {
            let target = spec.lambda_a.unwrap_or_default();
            let configs: Vec<ScenarioConfig> = grid
                .iter()
                .map(|&r| ScenarioConfig {
                    receptor_count: r as u32,
                    ..config.clone()
                })
                .collect();
            let sims = if spec.simulate {
                runner.run_points(
                    configs.iter().map(|c| (c.clone(), PointRate::Target(target))).collect(),
                    Extras::None,
                )
            } else {
                vec![Err("not simulated".to_string()); configs.len()]
            };
            let mut t = Table::new(
                spec.kind.name(),
                &[
                    "receptor_count",
                    "target_lambda_a",
                    "release_rate",
                    "lambda_a",
                    "lambda_a_stderr",
                    "lambda_r_sim",
                    "lambda_r_sim_stderr",
                    "lambda_r_zone_model",
                    "lambda_r_symmetric",
                    "lambda_o",
                    "status",
                ],
            );
            for (c, sim) in configs.iter().zip(&sims) {
                t.push(rejection_row(c.receptor_count as f64, target, c, sim, spec.simulate));
            }
            vec![t]
        }
        ExperimentKind::QqPoisson => {
            let sims = runner.run_points(
                grid.iter().map(|&r| (config.clone(), PointRate::Fixed(r))).collect(),
                Extras::Arrivals,
            );
            let mut t = Table::new(
                spec.kind.name(),
                &[
                    "release_rate",
                    "lambda_a",
                    "lambda_a_stderr",
                    "arrivals_per_bin",
                    "dispersion_index",
                    "dispersion_index_stderr",
                    "qq_slope",
                    "qq_slope_stderr",
                    "status",
                ],
            );
            let mut pairs = Table::new(
                "qq_poisson_pairs",
                &["release_rate", "replicate", "synthetic", "observed"],
            );
            for (&rate, sim) in grid.iter().zip(&sims) {
                match sim {
                    Ok(s) => {
                        let (la, la_se) = mean_stderr(&s.lambda_a);
                        let (d, d_se) = mean_stderr(&s.dispersion);
                        let (q, q_se) = mean_stderr(&s.qq_slope);
                        let (apb, _) = mean_stderr(&s.arrivals_per_bin);
                        t.push(vec![
                            num(rate),
                            num(la),
                            num(la_se),
                            num(apb),
                            num(d),
                            num(d_se),
                            num(q),
                            num(q_se),
                            "ok".into(),
                        ]);
                        for (rep, qq) in s.qq.iter().enumerate() {
                            for &(x, y) in qq {
                                pairs.push(vec![num(rate), rep.to_string(), num(x), num(y)]);
                            }
                        }
                    }
                    Err(e) => {
                        let mut row = vec![String::new(); 9];
                        row[0] = num(rate);
                        row[8] = e.clone();
                        t.push(row);
                    }
                }
            }
            vec![t, pairs]
        }
        ExperimentKind::OccupancyCurve => {
            let sims = if spec.simulate {
                runner.run_points(
                    grid.iter().map(|&r| (config.clone(), PointRate::Fixed(r))).collect(),
                    Extras::None,
                )
            } else {
                vec![Err("not simulated".to_string()); grid.len()]
            };
            let mut t = Table::new(
                spec.kind.name(),
                &[
                    "release_rate",
                    "lambda_o_model",
                    "lambda_a_model",
                    "lambda_r_model",
                    "occupancy_model",
                    "lambda_a_sim",
                    "occupancy_sim",
                    "occupancy_sim_stderr",
                    "status",
                ],
            );
            for (&rate, sim) in grid.iter().zip(&sims) {
                let model = evaluate_release_rate(rate, &config, 0.0);
                let mut row = vec![num(rate)];
                match &model {
                    Ok(p) => row.extend([
                        num(p.offered_rate),
                        num(p.absorbed_rate),
                        num(p.rejected_rate),
                        num(p.occupancy),
                    ]),
                    Err(_) => row.extend(vec![String::new(); 4]),
                }
                let mut state = model.as_ref().err().map(|e| e.to_string());
                match sim {
                    Ok(s) => {
                        let (la, _) = mean_stderr(&s.lambda_a);
                        let (occ, occ_se) = mean_stderr(&s.occupancy);
                        row.extend([num(la), num(occ), num(occ_se)]);
                    }
                    Err(e) => {
                        row.extend(vec![String::new(); 3]);
                        if spec.simulate {
                            state.get_or_insert(e.clone());
                        }
                    }
                }
                row.push(state.unwrap_or_else(|| "ok".into()));
                t.push(row);
            }
            vec![t]
        }
        ExperimentKind::RangeCurve => {
            let f = spec.target_f.unwrap_or_default();
            let mut t = Table::new(
                spec.kind.name(),
                &[
                    "distance_um",
                    "target_f",
                    "release_rate",
                    "lambda_a",
                    "lambda_r",
                    "occupancy",
                    "feasible",
                    "status",
                ],
            );
            for &d in grid {
                let c = ScenarioConfig {
                    distance: d * 1e-6,
                    ..config.clone()
                };
                let plan = c
                    .validate()
                    .map_err(|e| e.to_string())
                    .and_then(|_| min_release_rate(f, &c).map_err(|e| e.to_string()));
                match plan {
                    Ok(p) => t.push(vec![
                        num(d),
                        num(f),
                        num(p.release_rate),
                        num(p.absorbed_rate),
                        num(p.rejected_rate),
                        num(p.occupancy),
                        p.feasible.to_string(),
                        "ok".into(),
                    ]),
                    Err(e) => t.push(vec![
                        num(d),
                        num(f),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "false".into(),
                        e,
                    ]),
                }
            }
            vec![t]
        }
        ExperimentKind::AssimilationMap => {
            let sims = runner.run_points(
                grid.iter().map(|&r| (config.clone(), PointRate::Fixed(r))).collect(),
                Extras::Map,
            );
            let mut t = Table::new(
                spec.kind.name(),
                &[
                    "release_rate",
                    "receptor_id",
                    "theta_rad",
                    "phi_rad",
                    "count_mean",
                    "count_stderr",
                ],
            );
            let mut summary = Table::new(
                "assimilation_map_summary",
                &[
                    "release_rate",
                    "lambda_a",
                    "lambda_a_stderr",
                    "front_back_ratio",
                    "front_back_ratio_stderr",
                    "status",
                ],
            );
            for (&rate, sim) in grid.iter().zip(&sims) {
                match sim {
                    Ok(s) => {
                        let (la, la_se) = mean_stderr(&s.lambda_a);
                        let (fb, fb_se) = mean_stderr(&s.front_back);
                        summary.push(vec![num(rate), num(la), num(la_se), num(fb), num(fb_se), "ok".into()]);
                        for (r, &(theta, phi)) in s.map_coords.iter().enumerate() {
                            let counts: Vec<f64> = s.map_counts.iter().map(|m| m[r] as f64).collect();
                            let (m, se) = mean_stderr(&counts);
                            t.push(vec![num(rate), r.to_string(), num(theta), num(phi), num(m), num(se)]);
                        }
                    }
                    Err(e) => summary.push(vec![
                        num(rate),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.clone(),
                    ]),
                }
            }
            vec![t, summary]
        }
        ExperimentKind::ConcentrationProfile => concentration_tables(&runner, &config)?,
    };
    Ok(tables)
}

fn rejection_row(
    lead: f64,
    target: f64,
    config: &ScenarioConfig,
    sim: &Result<Replicated, String>,
    simulated: bool,
) -> Vec<String> {
    match (simulated, sim) {
        (true, Ok(s)) => {
            let (la, la_se) = mean_stderr(&s.lambda_a);
            let (lr, lr_se) = mean_stderr(&s.lambda_r);
            let cmp = compare_models(la, config);
            vec![
                num(lead),
                num(target),
                num(s.release_rate),
                num(la),
                num(la_se),
                num(lr),
                num(lr_se),
                model_cell(&cmp.zone),
                model_cell(&cmp.symmetric),
                num(la + lr),
                model_status(&cmp).unwrap_or_else(|| "ok".into()),
            ]
        }
        (true, Err(e)) => {
            let mut row = vec![String::new(); 11];
            row[0] = num(lead);
            row[1] = num(target);
            row[10] = e.clone();
            row
        }
        (false, _) => {
            let cmp = compare_models(target, config);
            let offered = cmp.zone.as_ref().map_or(f64::NAN, |z| target + z);
            vec![
                num(lead),
                num(target),
                String::new(),
                num(target),
                String::new(),
                String::new(),
                String::new(),
                model_cell(&cmp.zone),
                model_cell(&cmp.symmetric),
                num(offered),
                model_status(&cmp).unwrap_or_else(|| "ok".into()),
            ]
        }
    }
}

fn rejection_tables(runner: &Runner, config: &ScenarioConfig) -> Vec<Table> {
    let spec = runner.spec;
    let means = spec
        .trafficking_means_s
        .clone()
        .unwrap_or_else(|| vec![config.trafficking_mean]);
    let points: Vec<(ScenarioConfig, f64)> = means
        .iter()
        .flat_map(|&t| {
            spec.sweep.grid.iter().map(move |&target| {
                (
                    ScenarioConfig {
                        trafficking_mean: t,
                        ..config.clone()
                    },
                    target,
                )
            })
        })
        .collect();
    let sims = if spec.simulate {
        runner.run_points(
            points.iter().map(|(c, t)| (c.clone(), PointRate::Target(*t))).collect(),
            Extras::None,
        )
    } else {
        vec![Err("not simulated".to_string()); points.len()]
    };
    if spec.kind == ExperimentKind::RejectionCurve {
        let mut t = Table::new(
            spec.kind.name(),
            &[
                "trafficking_mean_s",
                "target_lambda_a",
                "release_rate",
                "lambda_a",
                "lambda_a_stderr",
                "lambda_r_sim",
                "lambda_r_sim_stderr",
                "lambda_r_zone_model",
                "lambda_r_symmetric",
                "lambda_o",
                "status",
            ],
        );
        for ((c, target), sim) in points.iter().zip(&sims) {
            t.push(rejection_row(c.trafficking_mean, *target, c, sim, spec.simulate));
        }
        return vec![t];
    }
    let mut t = Table::new(
        spec.kind.name(),
        &[
            "trafficking_mean_s",
            "target_lambda_a",
            "release_rate",
            "lambda_a",
            "lambda_r_sim",
            "blocking_sim",
            "blocking_sim_stderr",
            "blocking_zone_model",
            "blocking_symmetric",
            "lambda_o",
            "status",
        ],
    );
    for ((c, target), sim) in points.iter().zip(&sims) {
        let blocking = |la: f64, lr: &Result<f64, ModelError>| lr.as_ref().map_or(String::new(), |r| num(r / (la + r)));
        match (spec.simulate, sim) {
            (true, Ok(s)) => {
                let (la, _) = mean_stderr(&s.lambda_a);
                let (lr, _) = mean_stderr(&s.lambda_r);
                let (b, b_se) = mean_stderr(&s.blocking);
                let cmp = compare_models(la, c);
                t.push(vec![
                    num(c.trafficking_mean),
                    num(*target),
                    num(s.release_rate),
                    num(la),
                    num(lr),
                    num(b),
                    num(b_se),
                    blocking(la, &cmp.zone),
                    blocking(la, &cmp.symmetric),
                    num(la + lr),
                    model_status(&cmp).unwrap_or_else(|| "ok".into()),
                ]);
            }
            (true, Err(e)) => {
                let mut row = vec![String::new(); 11];
                row[0] = num(c.trafficking_mean);
                row[1] = num(*target);
                row[10] = e.clone();
                t.push(row);
            }
            (false, _) => {
                let cmp = compare_models(*target, c);
                let offered = cmp.zone.as_ref().map_or(f64::NAN, |z| target + z);
                t.push(vec![
                    num(c.trafficking_mean),
                    num(*target),
                    String::new(),
                    num(*target),
                    String::new(),
                    String::new(),
                    String::new(),
                    blocking(*target, &cmp.zone),
                    blocking(*target, &cmp.symmetric),
                    num(offered),
                    model_status(&cmp).unwrap_or_else(|| "ok".into()),
                ]);
            }
        }
    }
    vec![t]
}

/// Time-averaged molecule concentration in spherical shells around the
/// transmitter, with the receiver removed.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellEstimate {
    pub inner: f64,
    pub outer: f64,
    /// Molecules per m³.
    pub concentration: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Runs `config` without a receiver for `duration` s and averages shell
/// counts over snapshots taken every `every` steps after `warmup`. The
/// standard error comes from ten batch means.
pub fn measure_concentration(
    config: &ScenarioConfig,
    shells: &[(f64, f64)],
    duration: f64,
    warmup: f64,
    every: u64,
    workers: usize,
) -> Result<Vec<ShellEstimate>, SimError> {
    if !(warmup >= 0.0 && warmup < duration) {
        return Err(SimError::InvalidRun(format!(
            "warm-up {warmup} s must lie in [0, {duration}) s"
        )));
    }
    let opts = SimOptions {
        receiver: false,
        log: LogPolicy::contacts_only(),
        workers,
        window: None,
    };
    let mut state = SimState::new(config, &opts)?;
    let dt = state.config().sim_step;
    let end = (duration / dt).round() as u64;
    let start = (warmup / dt).round() as u64;
    let mut snapshots: Vec<Vec<usize>> = Vec::new();
    for step in 1..=end {
        state.step();
        if step > start && (step - start).is_multiple_of(every.max(1)) {
            snapshots.push(shells.iter().map(|&(a, b)| state.count_in_shell(a, b)).collect());
        }
    }
    if snapshots.len() < 10 {
        return Err(SimError::InsufficientEvents(format!(
            "{} snapshots, need 10",
            snapshots.len()
        )));
    }
    let batch = snapshots.len() / 10;
    Ok(shells
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let volume = shell_volume(a, b);
            let means: Vec<f64> = snapshots
                .chunks(batch)
                .take(10)
                .map(|c| c.iter().map(|s| s[k] as f64).sum::<f64>() / c.len() as f64 / volume)
                .collect();
            let (concentration, stderr) = mean_stderr(&means);
            ShellEstimate {
                inner: a,
                outer: b,
                concentration,
                stderr,
                samples: snapshots.len(),
            }
        })
        .collect())
}

fn concentration_tables(runner: &Runner, config: &ScenarioConfig) -> Result<Vec<Table>, ExperimentError> {
    let spec = runner.spec;
    let grid = &spec.sweep.grid;
    let width = if grid.len() > 1 {
        grid.windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(f64::INFINITY, f64::min)
    } else {
        0.1 * grid[0]
    };
    let shells: Vec<(f64, f64)> = grid
        .iter()
        .map(|&r| (((r - width / 2.0) * 1e-6).max(0.0), (r + width / 2.0) * 1e-6))
        .collect();
    let duration = spec.duration();
    let warmup = spec.warmup_s.unwrap_or(duration / 2.0);
    let reps: Vec<Result<Vec<ShellEstimate>, String>> = {
        use rayon::prelude::*;
        runner.pool.install(|| {
            (0..spec.replicates)
                .into_par_iter()
                .map(|rep| {
                    let c = ScenarioConfig {
                        seed: runner.replicate_seed(0, rep),
                        ..config.clone()
                    };
                    measure_concentration(&c, &shells, duration, warmup, 10, 1).map_err(|e| e.to_string())
                })
                .collect()
        })
    };
    let d = config.diffusion_coefficient();
    let mut t = Table::new(
        spec.kind.name(),
        &[
            "radius_um",
            "inner_um",
            "outer_um",
            "concentration_sim_per_m3",
            "concentration_sim_stderr",
            "concentration_model_per_m3",
            "ratio",
            "status",
        ],
    );
    for (k, (&r, &(a, b))) in grid.iter().zip(&shells).enumerate() {
        let model = steady_concentration(config.burst_size as f64, config.emission_period, r * 1e-6, d);
        let sims: Result<Vec<&ShellEstimate>, &String> = reps.iter().map(|rep| rep.as_ref().map(|s| &s[k])).collect();
        let mut row = vec![num(r), num(a * 1e6), num(b * 1e6)];
        match (&sims, &model) {
            (Ok(v), Ok(m)) => {
                let (c, se) = match v.as_slice() {
                    [one] => (one.concentration, one.stderr),
                    _ => mean_stderr(&v.iter().map(|s| s.concentration).collect::<Vec<_>>()),
                };
                row.extend([num(c), num(se), num(*m), num(c / m), "ok".into()]);
            }
            _ => {
                let e = match (sims, model) {
                    (Err(e), _) => e.clone(),
                    (_, Err(e)) => e.to_string(),
                    _ => unreachable!(),
                };
                row.extend([String::new(), String::new(), String::new(), String::new(), e]);
            }
        }
        t.push(row);
    }
    Ok(vec![t])
}

/// Runs the experiment and writes its CSV files into the spec's output
/// directory, returning their paths.
pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let tables = build_tables(spec, base_dir)?;
    tables.iter().map(|t| t.write(&spec.output_dir)).collect()
}

/// One-line summary of a table, for terminal output.
pub fn describe(table: &Table) -> String {
    let mut s = String::new();
    let failed = table
        .column("status")
        .map_or(0, |i| table.rows.iter().filter(|r| r[i] != "ok").count());
    let _ = write!(s, "{}: {} rows", table.name, table.rows.len());
    if failed > 0 {
        let _ = write!(s, ", {failed} with errors");
    }
    s
}
