use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rxsat::experiment::{build_tables, describe, load_experiment, simulate};
use rxsat::planner::min_release_rate;
use rxsat::queueing::blocking_probability;
use rxsat::sim::{LogPolicy, SimOptions, Warmup};
use rxsat::{ConfigError, ExperimentError, ModelError, Profile, ScenarioConfig, SimError};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "rxsat",
    version,
    about = "Receptor saturation models and Brownian-dynamics simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle simulator and write events.csv and report.json.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scale preset (default: desk).
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Simulated time, s (default: 30 for desk, 100 for paper).
        #[arg(long)]
        duration: Option<f64>,
        /// Fixed warm-up, s; detected automatically when omitted.
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also log emissions, culls and bare-surface hits.
        #[arg(long)]
        log_all: bool,
    },
    /// Evaluate both receiver models at a given absorption rate.
    Analyze {
        config: PathBuf,
        #[arg(long = "lambda-a")]
        lambda_a: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale preset (default: paper).
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
    },
    /// Smallest release rate reaching an occupancy target.
    Plan {
        config: PathBuf,
        #[arg(long = "target-f")]
        target_f: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale preset (default: paper).
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
    },
    /// Run an experiment spec and write its CSV tables.
    Experiment {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the spec.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale preset, overriding the spec.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

enum Failure {
    Validation(String),
    Infeasible(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Infeasible(m) | Failure::Other(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        if e.is_infeasible() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            SimError::Placement(_) | SimError::InvalidRun(_) => Failure::Validation(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(_) | ExperimentError::Json(_) => Failure::Validation(e.to_string()),
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Sim(s) => s.into(),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load(path: &Path, profile: Profile, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut config = profile.apply(&rxsat::load_config(path)?);
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

#[derive(Serialize)]
struct ModelSide {
    lambda_r: f64,
    lambda_o: f64,
    blocking_probability: f64,
}

#[derive(Serialize)]
struct Analysis {
    lambda_a: f64,
    receptor_count: u32,
    trafficking_mean_s: f64,
    occupancy: f64,
    zone_model: ModelSide,
    symmetric_model: ModelSide,
    ratio: Option<f64>,
}

fn side(lambda_a: f64, lambda_r: f64) -> Result<ModelSide, Failure> {
    Ok(ModelSide {
        lambda_r,
        lambda_o: lambda_a + lambda_r,
        blocking_probability: blocking_probability(lambda_r, lambda_a)?,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            profile,
            duration,
            warmup,
            workers,
            log_all,
        } => {
            let profile = profile.map_or(Profile::Desk, Profile::from);
            let config = load(&config, profile, seed)?;
            let duration = duration.unwrap_or(profile.default_duration());
            let options = SimOptions {
                log: if log_all {
                    LogPolicy::everything()
                } else {
                    LogPolicy::default()
                },
                workers: workers.max(1),
                ..SimOptions::default()
            };
            let run = simulate(&config, duration, warmup.map_or(Warmup::Auto, Warmup::Fixed), &options)?;
            fs::create_dir_all(&out)?;
            let events = fs::File::create(out.join("events.csv"))?;
            run.state
                .log()
                .write_csv(std::io::BufWriter::new(events), &run.state.receptor_directions())
                .map_err(|e| Failure::Other(e.to_string()))?;
            write_json(&out, "report.json", &run.report)?;
            let r = &run.report;
            println!(
                "lambda_a {:.4}/s  lambda_r {:.4}/s  occupancy {:.4}  warm-up {:.2} s{}",
                r.absorbed_rate,
                r.rejected_rate,
                r.occupancy,
                r.warmup_end,
                if r.converged { "" } else { "  (not converged)" }
            );
            if !r.converged {
                eprintln!("warning: busy-receptor count still drifting at the end of the run");
            }
            println!("wrote {}", out.display());
        }
        Command::Analyze {
            config,
            lambda_a,
            seed,
            out,
            profile,
        } => {
            let config = load(&config, profile.map_or(Profile::Paper, Profile::from), seed)?;
            let cmp = rxsat::experiment::compare_models(lambda_a, &config);
            let zone = cmp.zone.clone()?;
            let symmetric = cmp.symmetric.clone()?;
            let analysis = Analysis {
                lambda_a,
                receptor_count: config.receptor_count,
                trafficking_mean_s: config.trafficking_mean,
                occupancy: rxsat::planner::occupancy(lambda_a, config.trafficking_mean, config.receptor_count as u64)?,
                zone_model: side(lambda_a, zone)?,
                symmetric_model: side(lambda_a, symmetric)?,
                ratio: cmp.ratio(),
            };
            println!("{}", serde_json::to_string_pretty(&analysis).unwrap());
            if let Some(dir) = out {
                write_json(&dir, "analysis.json", &analysis)?;
            }
        }
        Command::Plan {
            config,
            target_f,
            seed,
            out,
            profile,
        } => {
            let config = load(&config, profile.map_or(Profile::Paper, Profile::from), seed)?;
            let plan = min_release_rate(target_f, &config)?;
            println!("{}", serde_json::to_string_pretty(&plan).unwrap());
            if let Some(dir) = out {
                write_json(&dir, "plan.json", &plan)?;
            }
        }
        Command::Experiment {
            spec,
            seed,
            out,
            profile,
            workers,
        } => {
            let (mut spec, base) = load_experiment(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(out) = out {
                spec.output_dir = out;
            }
            if let Some(p) = profile {
                spec.profile = p.into();
            }
            if let Some(w) = workers {
                spec.workers = w;
            }
            let tables = build_tables(&spec, &base)?;
            for t in &tables {
                let path = t.write(&spec.output_dir)?;
                println!("{} -> {}", describe(t), path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
