//! The `rowbench` command line: `generate`, `run` and `report`.
//!
//! Every setting has a default equal to the benchmark protocol, so a bare
//! `rowbench run` reproduces the standard 60-scenario comparison. A TOML file
//! (`--config`) overrides defaults; flags override the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::domain::RewardWeights;
use crate::harness::{
    export_reports, metrics_by_planner, read_jsonl, run_suite, summary_table, write_jsonl, EpisodeConfig,
};
use crate::planners::{PlannerConfig, PlannerKind};
use crate::scenario::{ScenarioConfig, SuiteFile};
use crate::sim::SimConfig;
use crate::{Error, Result};

pub const SUITE_FILE: &str = "suite.json";
pub const EPISODES_FILE: &str = "episodes.jsonl";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Simulator settings that are not already part of [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub gamma: f64,
    pub reward: RewardWeights,
    pub slippery_brake_failure_prob: f64,
    pub perception_latency: u32,
    pub speed_sigma: f64,
    pub lateral_sigma: f64,
    pub lateral_shift: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            gamma: sim.gamma,
            reward: sim.reward,
            slippery_brake_failure_prob: sim.slippery_brake_failure_prob,
            perception_latency: sim.perception_latency,
            speed_sigma: sim.noise.speed_sigma,
            lateral_sigma: sim.noise.lateral_sigma,
            lateral_shift: sim.noise.lateral_shift,
        }
    }
}

/// Everything one benchmark run needs; the on-disk config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenarios: usize,
    /// Seconds per decision.
    pub deadline: f64,
    pub planners: Vec<PlannerKind>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub n_particles: usize,
    /// Measure decision time. Off logs zero times, for byte-identical output.
    pub timing: bool,
    pub log_beliefs: bool,
    pub scenario: ScenarioConfig,
    pub sim: SimSettings,
    pub planner: PlannerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ep = EpisodeConfig::default();
        Self {
            seed: 7,
            scenarios: 60,
            deadline: ep.deadline,
            planners: PlannerKind::BENCHMARK.to_vec(),
            workers: 0,
            n_particles: ep.n_particles,
            timing: true,
            log_beliefs: true,
            scenario: ScenarioConfig::default(),
            sim: SimSettings::default(),
            planner: PlannerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::InvalidConfig("scenario count must be >= 1".into()));
        }
        if self.planners.is_empty() {
            return Err(Error::InvalidConfig("no planners selected".into()));
        }
        self.scenario.validate()?;
        self.episode_config().validate()
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut sim = SimConfig::from_scenario_config(&self.scenario);
        sim.gamma = self.sim.gamma;
        sim.reward = self.sim.reward;
        sim.slippery_brake_failure_prob = self.sim.slippery_brake_failure_prob;
        sim.perception_latency = self.sim.perception_latency;
        sim.noise.speed_sigma = self.sim.speed_sigma;
        sim.noise.lateral_sigma = self.sim.lateral_sigma;
        sim.noise.lateral_shift = self.sim.lateral_shift;
        sim
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            sim: self.sim_config(),
            priors: self.scenario.clone(),
            planners: self.planner.clone(),
            n_particles: self.n_particles,
            deadline: self.deadline,
            timing: self.timing,
            log_beliefs: self.log_beliefs,
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rowbench", version, about = "Right-of-way planner benchmark for four-way stop intersections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario suite and write it to OUT/suite.json.
    Generate(CommonArgs),
    /// Run the planners on a suite; writes episode logs and reports to OUT.
    Run(RunArgs),
    /// Rebuild the report files from saved episode logs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of scenarios.
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Steps per episode.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Per-decision deadline, seconds.
    #[arg(long)]
    pub deadline: Option<f64>,
    /// Comma-separated planner list (fsm, qmdp, pomcp, despot, oracle).
    #[arg(long)]
    pub planners: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run a saved suite instead of generating one.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Log zero decision times so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory to write reports into.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Episode logs; defaults to OUT/episodes.jsonl.
    #[arg(long)]
    pub logs: Option<PathBuf>,
    /// Deadline recorded in processing_time.csv.
    #[arg(long)]
    pub deadline: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_common(cfg: &mut RunConfig, args: &CommonArgs) {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.scenarios {
        cfg.scenarios = n;
    }
    if let Some(h) = args.horizon {
        cfg.scenario.horizon = h;
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Writes the suite and returns its path and (adversarial, total) counts.
pub fn generate(args: &CommonArgs) -> Result<(PathBuf, usize, usize)> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_common(&mut cfg, args);
    cfg.validate()?;
    let suite = SuiteFile::generate(cfg.seed, cfg.scenarios, &cfg.scenario)?;
    create_dir(&args.out)?;
    let path = args.out.join(SUITE_FILE);
    write_file(&path, &suite.to_json())?;
    Ok((path, suite.adversarial_count(), suite.scenarios.len()))
}

/// Runs the benchmark and returns the summary table.
pub fn run(args: &RunArgs) -> Result<String> {
    let mut cfg = load_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(d) = args.deadline {
        cfg.deadline = d;
    }
    if let Some(p) = &args.planners {
        cfg.planners = PlannerKind::parse_list(p)?;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;

    let suite = match &args.suite {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SuiteFile::from_json(&text, path)?
        }
        None => SuiteFile::generate(cfg.seed, cfg.scenarios, &cfg.scenario)?,
    };
    let out = &args.common.out;
    create_dir(out)?;
    write_file(&out.join(SUITE_FILE), &suite.to_json())?;

    let ep = cfg.episode_config();
    let logs = run_suite(&suite.scenarios, &cfg.planners, &ep, cfg.worker_count())?;
    write_jsonl(&out.join(EPISODES_FILE), &logs)?;
    export_reports(out, &logs, cfg.deadline)?;
    Ok(summary_table(&metrics_by_planner(&logs)?))
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let cfg = load_config(args.config.as_deref())?;
    let deadline = args.deadline.unwrap_or(cfg.deadline);
    let logs_path = args.logs.clone().unwrap_or_else(|| args.out.join(EPISODES_FILE));
    let logs = read_jsonl(&logs_path)?;
    export_reports(&args.out, &logs, deadline)?;
    Ok(summary_table(&metrics_by_planner(&logs)?))
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidConfig(_) | Error::UnknownPlanner { .. } | Error::Parse { .. })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => {
            generate(a).map(|(p, adv, n)| format!("wrote {} ({adv} adversarial of {n} scenarios)", p.display()))
        }
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(text) => {
            println!("{}", text.trim_end());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("rowbench: {e}");
            if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
