//! Training, sweeps, the generalization run and GA tuning.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::RunConfig;
use super::report::{reward_rows, save_csv, EvalRow, GaBestRow, GaTraceRow, RewardRow};
use crate::baselines::{ga_tune, manual_w_df, GaReport};
use crate::ddpg::{train, ActorModel, NetSpec, RandomizedTvEnv, TrainOutcome};
use crate::env::{
    save_trace_csv, Action, DriverProfile, EpisodeConfig, TorqueVectoringEnv, TraceRow,
};
use crate::error::{Error, Result};

/// Scenario streams are decorrelated from the agent's own generator.
const SCENARIO_SEED_SALT: u64 = 0x5eed_5ce7_a210_0001;

pub const REWARDS_FILE: &str = "rewards.csv";
pub const MODEL_FILE: &str = "actor.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const GENERALIZE_FILE: &str = "generalize.csv";
pub const GA_TRACE_FILE: &str = "ga_trace.csv";
pub const GA_BEST_FILE: &str = "ga_best.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tuner {
    Ddpg,
    Ga,
    Manual,
}

impl Tuner {
    pub const ALL: [Tuner; 3] = [Tuner::Ddpg, Tuner::Ga, Tuner::Manual];

    pub fn name(self) -> &'static str {
        match self {
            Tuner::Ddpg => "ddpg",
            Tuner::Ga => "ga",
            Tuner::Manual => "manual",
        }
    }
}

impl fmt::Display for Tuner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tuner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Tuner::Ddpg),
            "ga" => Ok(Tuner::Ga),
            "manual" => Ok(Tuner::Manual),
            _ => Err(Error::Usage(format!("unknown tuner `{s}`"))),
        }
    }
}

/// One evaluation condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mu: f64,
    pub v0_kmh: f64,
}

impl Cell {
    pub fn new(mu: f64, v0_kmh: f64) -> Self {
        Self { mu, v0_kmh }
    }

    pub fn episode(&self, base: &EpisodeConfig) -> EpisodeConfig {
        EpisodeConfig {
            mu: self.mu,
            initial_speed_kmh: self.v0_kmh,
            ..base.clone()
        }
    }
}

impl FromStr for Cell {
    type Err = Error;

    /// `mu=0.4,v0=100`
    fn from_str(s: &str) -> Result<Self> {
        let (mut mu, mut v0) = (None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("expected key=value in `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("`{v}` is not a number")))?;
            match k.trim() {
                "mu" => mu = Some(v),
                "v0" => v0 = Some(v),
                other => return Err(Error::Usage(format!("unknown scenario key `{other}`"))),
            }
        }
        match (mu, v0) {
            (Some(mu), Some(v0)) => Ok(Cell::new(mu, v0)),
            _ => Err(Error::Usage(format!("scenario `{s}` needs both mu and v0"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Mu,
    V0,
}

/// Parses `mu=0.4:0.05:0.7` into the axis and its inclusive point list.
pub fn parse_grid(spec: &str) -> Result<(Axis, Vec<f64>)> {
    let usage = || Error::Usage(format!("grid `{spec}` is not axis=start:step:stop"));
    let (axis, range) = spec.split_once('=').ok_or_else(usage)?;
    let axis = match axis.trim() {
        "mu" => Axis::Mu,
        "v0" => Axis::V0,
        _ => return Err(usage()),
    };
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage())?;
    let values = match parts.as_slice() {
        [single] => vec![*single],
        [start, step, stop] if *step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Snap to a fine decimal grid so 0.4 + 3 * 0.05 prints as 0.55.
            (0..n)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect()
        }
        _ => return Err(usage()),
    };
    Ok((axis, values))
}

/// Cartesian product of the grid axes; a missing axis takes `base`'s value.
pub fn grid_cells(grids: &[(Axis, Vec<f64>)], base: &EpisodeConfig) -> Result<Vec<Cell>> {
    let mut mus = None;
    let mut speeds = None;
    for (axis, values) in grids {
        let slot = match axis {
            Axis::Mu => &mut mus,
            Axis::V0 => &mut speeds,
        };
        if slot.replace(values.clone()).is_some() {
            return Err(Error::Usage("grid axis given twice".into()));
        }
    }
    let mus = mus.unwrap_or_else(|| vec![base.mu]);
    let speeds = speeds.unwrap_or_else(|| vec![base.initial_speed_kmh]);
    Ok(mus
        .iter()
        .flat_map(|&mu| speeds.iter().map(move |&v| Cell::new(mu, v)))
        .collect())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains an agent on randomized scenarios drawn from `cfg.episode`.
pub fn train_agent(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env = TorqueVectoringEnv::new(cfg.plant.clone())?;
    let mut env = RandomizedTvEnv::new(env, cfg.episode.clone(), cfg.seed ^ SCENARIO_SEED_SALT);
    train(&mut env, NetSpec::torque_vectoring(), &cfg.hyper, cfg.seed)
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub model_path: PathBuf,
    pub rewards_path: PathBuf,
    pub rewards: Vec<RewardRow>,
    pub actor: ActorModel,
}

/// Trains, then writes the actor model and the per-episode reward CSV.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainArtifacts> {
    ensure_dir(out_dir)?;
    let outcome = train_agent(cfg)?;
    let rows = reward_rows(&outcome.rewards);
    let model_path = out_dir.join(MODEL_FILE);
    let rewards_path = out_dir.join(REWARDS_FILE);
    outcome.actor.save(&model_path)?;
    save_csv(&rows, &rewards_path)?;
    Ok(TrainArtifacts {
        model_path,
        rewards_path,
        rewards: rows,
        actor: outcome.actor,
    })
}

/// How a tuner picks weights during an evaluation episode.
#[derive(Debug, Clone)]
pub enum Policy<'m> {
    Fixed(Action),
    Actor(&'m ActorModel),
}

impl Policy<'_> {
    fn act(&self, obs: &crate::env::Observation) -> Action {
        match self {
            Policy::Fixed(a) => *a,
            Policy::Actor(m) => m.policy(obs),
        }
    }
}

/// Runs one noise-free episode and summarises it.
pub fn evaluate(
    cfg: &RunConfig,
    tuner: Tuner,
    policy: &Policy<'_>,
    scenario: &EpisodeConfig,
    keep_trace: bool,
) -> Result<(EvalRow, Option<Vec<TraceRow>>)> {
    let mut env = TorqueVectoringEnv::new(cfg.plant.clone())?;
    if keep_trace {
        env.enable_trace();
    }
    let mut w_sum = [0.0; 4];
    let stats = env.run_episode(scenario, |obs| {
        let a = policy.act(obs);
        for (s, w) in w_sum.iter_mut().zip(a.clamped().w_df) {
            *s += w;
        }
        a
    })?;
    let steps = stats.steps.max(1) as f64;
    let row = EvalRow {
        mu: scenario.mu,
        v0_kmh: scenario.initial_speed_kmh,
        tuner: tuner.name().to_owned(),
        terminated: stats.terminated,
        max_abs_ex: stats.max_abs_ex,
        max_abs_sideslip_deg: stats.max_abs_sideslip.to_degrees(),
        performance_integral: stats.performance_integral,
        total_reward: stats.total_reward,
        steps: stats.steps,
        mean_w_df: w_sum.map(|s| s / steps),
    };
    Ok((row, env.trace().map(<[TraceRow]>::to_vec)))
}

/// GA tuned on exactly this scenario.
pub fn tune_for(cfg: &RunConfig, scenario: &EpisodeConfig) -> Result<GaReport> {
    ga_tune(std::slice::from_ref(scenario), &cfg.plant, &cfg.ga)
}

fn require_model<'m>(
    tuners: &[Tuner],
    model: Option<&'m ActorModel>,
) -> Result<Option<&'m ActorModel>> {
    if tuners.contains(&Tuner::Ddpg) && model.is_none() {
        return Err(Error::Config("the ddpg tuner needs a trained model".into()));
    }
    Ok(model)
}

fn policy_for<'m>(
    cfg: &RunConfig,
    tuner: Tuner,
    model: Option<&'m ActorModel>,
    scenario: &EpisodeConfig,
) -> Result<Policy<'m>> {
    Ok(match tuner {
        Tuner::Manual => Policy::Fixed(manual_w_df()),
        Tuner::Ga => Policy::Fixed(Action::new(tune_for(cfg, scenario)?.best.genes)),
        Tuner::Ddpg => Policy::Actor(
            model.ok_or_else(|| Error::Config("the ddpg tuner needs a trained model".into()))?,
        ),
    })
}

/// One evaluation per cell and tuner, rows ordered cell-major.
pub fn sweep(
    cfg: &RunConfig,
    model: Option<&ActorModel>,
    cells: &[Cell],
    tuners: &[Tuner],
    profile: &DriverProfile,
) -> Result<Vec<EvalRow>> {
    let model = require_model(tuners, model)?;
    let base = cfg.episode.clone().with_profile(profile.clone());
    let jobs: Vec<(Cell, Tuner)> = cells
        .iter()
        .flat_map(|c| tuners.iter().map(move |t| (*c, *t)))
        .collect();
    jobs.par_iter()
        .map(|(cell, tuner)| {
            let scenario = cell.episode(&base);
            scenario.validate()?;
            let policy = policy_for(cfg, *tuner, model, &scenario)?;
            log::info!(
                "evaluating {tuner} at mu = {}, v0 = {} km/h",
                cell.mu,
                cell.v0_kmh
            );
            evaluate(cfg, *tuner, &policy, &scenario, false).map(|(row, _)| row)
        })
        .collect()
}

pub fn load_model(path: Option<&Path>) -> Result<Option<ActorModel>> {
    path.map(ActorModel::load).transpose()
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    model_path: Option<&Path>,
    cells: &[Cell],
    tuners: &[Tuner],
    out_dir: &Path,
) -> Result<Vec<EvalRow>> {
    let model = load_model(model_path)?;
    let rows = sweep(cfg, model.as_ref(), cells, tuners, &cfg.episode.profile)?;
    ensure_dir(out_dir)?;
    save_csv(&rows, &out_dir.join(SWEEP_FILE))?;
    Ok(rows)
}

/// Step-steer run of every tuner in `cell`; writes a summary row per tuner and
/// one tick-level trace per tuner.
pub fn cmd_generalize(
    cfg: &RunConfig,
    model_path: Option<&Path>,
    cell: Cell,
    tuners: &[Tuner],
    out_dir: &Path,
) -> Result<Vec<EvalRow>> {
    let model = load_model(model_path)?;
    let model = require_model(tuners, model.as_ref())?;
    let scenario = cell
        .episode(&cfg.episode)
        .with_profile(DriverProfile::step_steer());
    scenario.validate()?;
    ensure_dir(out_dir)?;
    let runs: Vec<(EvalRow, Option<Vec<TraceRow>>)> = tuners
        .par_iter()
        .map(|tuner| {
            let policy = policy_for(cfg, *tuner, model, &scenario)?;
            evaluate(cfg, *tuner, &policy, &scenario, true)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(runs.len());
    for (row, trace) in runs {
        if let Some(trace) = trace {
            save_trace_csv(&trace, &out_dir.join(format!("trace_{}.csv", row.tuner)))?;
        }
        rows.push(row);
    }
    save_csv(&rows, &out_dir.join(GENERALIZE_FILE))?;
    Ok(rows)
}

pub fn cmd_ga_tune(
    cfg: &RunConfig,
    cell: Cell,
    out_dir: &Path,
) -> Result<(GaBestRow, Vec<GaTraceRow>)> {
    let scenario = cell.episode(&cfg.episode);
    scenario.validate()?;
    let report = tune_for(cfg, &scenario)?;
    let trace: Vec<GaTraceRow> = report
        .best_fitness
        .iter()
        .zip(&report.mean_fitness)
        .enumerate()
        .map(|(generation, (&best_fitness, &mean_fitness))| GaTraceRow {
            generation,
            best_fitness,
            mean_fitness,
        })
        .collect();
    let best = GaBestRow {
        mu: cell.mu,
        v0_kmh: cell.v0_kmh,
        w_df: report.best.genes,
        fitness: report.best.fitness,
        evaluations: report.evaluations,
    };
    ensure_dir(out_dir)?;
    save_csv(&trace, &out_dir.join(GA_TRACE_FILE))?;
    save_csv(std::slice::from_ref(&best), &out_dir.join(GA_BEST_FILE))?;
    Ok((best, trace))
}
