//! Run configuration: a flat key-value file with dotted section keys.
//!
//! ```text
//! seed = 7
//! ddpg.episodes = 650
//! vehicle.mass = 1500.0
//! episode.mu = 0.5
//! ```
//!
//! The file is parsed as TOML, so `[ddpg]` tables are accepted as well and
//! flattened to the same dotted keys. Unknown keys are errors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::Value;

use crate::baselines::GaConfig;
use crate::ddpg::Hyperparams;
use crate::dynamics::TireParams;
use crate::env::{EpisodeConfig, PlantConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    Sweep,
    Generalize,
    GaTune,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "train" => Mode::Train,
            "eval" => Mode::Eval,
            "sweep" => Mode::Sweep,
            "generalize" => Mode::Generalize,
            "ga-tune" => Mode::GaTune,
            _ => return Err(Error::Config(format!("unknown mode `{s}`"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::Sweep => "sweep",
            Mode::Generalize => "generalize",
            Mode::GaTune => "ga-tune",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub hyper: Hyperparams,
    pub plant: PlantConfig,
    /// Base episode; speed and friction are overridden per scenario.
    pub episode: EpisodeConfig,
    pub ga: GaConfig,
}

/// Every key the loader accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "mode",
    "seed",
    "paths.model",
    "paths.output",
    "ddpg.gamma",
    "ddpg.critic_lr",
    "ddpg.actor_lr",
    "ddpg.tau",
    "ddpg.minibatch",
    "ddpg.noise_variance",
    "ddpg.variance_decay",
    "ddpg.buffer_capacity",
    "ddpg.episodes",
    "ddpg.hidden1",
    "ddpg.hidden2",
    "ddpg.reward_scale",
    "vehicle.mass",
    "vehicle.yaw_inertia",
    "vehicle.wheel_radius_eff",
    "vehicle.dist_front",
    "vehicle.dist_rear",
    "vehicle.track_width",
    "vehicle.wheel_spin_inertia",
    "vehicle.cornering_stiffness_front",
    "vehicle.cornering_stiffness_rear",
    "tire.stiffness_factor",
    "tire.shape_factor",
    "tire.curvature_factor",
    "controller.w_ex",
    "controller.w_ey",
    "controller.w_emz",
    "controller.steer_lever",
    "cim.mu_nominal",
    "cim.lateral_margin",
    "cim.time_constant",
    "episode.speed_kmh",
    "episode.mu",
    "episode.length",
    "episode.sample_time",
    "episode.sim_dt",
    "episode.window_average_reward",
    "ga.population_size",
    "ga.generations",
    "ga.crossover_rate",
    "ga.mutation_rate",
    "ga.mutation_scale",
    "ga.elitism",
    "ga.tournament_size",
    "ga.blend_alpha",
    "ga.seed",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("`{key}` must be a number"))),
    }
}

fn unsigned(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::Config(format!(
            "`{key}` must be a non-negative integer"
        ))),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    usize::try_from(unsigned(key, v)?).map_err(|_| Error::Config(format!("`{key}` is too large")))
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("`{key}` must be true or false")))
}

fn string<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("`{key}` must be a string")))
}

impl RunConfig {
    pub fn from_str_in(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::Config(format!("cannot parse configuration: {e}")))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);

        let mut cfg = RunConfig::default();
        let mut tire = (
            cfg.plant.tire.stiffness_factor,
            cfg.plant.tire.shape_factor,
            cfg.plant.tire.curvature_factor,
        );
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        };
        for (key, v) in &entries {
            let k = key.as_str();
            match k {
                "mode" => cfg.mode = Some(string(k, v)?.parse()?),
                "seed" => cfg.seed = unsigned(k, v)?,
                "paths.model" => cfg.model = Some(resolve(string(k, v)?)),
                "paths.output" => cfg.output = Some(resolve(string(k, v)?)),
                "ddpg.gamma" => cfg.hyper.gamma = float(k, v)?,
                "ddpg.critic_lr" => cfg.hyper.critic_lr = float(k, v)?,
                "ddpg.actor_lr" => cfg.hyper.actor_lr = float(k, v)?,
                "ddpg.tau" => cfg.hyper.tau = float(k, v)?,
                "ddpg.minibatch" => cfg.hyper.minibatch = count(k, v)?,
                "ddpg.noise_variance" => cfg.hyper.noise_variance = float(k, v)?,
                "ddpg.variance_decay" => cfg.hyper.variance_decay = float(k, v)?,
                "ddpg.buffer_capacity" => cfg.hyper.buffer_capacity = count(k, v)?,
                "ddpg.episodes" => cfg.hyper.episodes = count(k, v)?,
                "ddpg.hidden1" => cfg.hyper.hidden[0] = count(k, v)?,
                "ddpg.hidden2" => cfg.hyper.hidden[1] = count(k, v)?,
                "ddpg.reward_scale" => cfg.hyper.reward_scale = float(k, v)?,
                "vehicle.mass" => cfg.plant.vehicle.mass = float(k, v)?,
                "vehicle.yaw_inertia" => cfg.plant.vehicle.yaw_inertia = float(k, v)?,
                "vehicle.wheel_radius_eff" => cfg.plant.vehicle.wheel_radius_eff = float(k, v)?,
                "vehicle.dist_front" => cfg.plant.vehicle.dist_front = float(k, v)?,
                "vehicle.dist_rear" => cfg.plant.vehicle.dist_rear = float(k, v)?,
                "vehicle.track_width" => cfg.plant.vehicle.track_width = float(k, v)?,
                "vehicle.wheel_spin_inertia" => cfg.plant.vehicle.wheel_spin_inertia = float(k, v)?,
                "vehicle.cornering_stiffness_front" => {
                    cfg.plant.vehicle.cornering_stiffness_front = float(k, v)?
                }
                "vehicle.cornering_stiffness_rear" => {
                    cfg.plant.vehicle.cornering_stiffness_rear = float(k, v)?
                }
                "tire.stiffness_factor" => tire.0 = float(k, v)?,
                "tire.shape_factor" => tire.1 = float(k, v)?,
                "tire.curvature_factor" => tire.2 = float(k, v)?,
                "controller.w_ex" => cfg.plant.w_e[0] = float(k, v)?,
                "controller.w_ey" => cfg.plant.w_e[1] = float(k, v)?,
                "controller.w_emz" => cfg.plant.w_e[2] = float(k, v)?,
                "controller.steer_lever" => cfg.plant.steer_lever = boolean(k, v)?,
                "cim.mu_nominal" => cfg.plant.cim.mu_nominal = float(k, v)?,
                "cim.lateral_margin" => cfg.plant.cim.lateral_margin = float(k, v)?,
                "cim.time_constant" => cfg.plant.cim.time_constant = float(k, v)?,
                "episode.speed_kmh" => cfg.episode.initial_speed_kmh = float(k, v)?,
                "episode.mu" => cfg.episode.mu = float(k, v)?,
                "episode.length" => cfg.episode.episode_length = float(k, v)?,
                "episode.sample_time" => cfg.episode.agent_sample_time = float(k, v)?,
                "episode.sim_dt" => cfg.episode.sim_dt = float(k, v)?,
                "episode.window_average_reward" => {
                    cfg.episode.window_average_reward = boolean(k, v)?
                }
                "ga.population_size" => cfg.ga.population_size = count(k, v)?,
                "ga.generations" => cfg.ga.generations = count(k, v)?,
                "ga.crossover_rate" => cfg.ga.crossover_rate = float(k, v)?,
                "ga.mutation_rate" => cfg.ga.mutation_rate = float(k, v)?,
                "ga.mutation_scale" => cfg.ga.mutation_scale = float(k, v)?,
                "ga.elitism" => cfg.ga.elitism = count(k, v)?,
                "ga.tournament_size" => cfg.ga.tournament_size = count(k, v)?,
                "ga.blend_alpha" => cfg.ga.blend_alpha = float(k, v)?,
                "ga.seed" => cfg.ga.seed = unsigned(k, v)?,
                _ => return Err(Error::Config(format!("unknown configuration key `{k}`"))),
            }
        }
        // Normal loads follow the (possibly overridden) vehicle.
        let mut t = TireParams::for_vehicle(&cfg.plant.vehicle, cfg.plant.tire.mu);
        (t.stiffness_factor, t.shape_factor, t.curvature_factor) = tire;
        cfg.plant.tire = t;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_in(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.plant.validate()?;
        self.episode.validate()?;
        self.ga.validate()
    }
}
