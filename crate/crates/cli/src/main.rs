use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use tvtune_core::harness::{
    cmd_ga_tune, cmd_generalize, cmd_sweep, cmd_train, grid_cells, parse_grid, Cell, Mode,
    RunConfig, Tuner,
};

/// Environment variable holding the log filter, e.g. `info` or `tvtune_core=debug`.
const LOG_ENV: &str = "TVTUNE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "tvtune",
    version,
    about = "Torque-vectoring weight tuning with DDPG, GA and manual baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a DDPG agent on randomized scenarios.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate tuners over a grid of friction and speed values.
    Sweep {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Axis range such as `mu=0.4:0.05:0.7` or `v0=70:10:130`; repeatable.
        #[arg(long = "grid", value_parser = parse_grid_arg)]
        grids: Vec<(tvtune_core::harness::Axis, Vec<f64>)>,
        #[arg(long, value_delimiter = ',', default_value = "ddpg,ga,manual")]
        tuners: Vec<Tuner>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Step-steer run on a surface outside the training range.
    Generalize {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "mu=0.3,v0=80")]
        scenario: Cell,
        #[arg(long, value_delimiter = ',', default_value = "ddpg,ga,manual")]
        tuners: Vec<Tuner>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune one fixed weight vector with the genetic algorithm.
    GaTune {
        #[arg(long)]
        scenario: Cell,
        /// Overrides the GA seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid_arg(s: &str) -> Result<(tvtune_core::harness::Axis, Vec<f64>), String> {
    parse_grid(s).map_err(|e| e.to_string())
}

fn load_config(path: Option<&Path>, mode: Mode) -> anyhow::Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(declared) = cfg.mode {
        if declared != mode {
            bail!("configuration is for `{declared}` but `{mode}` was requested");
        }
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(config.as_deref(), Mode::Train)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out_dir(out, &cfg);
            let art = cmd_train(&cfg, &out)?;
            if let Some(last) = art.rewards.last() {
                log::info!(
                    "final mean reward over last 50 episodes: {:.6e}",
                    last.mean_last_50
                );
            }
            println!("{}", art.model_path.display());
            println!("{}", art.rewards_path.display());
        }
        Command::Sweep {
            model,
            grids,
            tuners,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref(), Mode::Sweep)?;
            let model = model.or_else(|| cfg.model.clone());
            let cells = grid_cells(&grids, &cfg.episode)?;
            let out = out_dir(out, &cfg);
            cmd_sweep(&cfg, model.as_deref(), &cells, &tuners, &out)?;
            println!("{}", out.join(tvtune_core::harness::SWEEP_FILE).display());
        }
        Command::Generalize {
            model,
            scenario,
            tuners,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref(), Mode::Generalize)?;
            let model = model.or_else(|| cfg.model.clone());
            let out = out_dir(out, &cfg);
            cmd_generalize(&cfg, model.as_deref(), scenario, &tuners, &out)?;
            println!(
                "{}",
                out.join(tvtune_core::harness::GENERALIZE_FILE).display()
            );
        }
        Command::GaTune {
            scenario,
            seed,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref(), Mode::GaTune)?;
            if let Some(seed) = seed {
                cfg.ga.seed = seed;
            }
            let out = out_dir(out, &cfg);
            let (best, _) = cmd_ga_tune(&cfg, scenario, &out)?;
            log::info!("best weights {:?}, fitness {:.6e}", best.w_df, best.fitness);
            println!("{}", out.join(tvtune_core::harness::GA_BEST_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
