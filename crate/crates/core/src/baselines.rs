//! Comparison tuners: a genetic algorithm over fixed weights, and the
//! hand-picked manual setting.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controller::{W_DF_MAX, W_DF_MIN};
use crate::env::{Action, EpisodeConfig, PlantConfig, TorqueVectoringEnv};
use crate::error::{Error, Result};

/// Cost added when an episode ends before its horizon.
pub const EARLY_TERMINATION_PENALTY: f64 = 1e6;

/// The manual baseline, 100 on every wheel.
pub fn manual_w_df() -> Action {
    Action::uniform(100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the gene range.
    pub mutation_scale: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    /// Extension of the blend-crossover interval beyond the parents.
    pub blend_alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
    /// Evaluate a generation's fitness on the rayon pool.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            generations: 60,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elitism: 2,
            tournament_size: 3,
            blend_alpha: 0.5,
            lower: W_DF_MIN,
            upper: W_DF_MAX,
            seed: 0,
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population size must be even and at least 2, got {}",
                self.population_size
            )));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.crossover_rate) || !unit(self.mutation_rate) {
            return Err(Error::Config("GA rates must lie in [0, 1]".into()));
        }
        if !(self.mutation_scale >= 0.0 && self.blend_alpha >= 0.0) {
            return Err(Error::Config(
                "mutation scale and blend alpha must be non-negative".into(),
            ));
        }
        if self.elitism > self.population_size || self.tournament_size == 0 {
            return Err(Error::Config("invalid elitism or tournament size".into()));
        }
        if !(self.lower < self.upper) {
            return Err(Error::Config("empty gene bounds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub genes: [f64; 4],
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaReport {
    /// Best candidate seen in any generation.
    pub best: Candidate,
    /// Best-ever fitness after each generation, the initial one included.
    pub best_fitness: Vec<f64>,
    /// Mean population fitness per generation.
    pub mean_fitness: Vec<f64>,
    /// Sorted fitness values of every generation.
    pub populations: Vec<Vec<f64>>,
    pub evaluations: usize,
}

/// Sample-instant error penalty integrated over the agent steps of one
/// episode run with fixed weights, plus the penalty if it ends early.
pub fn ga_cost(w_df: &Action, scenario: &EpisodeConfig, plant: &PlantConfig) -> Result<f64> {
    let mut env = TorqueVectoringEnv::new(plant.clone())?;
    env.reset(scenario)?;
    let mut cost = 0.0;
    loop {
        let out = env.step(w_df)?;
        cost += out.info.quadratic_penalty * scenario.agent_sample_time;
        if out.terminated {
            cost += EARLY_TERMINATION_PENALTY;
        }
        if out.done {
            return Ok(cost);
        }
    }
}

fn clip(genes: &mut [f64; 4], cfg: &GaConfig) {
    for g in genes {
        *g = g.clamp(cfg.lower, cfg.upper);
    }
}

fn key(genes: &[f64; 4]) -> [u64; 4] {
    genes.map(f64::to_bits)
}

fn tournament<'p>(pop: &'p [Candidate], k: usize, rng: &mut ChaCha8Rng) -> &'p Candidate {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.fitness < best.fitness {
            best = c;
        }
    }
    best
}

/// Minimises `cost` over `[lower, upper]^4`.
pub fn ga_minimize<F>(cost: F, cfg: &GaConfig) -> Result<GaReport>
where
    F: Fn(&[f64; 4]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let range = cfg.upper - cfg.lower;
    let mut cache: HashMap<[u64; 4], f64> = HashMap::new();
    let mut evaluations = 0;

    let mut evaluate =
        |genes: Vec<[f64; 4]>, cache: &mut HashMap<[u64; 4], f64>| -> Result<Vec<Candidate>> {
            let fresh: Vec<[f64; 4]> = {
                let mut seen = std::collections::HashSet::new();
                genes
                    .iter()
                    .filter(|g| !cache.contains_key(&key(g)) && seen.insert(key(g)))
                    .copied()
                    .collect()
            };
            let scores: Vec<Result<f64>> = if cfg.parallel {
                fresh.par_iter().map(&cost).collect()
            } else {
                fresh.iter().map(&cost).collect()
            };
            evaluations += fresh.len();
            for (g, s) in fresh.iter().zip(scores) {
                let s = s?;
                if s.is_nan() {
                    return Err(Error::SimulationFault(format!("GA cost is NaN at {g:?}")));
                }
                cache.insert(key(g), s);
            }
            Ok(genes
                .into_iter()
                .map(|g| Candidate {
                    fitness: cache[&key(&g)],
                    genes: g,
                })
                .collect())
        };

    let initial: Vec<[f64; 4]> = (0..cfg.population_size)
        .map(|_| std::array::from_fn(|_| rng.random_range(cfg.lower..=cfg.upper)))
        .collect();
    let mut pop = evaluate(initial, &mut cache)?;
    let by_fitness = |a: &Candidate, b: &Candidate| a.fitness.total_cmp(&b.fitness);
    pop.sort_by(by_fitness);
    let mut best = pop[0];
    let mut report = GaReport {
        best,
        best_fitness: vec![best.fitness],
        mean_fitness: vec![pop.iter().map(|c| c.fitness).sum::<f64>() / pop.len() as f64],
        populations: vec![pop.iter().map(|c| c.fitness).collect()],
        evaluations: 0,
    };

    for generation in 0..cfg.generations {
        let mut children: Vec<[f64; 4]> = pop[..cfg.elitism].iter().map(|c| c.genes).collect();
        while children.len() < cfg.population_size {
            let p1 = tournament(&pop, cfg.tournament_size, &mut rng).genes;
            let p2 = tournament(&pop, cfg.tournament_size, &mut rng).genes;
            let (mut c1, mut c2) = (p1, p2);
            if rng.random::<f64>() < cfg.crossover_rate {
                for i in 0..4 {
                    let lo = p1[i].min(p2[i]);
                    let span = (p1[i] - p2[i]).abs();
                    let pad = cfg.blend_alpha * span;
                    c1[i] = lo - pad + rng.random::<f64>() * (span + 2.0 * pad);
                    c2[i] = lo - pad + rng.random::<f64>() * (span + 2.0 * pad);
                }
            }
            for c in [&mut c1, &mut c2] {
                for g in c.iter_mut() {
                    if rng.random::<f64>() < cfg.mutation_rate {
                        let z: f64 = rng.sample(StandardNormal);
                        *g += z * cfg.mutation_scale * range;
                    }
                }
                clip(c, cfg);
            }
            children.push(c1);
            if children.len() < cfg.population_size {
                children.push(c2);
            }
        }
        pop = evaluate(children, &mut cache)?;
        pop.sort_by(by_fitness);
        if pop[0].fitness < best.fitness {
            best = pop[0];
        }
        log::debug!(
            "GA generation {}: best {:.6e} at {:?}",
            generation + 1,
            best.fitness,
            best.genes
        );
        report.best_fitness.push(best.fitness);
        report
            .mean_fitness
            .push(pop.iter().map(|c| c.fitness).sum::<f64>() / pop.len() as f64);
        report
            .populations
            .push(pop.iter().map(|c| c.fitness).collect());
    }
    report.best = best;
    report.evaluations = evaluations;
    Ok(report)
}

/// Tunes one fixed weight vector minimising the mean `ga_cost` over `scenarios`.
pub fn ga_tune(
    scenarios: &[EpisodeConfig],
    plant: &PlantConfig,
    cfg: &GaConfig,
) -> Result<GaReport> {
    if scenarios.is_empty() {
        return Err(Error::Usage("GA needs at least one scenario".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    plant.validate()?;
    let n = scenarios.len() as f64;
    ga_minimize(
        |genes| {
            let action = Action::new(*genes);
            let mut total = 0.0;
            for s in scenarios {
                total += ga_cost(&action, s, plant)?;
            }
            Ok(total / n)
        },
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(center: f64) -> impl Fn(&[f64; 4]) -> Result<f64> + Sync {
        move |g| Ok(g.iter().map(|w| (w - center).powi(2)).sum())
    }

    #[test]
    fn manual_setting() {
        assert_eq!(manual_w_df().w_df, [100.0; 4]);
        assert!(manual_w_df().in_bounds());
    }

    #[test]
    fn finds_interior_optimum() {
        let r = ga_minimize(bowl(500.0), &GaConfig::default()).unwrap();
        for g in r.best.genes {
            assert!((g - 500.0).abs() < 10.0, "{:?}", r.best.genes);
        }
    }

    #[test]
    fn finds_boundary_optimum() {
        let r = ga_minimize(bowl(40.0), &GaConfig::default()).unwrap();
        for g in r.best.genes {
            assert!((g - 40.0).abs() < 10.0, "{:?}", r.best.genes);
        }
    }

    #[test]
    fn best_fitness_never_increases() {
        let cfg = GaConfig {
            seed: 4,
            ..GaConfig::default()
        };
        let r = ga_minimize(bowl(731.0), &cfg).unwrap();
        assert_eq!(r.best_fitness.len(), cfg.generations + 1);
        assert!(r.best_fitness.windows(2).all(|w| w[1] <= w[0]));
        // Elites survive, so the population minimum is also monotone.
        assert!(r.populations.windows(2).all(|w| w[1][0] <= w[0][0]));
    }

    #[test]
    fn selection_only_improves_weakly() {
        let cfg = GaConfig {
            crossover_rate: 0.0,
            mutation_rate: 0.0,
            seed: 8,
            ..GaConfig::default()
        };
        let r = ga_minimize(bowl(300.0), &cfg).unwrap();
        let initial: std::collections::HashSet<u64> =
            r.populations[0].iter().map(|f| f.to_bits()).collect();
        for w in r.populations.windows(2) {
            // Sorted ascending: rank-wise, each generation is no worse.
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(b <= a);
            }
            assert!(w[1].iter().all(|f| initial.contains(&f.to_bits())));
        }
    }

    #[test]
    fn genes_stay_in_bounds() {
        let cfg = GaConfig {
            mutation_rate: 1.0,
            mutation_scale: 2.0,
            blend_alpha: 3.0,
            generations: 10,
            ..GaConfig::default()
        };
        let out_of_bounds = std::sync::atomic::AtomicBool::new(false);
        ga_minimize(
            |g| {
                if g.iter().any(|w| !(40.0..=1000.0).contains(w)) {
                    out_of_bounds.store(true, std::sync::atomic::Ordering::Relaxed);
                }
                Ok(g.iter().sum())
            },
            &cfg,
        )
        .unwrap();
        assert!(!out_of_bounds.into_inner());
    }

    #[test]
    fn parallel_matches_sequential() {
        let seq = GaConfig {
            parallel: false,
            generations: 15,
            seed: 3,
            ..GaConfig::default()
        };
        let par = GaConfig {
            parallel: true,
            ..seq.clone()
        };
        assert_eq!(
            ga_minimize(bowl(612.0), &seq).unwrap(),
            ga_minimize(bowl(612.0), &par).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let odd = GaConfig {
            population_size: 39,
            ..GaConfig::default()
        };
        assert!(odd.validate().is_err());
        let rate = GaConfig {
            mutation_rate: 1.5,
            ..GaConfig::default()
        };
        assert!(rate.validate().is_err());
        assert!(ga_tune(&[], &PlantConfig::default(), &GaConfig::default()).is_err());
    }

    #[test]
    fn cost_is_deterministic_and_penalised() {
        let plant = PlantConfig::default();
        let short = EpisodeConfig {
            episode_length: 2.0,
            ..EpisodeConfig::scenario(100.0, 0.4)
        };
        let a = ga_cost(&manual_w_df(), &short, &plant).unwrap();
        let b = ga_cost(&manual_w_df(), &short, &plant).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((0.0..EARLY_TERMINATION_PENALTY).contains(&a));

        // A hard step steer on ice spins the car out.
        let spin = EpisodeConfig {
            episode_length: 5.0,
            ..EpisodeConfig::scenario(100.0, 0.3)
                .with_profile(crate::env::DriverProfile::step_steer())
        };
        let c = ga_cost(&manual_w_df(), &spin, &plant).unwrap();
        assert!(c >= EARLY_TERMINATION_PENALTY, "{c}");
    }

    #[test]
    fn zero_error_episode_costs_nothing() {
        // Straight, unpowered coast from rest-free speed: every error is zero.
        let plant = PlantConfig::default();
        let flat = crate::env::DriverProfile {
            steer: crate::env::SteerSchedule::Step {
                amplitude: 0.0,
                start: 0.0,
            },
            torque: crate::env::PiecewiseLinear::new(vec![(0.0, 0.0)]).unwrap(),
            horizon: 15.0,
        };
        let cfg = EpisodeConfig::scenario(80.0, 0.5).with_profile(flat);
        assert_eq!(ga_cost(&manual_w_df(), &cfg, &plant).unwrap(), 0.0);
    }
}
