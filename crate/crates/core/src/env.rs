//! Episodic environment around the plant and the torque-vectoring controller.
//!
//! The agent picks the control-effort weights `W_df` every
//! `agent_sample_time` seconds; between agent decisions the controller runs at
//! the integrator rate with those weights held.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{
    allocate, cim_reference, jacobian_with, performance_index, CgError, CimParams,
    CorrectiveForces, Weights, W_DF_MAX, W_DF_MIN,
};
use crate::dynamics::{
    cg_forces, derivatives, derivatives_from_forces, rk4_step, sideslip, tire_forces, PlantInput,
    TireParams, VehicleParams, VehicleState,
};
use crate::error::{Error, Result};

pub const SIDESLIP_LIMIT_DEG: f64 = 8.0;
/// Error magnitude below which the threshold bonus is paid, N.
pub const BONUS_THRESHOLD: f64 = 200.0;
pub const SURVIVAL_REWARD: f64 = 6.0;
pub const BONUS_REWARD: f64 = 1.0;

pub const TRAIN_SPEED_KMH: (f64, f64) = (80.0, 130.0);
pub const TRAIN_MU: (f64, f64) = (0.4, 0.6);

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Agent observation: C.G. errors followed by the six rigid-body states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub ex: f64,
    pub ey: f64,
    pub emz: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub pos_x: f64,
    pub pos_y: f64,
}

impl Observation {
    pub const DIM: usize = 9;

    pub fn new(error: &CgError, state: &VehicleState) -> Self {
        Self {
            ex: error.ex,
            ey: error.ey,
            emz: error.emz,
            vx: state.vx,
            vy: state.vy,
            yaw: state.yaw,
            yaw_rate: state.yaw_rate,
            pos_x: state.pos_x,
            pos_y: state.pos_y,
        }
    }

    pub fn as_array(&self) -> [f64; Self::DIM] {
        [
            self.ex,
            self.ey,
            self.emz,
            self.vx,
            self.vy,
            self.yaw,
            self.yaw_rate,
            self.pos_x,
            self.pos_y,
        ]
    }

    pub fn from_array(a: [f64; Self::DIM]) -> Self {
        Self {
            ex: a[0],
            ey: a[1],
            emz: a[2],
            vx: a[3],
            vy: a[4],
            yaw: a[5],
            yaw_rate: a[6],
            pos_x: a[7],
            pos_y: a[8],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Diagonal of `W_df`, one weight per wheel (FL, FR, RL, RR).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub w_df: [f64; 4],
}

impl Action {
    pub const DIM: usize = 4;
    pub const LOWER: f64 = W_DF_MIN;
    pub const UPPER: f64 = W_DF_MAX;

    pub fn new(w_df: [f64; 4]) -> Self {
        Self { w_df }
    }

    pub fn uniform(w: f64) -> Self {
        Self { w_df: [w; 4] }
    }

    pub fn clamped(&self) -> Self {
        Self {
            w_df: self.w_df.map(|w| {
                if w.is_nan() {
                    Self::LOWER
                } else {
                    w.clamp(Self::LOWER, Self::UPPER)
                }
            }),
        }
    }

    pub fn in_bounds(&self) -> bool {
        self.w_df
            .iter()
            .all(|w| (Self::LOWER..=Self::UPPER).contains(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteerSchedule {
    /// `amplitude * sin(2 pi (t - start) / period)` from `start` onwards.
    Sine {
        amplitude: f64,
        period: f64,
        start: f64,
    },
    /// Jumps from zero to `amplitude` at `start`.
    Step { amplitude: f64, start: f64 },
}

impl SteerSchedule {
    fn at(&self, t: f64) -> f64 {
        match *self {
            SteerSchedule::Sine {
                amplitude,
                period,
                start,
            } => {
                if t < start {
                    0.0
                } else {
                    amplitude * (std::f64::consts::TAU * (t - start) / period).sin()
                }
            }
            SteerSchedule::Step { amplitude, start } => {
                if t < start {
                    0.0
                } else {
                    amplitude
                }
            }
        }
    }
}

/// Piecewise-linear schedule through `(time, value)` breakpoints, held
/// constant outside the first and last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() || points.windows(2).any(|w| !(w[1].0 >= w[0].0)) {
            return Err(Error::Config(
                "schedule breakpoints must be non-empty and sorted in time".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|p| p.0 <= t);
        if idx == 0 {
            return pts[0].1;
        }
        if idx == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (t0, v0) = pts[idx - 1];
        let (t1, v1) = pts[idx];
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverProfile {
    pub steer: SteerSchedule,
    /// Total drive torque, N m, split equally over the four wheels.
    pub torque: PiecewiseLinear,
    /// Last time at which the schedules are defined, s.
    pub horizon: f64,
}

/// Handwheel to road-wheel angle ratio.
pub const STEERING_RATIO: f64 = 16.0;

/// Seconds over which the driver moves between torque levels.
pub const TORQUE_RAMP: f64 = 0.25;

impl DriverProfile {
    /// Accelerate from 1 s, brake over 8-9.5 s, accelerate again until 11 s.
    pub fn default_torque() -> PiecewiseLinear {
        let r = TORQUE_RAMP;
        PiecewiseLinear {
            points: vec![
                (1.0, 0.0),
                (1.0 + r, 400.0),
                (8.0, 400.0),
                (8.0 + r, -600.0),
                (9.5, -600.0),
                (9.5 + r, 400.0),
                (11.0, 400.0),
                (11.0 + r, 0.0),
            ],
        }
    }

    /// 5 deg handwheel sine steer, period 6 s from 1 s, with the default torque schedule.
    pub fn training() -> Self {
        Self {
            steer: SteerSchedule::Sine {
                amplitude: 5.0_f64.to_radians() / STEERING_RATIO,
                period: 6.0,
                start: 1.0,
            },
            torque: Self::default_torque(),
            horizon: 15.0,
        }
    }

    /// 50 deg handwheel step steer at 1 s, same torque schedule.
    pub fn step_steer() -> Self {
        Self {
            steer: SteerSchedule::Step {
                amplitude: 50.0_f64.to_radians() / STEERING_RATIO,
                start: 1.0,
            },
            torque: Self::default_torque(),
            horizon: 15.0,
        }
    }

    /// Road-wheel steer (rad) and total drive torque (N m) at time `t`.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Usage(format!(
                "driver profile queried at t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok((self.steer.at(t), self.torque.at(t)))
    }
}

/// The training profile evaluated at `t`.
pub fn driver_profile_default(t: f64) -> Result<(f64, f64)> {
    DriverProfile::training().at(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub initial_speed_kmh: f64,
    pub mu: f64,
    pub profile: DriverProfile,
    pub episode_length: f64,
    pub agent_sample_time: f64,
    pub sim_dt: f64,
    pub seed: u64,
    /// Use errors averaged over the hold window in the reward instead of the
    /// errors at the sample instant.
    pub window_average_reward: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            initial_speed_kmh: 100.0,
            mu: 0.4,
            profile: DriverProfile::training(),
            episode_length: 15.0,
            agent_sample_time: 0.5,
            sim_dt: 1e-3,
            seed: 0,
            window_average_reward: false,
        }
    }
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let ratio = num / den;
    let rounded = ratio.round();
    ((ratio - rounded).abs() < 1e-9 * ratio.abs().max(1.0) && rounded >= 1.0)
        .then_some(rounded as usize)
}

impl EpisodeConfig {
    pub fn scenario(initial_speed_kmh: f64, mu: f64) -> Self {
        Self {
            initial_speed_kmh,
            mu,
            ..Self::default()
        }
    }

    pub fn with_profile(mut self, profile: DriverProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_speed_kmh.is_finite() && self.initial_speed_kmh > 0.0) {
            return Err(Error::Config(format!(
                "initial speed must be positive, got {} km/h",
                self.initial_speed_kmh
            )));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Config(format!(
                "mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        if !(self.sim_dt > 0.0 && self.agent_sample_time > 0.0 && self.episode_length > 0.0) {
            return Err(Error::Config("episode timings must be positive".into()));
        }
        if integer_ratio(self.episode_length, self.agent_sample_time).is_none() {
            return Err(Error::Config(format!(
                "episode length {} is not a whole number of agent steps of {}",
                self.episode_length, self.agent_sample_time
            )));
        }
        if integer_ratio(self.agent_sample_time, self.sim_dt).is_none() {
            return Err(Error::Config(format!(
                "agent sample time {} is not a whole number of integration steps of {}",
                self.agent_sample_time, self.sim_dt
            )));
        }
        if self.profile.horizon < self.episode_length {
            return Err(Error::Config(
                "driver profile is shorter than the episode".into(),
            ));
        }
        Ok(())
    }

    pub fn agent_steps(&self) -> usize {
        integer_ratio(self.episode_length, self.agent_sample_time).unwrap_or(0)
    }

    pub fn ticks_per_step(&self) -> usize {
        integer_ratio(self.agent_sample_time, self.sim_dt).unwrap_or(0)
    }
}

/// Draws training scenarios: speed uniform in 80-130 km/h, friction in 0.4-0.6.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    rng: ChaCha8Rng,
}

impl ScenarioSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, base: &EpisodeConfig) -> EpisodeConfig {
        let speed = self.rng.random_range(TRAIN_SPEED_KMH.0..=TRAIN_SPEED_KMH.1);
        let mu = self.rng.random_range(TRAIN_MU.0..=TRAIN_MU.1);
        EpisodeConfig {
            initial_speed_kmh: speed,
            mu,
            ..base.clone()
        }
    }
}

/// Vehicle, tire and controller settings shared by every episode.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub vehicle: VehicleParams,
    /// Template tire; its `mu` is replaced by the episode friction.
    pub tire: TireParams,
    pub cim: CimParams,
    pub w_e: [f64; 3],
    /// Keep the `lf sin(steer)` term in the allocation Jacobian.
    pub steer_lever: bool,
}

impl Default for PlantConfig {
    fn default() -> Self {
        let vehicle = VehicleParams::default();
        Self {
            tire: TireParams::for_vehicle(&vehicle, 0.9),
            vehicle,
            cim: CimParams::default(),
            w_e: Weights::DEFAULT_W_E,
            steer_lever: true,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.tire.validate()?;
        self.cim.validate()?;
        Weights {
            w_e: self.w_e,
            w_df: [1.0; 4],
        }
        .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub quadratic_penalty: f64,
    /// 1 unless the episode was terminated on this step.
    pub survival: f64,
    /// 1 when both force errors are below the threshold.
    pub threshold_bonus: f64,
    pub total: f64,
}

pub fn quadratic_penalty(error: &CgError) -> f64 {
    (10.0 * error.ex * error.ex + 5.0 * error.ey * error.ey + 5.0 * error.emz * error.emz) * 0.01
}

pub fn reward_terms(error: &CgError, terminated: bool) -> RewardTerms {
    let quadratic_penalty = quadratic_penalty(error);
    let survival = if terminated { 0.0 } else { 1.0 };
    let threshold_bonus = if error.ex.abs() < BONUS_THRESHOLD && error.ey.abs() < BONUS_THRESHOLD {
        1.0
    } else {
        0.0
    };
    RewardTerms {
        quadratic_penalty,
        survival,
        threshold_bonus,
        total: -quadratic_penalty + SURVIVAL_REWARD * survival + BONUS_REWARD * threshold_bonus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Sideslip limit exceeded or simulation fault.
    pub terminated: bool,
    pub info: RewardTerms,
}

/// One integrator tick of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub state: VehicleState,
    pub error: CgError,
    pub w_df: [f64; 4],
    pub torque: [f64; 4],
    pub performance_index: f64,
    pub reward: Option<f64>,
}

/// Running statistics of the current episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    pub total_reward: f64,
    pub steps: usize,
    pub terminated: bool,
    /// Largest |e_x| seen at any integrator tick, N.
    pub max_abs_ex: f64,
    /// Time integral of the allocation objective, N^2 s.
    pub performance_integral: f64,
    pub max_abs_sideslip: f64,
}

#[derive(Debug, Clone)]
pub struct TorqueVectoringEnv {
    plant: PlantConfig,
    config: EpisodeConfig,
    tire: TireParams,
    state: VehicleState,
    tick: usize,
    steps_taken: usize,
    done: bool,
    last_error: CgError,
    stats: EpisodeStats,
    trace: Option<Vec<TraceRow>>,
    fallbacks: usize,
}

impl TorqueVectoringEnv {
    pub fn new(plant: PlantConfig) -> Result<Self> {
        plant.validate()?;
        let config = EpisodeConfig::default();
        let tire = plant.tire.with_mu(config.mu);
        Ok(Self {
            state: VehicleState::straight(kmh_to_ms(config.initial_speed_kmh), &plant.vehicle),
            plant,
            config,
            tire,
            tick: 0,
            steps_taken: 0,
            done: true,
            last_error: CgError::default(),
            stats: EpisodeStats::default(),
            trace: None,
            fallbacks: 0,
        })
    }

    /// Record every integrator tick from the next reset on.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.trace.as_deref()
    }

    pub fn plant(&self) -> &PlantConfig {
        &self.plant
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.sim_dt
    }

    pub fn stats(&self) -> &EpisodeStats {
        &self.stats
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Number of allocation failures that fell back to zero correction.
    pub fn allocation_fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn reset(&mut self, config: &EpisodeConfig) -> Result<Observation> {
        config.validate()?;
        self.config = config.clone();
        self.tire = self.plant.tire.with_mu(config.mu);
        self.tire.validate()?;
        self.state =
            VehicleState::straight(kmh_to_ms(config.initial_speed_kmh), &self.plant.vehicle);
        self.tick = 0;
        self.steps_taken = 0;
        self.done = false;
        self.stats = EpisodeStats::default();
        self.fallbacks = 0;
        if let Some(trace) = self.trace.as_mut() {
            trace.clear();
        }
        let (steer, torque) = self.config.profile.at(0.0)?;
        self.last_error = self.cg_error(steer, torque)?;
        Ok(Observation::new(&self.last_error, &self.state))
    }

    fn cg_error(&self, steer: f64, torque: f64) -> Result<CgError> {
        let forces = tire_forces(&self.state, steer, &self.tire, &self.plant.vehicle)?;
        let actual = cg_forces(&forces, steer, &self.plant.vehicle);
        let desired = cim_reference(
            steer,
            torque,
            &self.state,
            &self.plant.vehicle,
            &self.plant.cim,
        )?;
        Ok(CgError::between(&desired, &actual))
    }

    /// One controller tick followed by one integration step. Returns the
    /// error seen by the controller at the start of the tick.
    fn tick(&mut self, weights: &Weights) -> Result<CgError> {
        let params = self.plant.vehicle;
        let t = self.time();
        let (steer, torque) = self.config.profile.at(t)?;
        let forces = tire_forces(&self.state, steer, &self.tire, &params)?;
        let actual = cg_forces(&forces, steer, &params);
        let desired = cim_reference(steer, torque, &self.state, &params, &self.plant.cim)?;
        let error = CgError::between(&desired, &actual);
        if !error.is_finite() {
            return Err(Error::SimulationFault("non-finite C.G. error".into()));
        }
        let jac = jacobian_with(steer, &params, self.plant.steer_lever);
        let correction = match allocate(&error, &jac, weights, params.wheel_radius_eff) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("allocation fallback at t = {t:.3}: {e}");
                self.fallbacks += 1;
                CorrectiveForces::zero()
            }
        };
        let p_index = performance_index(&error, &jac, &correction, weights);
        self.stats.performance_integral += p_index * self.config.sim_dt;
        self.stats.max_abs_ex = self.stats.max_abs_ex.max(error.ex.abs());

        let share = torque / 4.0;
        let input = PlantInput {
            steer,
            wheel_torque: correction.torque.map(|dt| share + dt),
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRow {
                time: t,
                state: self.state,
                error,
                w_df: weights.w_df,
                torque: correction.torque,
                performance_index: p_index,
                reward: None,
            });
        }

        // Tire forces depend on the state only, so the first stage reuses them.
        let first = derivatives_from_forces(&self.state, &input, &forces, &params).to_array();
        let mut first = Some(first);
        let tire = self.tire;
        let next = rk4_step(&self.state.to_array(), self.config.sim_dt, |x| {
            if let Some(k1) = first.take() {
                return Ok(k1);
            }
            derivatives(&VehicleState::from_array(*x), &input, &tire, &params).map(|d| d.to_array())
        })?;
        self.state = VehicleState::from_array(next);
        self.tick += 1;
        Ok(error)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let action = action.clamped();
        let weights = Weights {
            w_e: self.plant.w_e,
            w_df: action.w_df,
        };
        let limit = SIDESLIP_LIMIT_DEG.to_radians();
        let ticks = self.config.ticks_per_step();
        let mut terminated = false;
        let mut window = CgError::default();
        let mut window_ticks = 0usize;
        for _ in 0..ticks {
            match self.tick(&weights) {
                Ok(e) => {
                    window.ex += e.ex;
                    window.ey += e.ey;
                    window.emz += e.emz;
                    window_ticks += 1;
                }
                Err(e) => {
                    log::debug!("episode terminated by fault: {e}");
                    terminated = true;
                    break;
                }
            }
            match sideslip(&self.state) {
                Ok(beta) => {
                    self.stats.max_abs_sideslip = self.stats.max_abs_sideslip.max(beta.abs());
                    if beta.abs() > limit || !self.state.is_finite() {
                        terminated = true;
                        break;
                    }
                }
                Err(_) => {
                    terminated = true;
                    break;
                }
            }
        }
        self.steps_taken += 1;

        let sample_error = if terminated && !self.state.is_finite() {
            self.last_error
        } else {
            let t = self.time().min(self.config.profile.horizon);
            match self
                .config
                .profile
                .at(t)
                .and_then(|(steer, torque)| self.cg_error(steer, torque))
            {
                Ok(e) if e.is_finite() => e,
                _ => {
                    terminated = true;
                    self.last_error
                }
            }
        };
        self.last_error = sample_error;

        let reward_error = if self.config.window_average_reward && window_ticks > 0 {
            let n = window_ticks as f64;
            CgError::new(window.ex / n, window.ey / n, window.emz / n)
        } else {
            sample_error
        };
        let info = reward_terms(&reward_error, terminated);
        let done = terminated || self.steps_taken >= self.config.agent_steps();
        self.done = done;
        self.stats.total_reward += info.total;
        self.stats.steps = self.steps_taken;
        self.stats.terminated |= terminated;
        if let Some(last) = self.trace.as_mut().and_then(|t| t.last_mut()) {
            last.reward = Some(info.total);
        }
        let state = if self.state.is_finite() {
            self.state
        } else {
            VehicleState::zero()
        };
        Ok(StepOutcome {
            observation: Observation::new(&sample_error, &state),
            reward: info.total,
            done,
            terminated,
            info,
        })
    }

    /// Runs a whole episode with `policy` choosing the weights at every agent step.
    pub fn run_episode<P>(&mut self, config: &EpisodeConfig, mut policy: P) -> Result<EpisodeStats>
    where
        P: FnMut(&Observation) -> Action,
    {
        let mut obs = self.reset(config)?;
        loop {
            let out = self.step(&policy(&obs))?;
            obs = out.observation;
            if out.done {
                return Ok(self.stats);
            }
        }
    }
}

/// Writes a trace as CSV, one row per integrator tick.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for row in rows {
        let s = &row.state;
        let mut rec: Vec<String> = vec![
            row.time.to_string(),
            s.vx.to_string(),
            s.vy.to_string(),
            s.yaw.to_string(),
            s.yaw_rate.to_string(),
            s.pos_x.to_string(),
            s.pos_y.to_string(),
            row.error.ex.to_string(),
            row.error.ey.to_string(),
            row.error.emz.to_string(),
        ];
        rec.extend(row.w_df.iter().map(f64::to_string));
        rec.extend(row.torque.iter().map(f64::to_string));
        rec.push(row.performance_index.to_string());
        rec.push(row.reward.map(|r| r.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub const TRACE_COLUMNS: [&str; 20] = [
    "time",
    "vx",
    "vy",
    "yaw",
    "yaw_rate",
    "pos_x",
    "pos_y",
    "ex",
    "ey",
    "emz",
    "w_fl",
    "w_fr",
    "w_rl",
    "w_rr",
    "dt_fl",
    "dt_fr",
    "dt_rl",
    "dt_rr",
    "perf_index",
    "reward",
];

pub fn save_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(rows, std::io::BufWriter::new(file))
}
