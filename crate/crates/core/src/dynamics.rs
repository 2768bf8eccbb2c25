//! Planar four-wheel vehicle model with Pacejka tires.
//!
//! Rigid-body states are `[vx, vy, yaw, yaw_rate, X, Y]`; four wheel-spin
//! states are appended so that drive torque reaches the road through the
//! slip ratio. Axes: x forward, y left, z up, yaw counterclockwise positive.
//! Wheel order everywhere is FL, FR, RL, RR.

use crate::error::{finite, Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Below this longitudinal speed slip kinematics are not evaluated.
pub const MIN_SPEED: f64 = 0.1;

/// Relative slack allowed on the friction ellipse after clamping.
pub const ELLIPSE_TOLERANCE: f64 = 0.05;

pub const WHEEL_NAMES: [&str; 4] = ["FL", "FR", "RL", "RR"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub wheel_radius_eff: f64,
    /// C.G. to front axle.
    pub dist_front: f64,
    /// C.G. to rear axle.
    pub dist_rear: f64,
    pub track_width: f64,
    pub wheel_spin_inertia: f64,
    /// Axle cornering stiffness, N/rad. Only the reference generator uses it.
    pub cornering_stiffness_front: f64,
    pub cornering_stiffness_rear: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1360.0,
            yaw_inertia: 2050.0,
            wheel_radius_eff: 0.3,
            dist_front: 1.43,
            dist_rear: 1.21,
            track_width: 1.5,
            wheel_spin_inertia: 1.2,
            cornering_stiffness_front: 16000.0,
            cornering_stiffness_rear: 16000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("wheel_radius_eff", self.wheel_radius_eff),
            ("dist_front", self.dist_front),
            ("dist_rear", self.dist_rear),
            ("track_width", self.track_width),
            ("wheel_spin_inertia", self.wheel_spin_inertia),
            ("cornering_stiffness_front", self.cornering_stiffness_front),
            ("cornering_stiffness_rear", self.cornering_stiffness_rear),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "vehicle.{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.dist_front + self.dist_rear
    }

    /// Wheel contact positions relative to the C.G. in the body frame.
    pub fn wheel_positions(&self) -> [(f64, f64); 4] {
        let half = 0.5 * self.track_width;
        [
            (self.dist_front, half),
            (self.dist_front, -half),
            (-self.dist_rear, half),
            (-self.dist_rear, -half),
        ]
    }

    /// Static normal load per wheel (front, rear) with no load transfer.
    pub fn static_normal_loads(&self) -> [f64; 4] {
        let l = self.wheelbase();
        let front = self.mass * GRAVITY * self.dist_rear / (2.0 * l);
        let rear = self.mass * GRAVITY * self.dist_front / (2.0 * l);
        [front, front, rear, rear]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub vx: f64,
    pub vy: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub pos_x: f64,
    pub pos_y: f64,
    pub wheel_speed: [f64; 4],
}

/// Time derivative of every field of [`VehicleState`], same layout.
pub type StateDerivative = VehicleState;

impl VehicleState {
    pub const DIM: usize = 10;

    /// Straight-ahead driving at `speed` m/s with all wheels free rolling.
    pub fn straight(speed: f64, params: &VehicleParams) -> Self {
        let omega = speed / params.wheel_radius_eff;
        Self {
            vx: speed,
            vy: 0.0,
            yaw: 0.0,
            yaw_rate: 0.0,
            pos_x: 0.0,
            pos_y: 0.0,
            wheel_speed: [omega; 4],
        }
    }

    pub fn zero() -> Self {
        Self::from_array([0.0; Self::DIM])
    }

    /// The six rigid-body states in model order.
    pub fn rigid_body(&self) -> [f64; 6] {
        [
            self.vx,
            self.vy,
            self.yaw,
            self.yaw_rate,
            self.pos_x,
            self.pos_y,
        ]
    }

    pub fn to_array(&self) -> [f64; Self::DIM] {
        let w = self.wheel_speed;
        [
            self.vx,
            self.vy,
            self.yaw,
            self.yaw_rate,
            self.pos_x,
            self.pos_y,
            w[0],
            w[1],
            w[2],
            w[3],
        ]
    }

    pub fn from_array(a: [f64; Self::DIM]) -> Self {
        Self {
            vx: a[0],
            vy: a[1],
            yaw: a[2],
            yaw_rate: a[3],
            pos_x: a[4],
            pos_y: a[5],
            wheel_speed: [a[6], a[7], a[8], a[9]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireParams {
    pub stiffness_factor: f64,
    pub shape_factor: f64,
    pub curvature_factor: f64,
    pub mu: f64,
    pub normal_force: [f64; 4],
}

impl TireParams {
    pub const DEFAULT_B: f64 = 10.0;
    pub const DEFAULT_C: f64 = 1.9;
    pub const DEFAULT_E: f64 = 0.97;

    /// Default magic-formula coefficients on the vehicle's static loads.
    pub fn for_vehicle(params: &VehicleParams, mu: f64) -> Self {
        Self {
            stiffness_factor: Self::DEFAULT_B,
            shape_factor: Self::DEFAULT_C,
            curvature_factor: Self::DEFAULT_E,
            mu,
            normal_force: params.static_normal_loads(),
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Config(format!(
                "tire.mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        if !(self.stiffness_factor > 0.0 && self.shape_factor > 0.0) {
            return Err(Error::Config(
                "tire stiffness and shape factors must be positive".into(),
            ));
        }
        if !self.curvature_factor.is_finite() {
            return Err(Error::Config("tire curvature factor must be finite".into()));
        }
        if self
            .normal_force
            .iter()
            .any(|f| !(f.is_finite() && *f > 0.0))
        {
            return Err(Error::Config("normal forces must be positive".into()));
        }
        Ok(())
    }

    pub fn peak(&self, wheel: usize) -> f64 {
        self.mu * self.normal_force[wheel]
    }
}

/// Tire forces in each wheel's own frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForceVector {
    pub fx: [f64; 4],
    pub fy: [f64; 4],
}

impl TireForceVector {
    /// `[fx1..fx4, fy1..fy4]`.
    pub fn flatten(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(&self.fx);
        out[4..].copy_from_slice(&self.fy);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CgForces {
    pub fx_total: f64,
    pub fy_total: f64,
    pub yaw_moment: f64,
}

impl CgForces {
    pub fn as_array(&self) -> [f64; 3] {
        [self.fx_total, self.fy_total, self.yaw_moment]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipQuantities {
    /// Slip angles, rad.
    pub alpha: [f64; 4],
    /// Longitudinal slip ratios.
    pub kappa: [f64; 4],
}

/// Magic formula `D sin(C atan(B s - E (B s - atan(B s))))` with `D = peak`.
pub fn pacejka(slip: f64, peak: f64, tire: &TireParams) -> Result<f64> {
    let slip = finite(slip, "tire slip")?;
    let b = tire.stiffness_factor;
    let bs = b * slip;
    let phi = bs - tire.curvature_factor * (bs - bs.atan());
    Ok(peak * (tire.shape_factor * phi.atan()).sin())
}

pub(crate) fn steer_angles(steer: f64) -> [f64; 4] {
    [steer, steer, 0.0, 0.0]
}

fn check_speed(vx: f64) -> Result<()> {
    if vx.is_nan() || vx <= MIN_SPEED {
        Err(Error::DegenerateSpeed {
            vx,
            limit: MIN_SPEED,
        })
    } else {
        Ok(())
    }
}

/// Axle slip angles and per-wheel slip ratios.
///
/// `alpha_front = steer - atan((vy + lf r) / vx)`, `alpha_rear = -atan((vy - lr r) / vx)`.
/// Slip ratios compare `R_eff * omega` with the contact-point velocity
/// projected on the wheel heading.
pub fn slip_quantities(
    state: &VehicleState,
    steer: f64,
    params: &VehicleParams,
) -> Result<SlipQuantities> {
    check_speed(state.vx)?;
    let vx = state.vx;
    let r = state.yaw_rate;
    let alpha_front = steer - ((state.vy + params.dist_front * r) / vx).atan();
    let alpha_rear = -((state.vy - params.dist_rear * r) / vx).atan();
    let alpha = [alpha_front, alpha_front, alpha_rear, alpha_rear];

    let steers = steer_angles(steer);
    let mut kappa = [0.0; 4];
    for (i, &(x, y)) in params.wheel_positions().iter().enumerate() {
        let (s, c) = steers[i].sin_cos();
        let u = vx - r * y;
        let v = state.vy + r * x;
        let v_long = u * c + v * s;
        let rolling = params.wheel_radius_eff * state.wheel_speed[i];
        kappa[i] = (rolling - v_long) / v_long.abs().max(MIN_SPEED);
    }
    for value in alpha.iter().chain(kappa.iter()) {
        finite(*value, "slip quantity")?;
    }
    Ok(SlipQuantities { alpha, kappa })
}

/// Independent longitudinal and lateral magic-formula forces, rescaled onto
/// the friction ellipse `mu * Fz` when their resultant exceeds it.
pub fn tire_forces(
    state: &VehicleState,
    steer: f64,
    tire: &TireParams,
    params: &VehicleParams,
) -> Result<TireForceVector> {
    let slip = slip_quantities(state, steer, params)?;
    let mut out = TireForceVector::default();
    for i in 0..4 {
        let peak = tire.peak(i);
        let fx = pacejka(slip.kappa[i], peak, tire)?;
        let fy = pacejka(slip.alpha[i], peak, tire)?;
        let magnitude = fx.hypot(fy);
        let scale = if magnitude > peak {
            peak / magnitude
        } else {
            1.0
        };
        out.fx[i] = fx * scale;
        out.fy[i] = fy * scale;
    }
    Ok(out)
}

/// Net forces and yaw moment at the C.G. from wheel-frame tire forces.
pub fn cg_forces(tires: &TireForceVector, steer: f64, params: &VehicleParams) -> CgForces {
    let steers = steer_angles(steer);
    let mut total = CgForces::default();
    for (i, &(x, y)) in params.wheel_positions().iter().enumerate() {
        let (s, c) = steers[i].sin_cos();
        let body_x = tires.fx[i] * c - tires.fy[i] * s;
        let body_y = tires.fx[i] * s + tires.fy[i] * c;
        total.fx_total += body_x;
        total.fy_total += body_y;
        total.yaw_moment += x * body_y - y * body_x;
    }
    total
}

/// Inputs held constant across one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    /// Road-wheel steering angle of the front axle, rad.
    pub steer: f64,
    pub wheel_torque: [f64; 4],
}

pub fn derivatives(
    state: &VehicleState,
    input: &PlantInput,
    tire: &TireParams,
    params: &VehicleParams,
) -> Result<StateDerivative> {
    let tires = tire_forces(state, input.steer, tire, params)?;
    Ok(derivatives_from_forces(state, input, &tires, params))
}

pub(crate) fn derivatives_from_forces(
    state: &VehicleState,
    input: &PlantInput,
    tires: &TireForceVector,
    params: &VehicleParams,
) -> StateDerivative {
    let cg = cg_forces(tires, input.steer, params);
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    let mut wheel_accel = [0.0; 4];
    for (i, accel) in wheel_accel.iter_mut().enumerate() {
        *accel = (input.wheel_torque[i] - params.wheel_radius_eff * tires.fx[i])
            / params.wheel_spin_inertia;
    }
    VehicleState {
        vx: cg.fx_total / params.mass + state.yaw_rate * state.vy,
        vy: cg.fy_total / params.mass - state.yaw_rate * state.vx,
        yaw: state.yaw_rate,
        yaw_rate: cg.yaw_moment / params.yaw_inertia,
        pos_x: state.vx * cos_yaw - state.vy * sin_yaw,
        pos_y: state.vx * sin_yaw + state.vy * cos_yaw,
        wheel_speed: wheel_accel,
    }
}

/// One classical fourth-order Runge-Kutta step of `x' = f(x)`.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let offset = |base: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *base;
        for (o, d) in out.iter_mut().zip(k) {
            *o += h * d;
        }
        out
    };
    let k1 = f(x)?;
    let k2 = f(&offset(x, &k1, 0.5 * dt))?;
    let k3 = f(&offset(x, &k2, 0.5 * dt))?;
    let k4 = f(&offset(x, &k3, dt))?;
    let mut next = *x;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        finite(next[i], "integrated state")?;
    }
    Ok(next)
}

/// Advance the vehicle by `dt` seconds with `input` held constant.
pub fn step_rk4(
    state: &VehicleState,
    input: &PlantInput,
    tire: &TireParams,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Usage(format!(
            "integration step must be positive, got {dt}"
        )));
    }
    let next = rk4_step(&state.to_array(), dt, |x| {
        derivatives(&VehicleState::from_array(*x), input, tire, params).map(|d| d.to_array())
    })?;
    Ok(VehicleState::from_array(next))
}

/// Body sideslip angle `atan(vy / vx)`.
pub fn sideslip(state: &VehicleState) -> Result<f64> {
    check_speed(state.vx)?;
    Ok((state.vy / state.vx).atan())
}
