//! Command interpretation and torque-vectoring allocation.
//!
//! The allocator minimises
//! `P = 1/2 [(E - J dF)' W_E (E - J dF) + dF' W_df dF]`
//! over longitudinal tire-force corrections `dF`, giving
//! `dF = (W_df + J' W_E J)^-1 J' W_E E`. Lateral corrections are fixed at zero.

use nalgebra::{Matrix3x4, Matrix4, SymmetricEigen, Vector3, Vector4};

use crate::dynamics::{VehicleParams, VehicleState, GRAVITY, MIN_SPEED};
use crate::error::{Error, Result};

/// Allocation is refused above this condition number of the 4x4 system.
pub const MAX_CONDITION: f64 = 1e12;

pub const W_DF_MIN: f64 = 40.0;
pub const W_DF_MAX: f64 = 1000.0;

/// `E = F_des - F(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CgError {
    pub ex: f64,
    pub ey: f64,
    pub emz: f64,
}

impl CgError {
    pub fn new(ex: f64, ey: f64, emz: f64) -> Self {
        Self { ex, ey, emz }
    }

    pub fn between(desired: &ReferenceForces, actual: &crate::dynamics::CgForces) -> Self {
        Self {
            ex: desired.fx_des - actual.fx_total,
            ey: desired.fy_des - actual.fy_total,
            emz: desired.mz_des - actual.yaw_moment,
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ex, self.ey, self.emz)
    }

    pub fn is_finite(&self) -> bool {
        self.ex.is_finite() && self.ey.is_finite() && self.emz.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    /// Diagonal of W_E on (Fx, Fy, Gz) errors.
    pub w_e: [f64; 3],
    /// Diagonal of W_df on the four corrective forces.
    pub w_df: [f64; 4],
}

impl Weights {
    pub const DEFAULT_W_E: [f64; 3] = [0.4, 0.02, 1500.0];

    pub fn new(w_df: [f64; 4]) -> Self {
        Self {
            w_e: Self::DEFAULT_W_E,
            w_df,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .w_e
            .iter()
            .chain(self.w_df.iter())
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(Error::Config(format!(
                "weights must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Partial derivatives of (Fx, Fy, Gz) with respect to (fx1..fx4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocJacobian(pub Matrix3x4<f64>);

impl AllocJacobian {
    pub fn from_rows(rows: [[f64; 4]; 3]) -> Self {
        Self(Matrix3x4::from_fn(|r, c| rows[r][c]))
    }

    pub fn row(&self, r: usize) -> [f64; 4] {
        [
            self.0[(r, 0)],
            self.0[(r, 1)],
            self.0[(r, 2)],
            self.0[(r, 3)],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrectiveForces {
    /// Longitudinal force corrections per wheel, N.
    pub dfx: [f64; 4],
    /// `wheel_radius_eff * dfx`, N m.
    pub torque: [f64; 4],
}

impl CorrectiveForces {
    pub fn from_forces(dfx: [f64; 4], wheel_radius_eff: f64) -> Self {
        Self {
            dfx,
            torque: dfx.map(|f| wheel_radius_eff * f),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Desired C.G. forces produced by the command interpreter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceForces {
    pub fx_des: f64,
    pub fy_des: f64,
    pub mz_des: f64,
}

/// Constants of the command interpreter. It assumes a nominal high-friction
/// road, so at low friction its demands are not attainable by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CimParams {
    pub mu_nominal: f64,
    /// Fraction of `mu_nominal * g` the desired lateral acceleration may reach.
    pub lateral_margin: f64,
    /// First-order time constant of the yaw-rate reference, s.
    pub time_constant: f64,
}

impl Default for CimParams {
    fn default() -> Self {
        Self {
            mu_nominal: 0.9,
            lateral_margin: 0.85,
            time_constant: 0.25,
        }
    }
}

impl CimParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu_nominal", self.mu_nominal),
            ("lateral_margin", self.lateral_margin),
            ("time_constant", self.time_constant),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "cim.{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Understeer gradient of the linear bicycle model from the axle cornering
/// stiffnesses, s^2/m. A negative (oversteering) gradient is clamped to zero,
/// otherwise the reference would change sign above the critical speed.
pub fn understeer_gradient(params: &VehicleParams) -> f64 {
    let k = params.mass / params.wheelbase()
        * (params.dist_rear / params.cornering_stiffness_front
            - params.dist_front / params.cornering_stiffness_rear);
    k.max(0.0)
}

/// Steady-state desired yaw rate for a road-wheel angle, saturated at the
/// nominal lateral-acceleration limit.
pub fn desired_yaw_rate(steer: f64, vx: f64, params: &VehicleParams, cim: &CimParams) -> f64 {
    let l = params.wheelbase();
    let raw = vx * steer / (l + understeer_gradient(params) * vx * vx);
    let limit = cim.lateral_margin * GRAVITY * cim.mu_nominal / vx;
    raw.clamp(-limit, limit)
}

pub fn cim_reference(
    driver_steer: f64,
    driver_torque: f64,
    state: &VehicleState,
    params: &VehicleParams,
    cim: &CimParams,
) -> Result<ReferenceForces> {
    if state.vx.is_nan() || state.vx <= MIN_SPEED {
        return Err(Error::DegenerateSpeed {
            vx: state.vx,
            limit: MIN_SPEED,
        });
    }
    let r_des = desired_yaw_rate(driver_steer, state.vx, params, cim);
    Ok(ReferenceForces {
        fx_des: driver_torque / params.wheel_radius_eff,
        fy_des: params.mass * state.vx * r_des,
        mz_des: params.yaw_inertia * (r_des - state.yaw_rate) / cim.time_constant,
    })
}

/// Analytic allocation Jacobian; front wheels steered by `steer`.
pub fn jacobian(steer: f64, params: &VehicleParams) -> AllocJacobian {
    jacobian_with(steer, params, true)
}

/// As [`jacobian`]; `steer_lever = false` drops the `lf sin(steer)` yaw-moment term.
pub fn jacobian_with(steer: f64, params: &VehicleParams, steer_lever: bool) -> AllocJacobian {
    let (s, c) = steer.sin_cos();
    let half = 0.5 * params.track_width;
    let lever = if steer_lever {
        params.dist_front * s
    } else {
        0.0
    };
    AllocJacobian::from_rows([
        [c, c, 1.0, 1.0],
        [s, s, 0.0, 0.0],
        [lever - half * c, lever + half * c, -half, half],
    ])
}

/// Closed-form minimiser of the weighted allocation objective.
pub fn allocate(
    error: &CgError,
    jac: &AllocJacobian,
    weights: &Weights,
    wheel_radius_eff: f64,
) -> Result<CorrectiveForces> {
    let j = &jac.0;
    let w_e = Vector3::from(weights.w_e);
    // J' W_E, scaling columns of J' by the W_E diagonal.
    let jt_we = j.transpose() * nalgebra::Matrix3::from_diagonal(&w_e);
    let system: Matrix4<f64> = Matrix4::from_diagonal(&Vector4::from(weights.w_df)) + jt_we * j;
    let rhs = jt_we * error.as_vector();

    // lambda_min >= min(W_df) and lambda_max <= trace for this SPD system.
    let min_w = weights.w_df.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = system.trace() / min_w;
    let condition = if bound.is_finite() && bound <= MAX_CONDITION {
        bound
    } else {
        condition_number(&system)
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Allocation {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let chol = system.cholesky().ok_or(Error::Allocation {
        condition,
        limit: MAX_CONDITION,
    })?;
    let df = chol.solve(&rhs);
    Ok(CorrectiveForces::from_forces(
        [df[0], df[1], df[2], df[3]],
        wheel_radius_eff,
    ))
}

fn condition_number(m: &Matrix4<f64>) -> f64 {
    if !m.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let max = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Objective value `P` for a given correction.
pub fn performance_index(
    error: &CgError,
    jac: &AllocJacobian,
    df: &CorrectiveForces,
    weights: &Weights,
) -> f64 {
    let d = Vector4::from(df.dfx);
    let residual = error.as_vector() - jac.0 * d;
    let tracking: f64 = (0..3)
        .map(|i| weights.w_e[i] * residual[i] * residual[i])
        .sum();
    let effort: f64 = (0..4).map(|i| weights.w_df[i] * d[i] * d[i]).sum();
    0.5 * (tracking + effort)
}
