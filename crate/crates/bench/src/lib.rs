//! Shared fixtures for the benchmarks.

use tvtune_core::controller::{AllocJacobian, CgError, Weights};
use tvtune_core::dynamics::{PlantInput, TireParams, VehicleParams, VehicleState};

/// A mid-corner operating point at 100 km/h on a 0.5 friction surface.
pub fn cornering_point() -> (VehicleState, PlantInput, TireParams, VehicleParams) {
    let params = VehicleParams::default();
    let mut state = VehicleState::straight(27.78, &params);
    state.vy = -0.4;
    state.yaw_rate = 0.12;
    let input = PlantInput {
        steer: 0.02,
        wheel_torque: [100.0; 4],
    };
    let tire = TireParams::for_vehicle(&params, 0.5);
    (state, input, tire, params)
}

pub fn allocation_case() -> (CgError, AllocJacobian, Weights) {
    let params = VehicleParams::default();
    let jac = tvtune_core::controller::jacobian(0.05, &params);
    (
        CgError::new(300.0, -150.0, 80.0),
        jac,
        Weights::new([100.0; 4]),
    )
}
