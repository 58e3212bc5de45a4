//! Fixtures shared by the kernel benchmarks in `benches/`.

use vofflux_core::harness::{cases, initial_state, step_size, CaseConfig};
use vofflux_core::transport::SimState;
use vofflux_core::{FaceField, Mesh};

/// Vortex-reverse state at `t = 0` with its velocity and step size.
pub struct Fixture {
    pub config: CaseConfig,
    pub mesh: Mesh,
    pub state: SimState,
    pub velocity: FaceField,
    pub dt: f64,
}

pub fn vortex(n: usize) -> Fixture {
    let config = CaseConfig { n, ..CaseConfig::default() };
    let mesh = Mesh::unit(n).expect("bench meshes are valid");
    let state = initial_state(&mesh, &config).expect("vortex initial state");
    let velocity = cases::face_velocity(&mesh, &config, 0.0);
    let (dt, _) = step_size(&mesh, &config);
    Fixture { config, mesh, state, velocity, dt }
}
