//! Test cases, run loop, diagnostics, convergence sweeps and CSV output.

pub mod cases;
pub mod output;
pub mod sweep;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::donating::{inflow_rates, FluxError};
use crate::mesh::{interp_c2f, Axis, CenteredField, FaceField, Mesh};
use crate::plic::PlicOptions;
use crate::transport::{step, Advection, Checks, FluxMethod, Model, SimState, TransportConfig, GAS, LIQUID};
use crate::VofError;

pub use sweep::{convergence_sweep, fit_order, OrderRow, Sweep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    Vortex2d,
    Translation,
    Rotation,
    NoInterface,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Vortex2d => "vortex2d",
            Case::Translation => "translation",
            Case::Rotation => "rotation",
            Case::NoInterface => "no-interface",
        }
    }
}

impl std::str::FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vortex2d" => Ok(Case::Vortex2d),
            "translation" => Ok(Case::Translation),
            "rotation" => Ok(Case::Rotation),
            "no-interface" => Ok(Case::NoInterface),
            _ => Err(format!("unknown case '{s}'")),
        }
    }
}

/// When the advecting velocity is sampled within a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeSampling {
    /// At `t^n`.
    Start,
    /// At `t^n + dt/2`.
    Midpoint,
}

impl std::str::FromStr for TimeSampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" | "start" => Ok(TimeSampling::Start),
            "midpoint" | "half" => Ok(TimeSampling::Midpoint),
            _ => Err(format!("unknown velocity sampling '{s}' (expected n or midpoint)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    pub case: Case,
    pub n: usize,
    pub cfl: f64,
    pub beta: f64,
    pub method: FluxMethod,
    pub model: Model,
    pub period: f64,
    /// `rho^g / rho^l`, with `rho^l = 1`.
    pub rho_ratio: f64,
    pub sampling: TimeSampling,
    /// Velocity scale; the translation speed for that case.
    pub speed: f64,
    /// Run a fixed number of steps instead of up to `period`.
    pub steps: Option<usize>,
    pub checks: Checks,
    pub plic: PlicOptions,
    pub enforce_gas_volume: bool,
    pub out: Option<PathBuf>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            case: Case::Vortex2d,
            n: 64,
            cfl: 0.75,
            beta: 0.5,
            method: FluxMethod::LaxWendroff,
            model: Model::TwoVelocity,
            period: 1.0,
            rho_ratio: 1e-3,
            sampling: TimeSampling::Start,
            speed: 1.0,
            steps: None,
            checks: Checks::default(),
            plic: PlicOptions::default(),
            enforce_gas_volume: true,
            out: None,
        }
    }
}

impl CaseConfig {
    pub fn transport(&self) -> TransportConfig {
        TransportConfig {
            method: self.method,
            beta: self.beta,
            cfl: self.cfl,
            plic: self.plic,
            checks: self.checks,
            enforce_gas_volume: self.enforce_gas_volume,
        }
    }

    pub fn validate(&self) -> Result<(), VofError> {
        self.transport().validate()?;
        if self.n < 4 {
            return Err(VofError::InvalidConfig(format!("n = {} is too small", self.n)));
        }
        if !(self.period > 0.0) || !(self.rho_ratio > 0.0) || !self.speed.is_finite() {
            return Err(VofError::InvalidConfig("period and density ratio must be positive".into()));
        }
        Ok(())
    }

    pub fn rho(&self) -> [f64; 2] {
        [1.0, self.rho_ratio]
    }
}

/// One row of `timeseries.csv`. The momentum columns hold the quantity the
/// model conserves: merged total momentum (one-velocity) or liquid momentum
/// (two-velocity).
#[derive(Clone, Debug, Serialize)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub kinetic_l: f64,
    pub kinetic_g: f64,
    pub delta_kinetic_l: f64,
    pub delta_kinetic_g: f64,
    pub mass_l: f64,
    pub mass_g: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub cfl_max: f64,
}

/// One row of `errors.csv`: a phase (`liquid`, `gas`) or the `interface`.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub model: String,
    pub flux: String,
    pub cfl: f64,
    pub beta: f64,
    pub phase: String,
    pub l1: f64,
    pub linf: f64,
    pub rel_energy_change: f64,
}

/// Everything a run reports.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: CaseConfig,
    pub mesh: Mesh,
    pub rows: Vec<StepRow>,
    pub errors: Vec<ErrorRow>,
    pub initial: SimState,
    pub last: SimState,
    /// Relative drift of the liquid volume.
    pub mass_drift: f64,
    /// Relative drift of the conserved momentum, per component.
    pub momentum_drift: [f64; 2],
    /// Worst margins of the runtime checks over all steps (`<= 0` is clean).
    /// `alpha_excess` is taken before the update clamps roundoff.
    pub alpha_excess: f64,
    pub outflow_excess: f64,
    pub ctu_excess: f64,
    pub modified_excess: f64,
    pub max_sync_error: f64,
    /// Faces on which the CTU bound was checked, summed over steps.
    pub ctu_checked: usize,
    pub audit_errors: Vec<FluxError>,
    pub audit_steps: usize,
}

impl RunResult {
    pub fn error(&self, phase: &str) -> Option<&ErrorRow> {
        self.errors.iter().find(|e| e.phase == phase)
    }
}

/// Uniform step that keeps every cell CFL number below `cfl` for the
/// strongest velocity the case reaches, and the matching step count to `period`.
pub fn step_size(mesh: &Mesh, config: &CaseConfig) -> (f64, usize) {
    let peak = cases::face_velocity(mesh, config, 0.0);
    let rate = inflow_rates(mesh, &peak).data.iter().fold(0.0f64, |m, v| m.max(*v));
    if let Some(k) = config.steps {
        let dt = if rate > 0.0 { config.cfl / rate * (1.0 - 1e-12) } else { config.period / k as f64 };
        return (dt, k);
    }
    let k = ((config.period * rate / (config.cfl * (1.0 - 1e-12))).ceil() as usize).max(1);
    (config.period / k as f64, k)
}

pub fn initial_state(mesh: &Mesh, config: &CaseConfig) -> Result<SimState, VofError> {
    let alpha = cases::initial_alpha(mesh, config.case);
    let phi = cases::phase_fields(mesh, config.case);
    let rho = config.rho();
    let phi = match config.model {
        Model::OneVelocity => {
            let m = cases::merge_fields(mesh, &alpha, &phi, rho);
            [m.clone(), m]
        }
        Model::TwoVelocity => phi,
    };
    SimState::new(mesh, alpha, phi, rho)
}

fn conserved_momentum(mesh: &Mesh, st: &SimState, model: Model) -> ([f64; 2], f64) {
    match model {
        Model::OneVelocity => {
            let (a, b) = (st.momentum(mesh, LIQUID), st.momentum(mesh, GAS));
            ([a[0] + b[0], a[1] + b[1]], st.momentum_scale(mesh, LIQUID) + st.momentum_scale(mesh, GAS))
        }
        Model::TwoVelocity => (st.momentum(mesh, LIQUID), st.momentum_scale(mesh, LIQUID)),
    }
}

fn row(mesh: &Mesh, st: &SimState, model: Model, dt: f64, cfl_max: f64, e0: [f64; 2]) -> StepRow {
    let (kl, kg) = (st.kinetic_energy(mesh, LIQUID), st.kinetic_energy(mesh, GAS));
    let (mom, _) = conserved_momentum(mesh, st, model);
    let (amin, amax) = st.alpha.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    StepRow {
        step: st.step,
        t: st.t,
        dt,
        kinetic_l: kl,
        kinetic_g: kg,
        delta_kinetic_l: kl - e0[0],
        delta_kinetic_g: kg - e0[1],
        mass_l: st.volume(mesh, LIQUID) * st.rho[LIQUID],
        mass_g: st.volume(mesh, GAS) * st.rho[GAS],
        momentum_x: mom[0],
        momentum_y: mom[1],
        alpha_min: amin,
        alpha_max: amax,
        cfl_max,
    }
}

/// Mass-weighted L1 and thresholded L-infinity error of a phase field
/// against `exact`, with weights `sigma alpha^pi` of `st`.
pub fn phase_errors(mesh: &Mesh, st: &SimState, phase: usize, exact: &FaceField) -> (f64, f64) {
    let sa = st.stag_fraction(mesh, phase);
    let (mut num, mut den, mut linf) = (0.0, 0.0, 0.0f64);
    for axis in Axis::BOTH {
        let k = axis.index();
        let (np, _) = mesh.dims(axis);
        for (f, &s) in sa.comp[k].iter().enumerate() {
            let w = mesh.face_volume(axis, f % (np + 1)) * s;
            let e = (st.phi[phase].comp[k][f] - exact.comp[k][f]).abs();
            num += w * e;
            den += w;
            if s > 1e-9 {
                linf = linf.max(e);
            }
        }
    }
    (if den > 0.0 { num / den } else { 0.0 }, linf)
}

/// `sum |c| |alpha - exact|` and `max |alpha - exact|`.
pub fn interface_errors(mesh: &Mesh, alpha: &CenteredField, exact: &CenteredField) -> (f64, f64) {
    alpha.data.iter().zip(&exact.data).fold((0.0, 0.0f64), |(l1, li), (a, e)| {
        let d = (a - e).abs();
        (l1 + mesh.cell_volume() * d, li.max(d))
    })
}

/// Run `config` to completion, writing CSVs when `config.out` is set.
pub fn run_case(config: &CaseConfig) -> Result<RunResult, VofError> {
    config.validate()?;
    let mesh = Mesh::unit(config.n)?;
    let tcfg = config.transport();
    let mut st = initial_state(&mesh, config)?;
    let initial = st.clone();
    let (dt, nsteps) = step_size(&mesh, config);
    let e0 = [st.kinetic_energy(&mesh, LIQUID), st.kinetic_energy(&mesh, GAS)];
    let (mom0, mom_scale) = conserved_momentum(&mesh, &st, config.model);
    let vol0 = st.volume(&mesh, LIQUID);

    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        output::write_fields(&dir.join("fields_0.csv"), &mesh, &st)?;
    }

    let mut rows = vec![row(&mesh, &st, config.model, 0.0, 0.0, e0)];
    let (mut outflow, mut ctu, mut modified, mut sync) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut alpha_excess = f64::NEG_INFINITY;
    let mut ctu_checked = 0;
    let mut audit_errors = Vec::new();
    let mut audit_steps = 0;
    let mut failure = None;
    for _ in 0..nsteps {
        let ts = match config.sampling {
            TimeSampling::Start => st.t,
            TimeSampling::Midpoint => st.t + 0.5 * dt,
        };
        let u = cases::face_velocity(&mesh, config, ts);
        let adv = match config.model {
            Model::OneVelocity => Advection::One(&u),
            Model::TwoVelocity => Advection::Two { liquid: &u, gas: &u },
        };
        let rep = match step(&mesh, &mut st, adv, dt, &tcfg) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        alpha_excess = alpha_excess.max(rep.alpha_excess);
        outflow = outflow.max(rep.outflow_excess);
        ctu = ctu.max(rep.ctu_excess);
        modified = modified.max(rep.modified_excess);
        sync = sync.max(rep.sync_error);
        ctu_checked += rep.ctu_faces;
        if let Some(a) = rep.audit {
            audit_steps += 1;
            audit_errors.extend(a.errors);
        }
        rows.push(row(&mesh, &st, config.model, dt, rep.cfl_max, e0));
    }

    if let Some(dir) = &config.out {
        output::write_rows(&dir.join("timeseries.csv"), &rows)?;
        if config.checks.audit {
            output::write_rows(&dir.join("audit.csv"), &audit_errors)?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let (mom1, _) = conserved_momentum(&mesh, &st, config.model);
    let exact_phi = cases::phase_fields(&mesh, config.case);
    let mut errors = Vec::new();
    let label = |phase: &str, l1: f64, linf: f64, de: f64| ErrorRow {
        n: config.n,
        model: config.model.name().into(),
        flux: config.method.name().into(),
        cfl: config.cfl,
        beta: config.beta,
        phase: phase.into(),
        l1,
        linf,
        rel_energy_change: de,
    };
    for (phase, name) in [(LIQUID, "liquid"), (GAS, "gas")] {
        let (l1, linf) = phase_errors(&mesh, &st, phase, &exact_phi[phase]);
        let de = if e0[phase] > 0.0 { (st.kinetic_energy(&mesh, phase) - e0[phase]) / e0[phase] } else { 0.0 };
        errors.push(label(name, l1, linf, de));
    }
    let (l1, linf) = interface_errors(&mesh, &st.alpha, &cases::exact_alpha(&mesh, config, st.t));
    errors.push(label("interface", l1, linf, 0.0));

    if let Some(dir) = &config.out {
        output::write_rows(&dir.join("errors.csv"), &errors)?;
        output::write_fields(&dir.join(format!("fields_{}.csv", st.step)), &mesh, &st)?;
    }

    let drift = |a: f64, b: f64, s: f64| if s > 0.0 { (a - b).abs() / s } else { (a - b).abs() };
    Ok(RunResult {
        config: config.clone(),
        mass_drift: drift(st.volume(&mesh, LIQUID), vol0, vol0),
        momentum_drift: [drift(mom1[0], mom0[0], mom_scale), drift(mom1[1], mom0[1], mom_scale)],
        mesh,
        rows,
        errors,
        initial,
        last: st,
        alpha_excess,
        outflow_excess: outflow,
        ctu_excess: ctu,
        modified_excess: modified,
        max_sync_error: sync,
        ctu_checked,
        audit_errors,
        audit_steps,
    })
}

/// Staggered liquid fraction of a state, for field dumps.
pub(crate) fn stag_liquid(mesh: &Mesh, st: &SimState) -> FaceField {
    interp_c2f(mesh, &st.alpha)
}
