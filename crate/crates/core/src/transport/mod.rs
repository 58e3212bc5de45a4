//! One time step of coupled volume-fraction and staggered momentum transport.
//!
//! Order within a step: reconstruct the interface, build donating regions,
//! update the volume fraction, form the staggered fractions at the new time
//! level, then transport momentum with the modified flux interpolant.

pub mod interpolant;
pub mod projection;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::donating::{
    audit_fluxing_errors, build_dr_memfpa, build_dr_plain, cell_cfl, partial_fluxes, AuditReport, CflInfo,
    PartialFluxes,
};
use crate::mesh::{
    div, interp_c2f, interp_f2g, stag_div, stag_neighbors, stag_spacing, Axis, CenteredField, FaceField,
    Mesh, StagFaceField,
};
use crate::plic::{reconstruct_normals, PlicOptions, EPS_ALPHA};
use crate::VofError;

pub use interpolant::{flux_interpolant, limiter, theta_interpolants, FluxMethod, StagFace, Thetas};
pub use projection::{extrapolate_faces, project_liquid_velocity, Projection};

pub const LIQUID: usize = 0;
pub const GAS: usize = 1;

/// Slack of every runtime invariant check.
pub const CHECK_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "one")]
    OneVelocity,
    #[serde(rename = "two")]
    TwoVelocity,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::OneVelocity => "one",
            Model::TwoVelocity => "two",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" => Ok(Model::OneVelocity),
            "two" => Ok(Model::TwoVelocity),
            _ => Err(format!("unknown model '{s}' (expected one or two)")),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional runtime checks that abort the step when violated. Boundedness,
/// bounded outflow and the staggered mass sync are always enforced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Checks {
    /// Update bounded by the spread of neighbouring values on CTU faces.
    pub ctu_bound: bool,
    /// Update bounded by `2 C_kappa / beta` times the interpolant spread on
    /// faces with `sigma alpha >= beta`.
    pub modified_bound: bool,
    /// Fluxing-error audit of the liquid donating regions.
    pub audit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    pub method: FluxMethod,
    /// Switch to CTU where the staggered fraction at the new level drops below `beta`.
    pub beta: f64,
    /// CFL limit `C_kappa`.
    pub cfl: f64,
    pub plic: PlicOptions,
    pub checks: Checks,
    /// Two-velocity only: build the gas donating regions with the volume
    /// correction. Without it the gas mass fluxes carry an `O(dt)` relative
    /// error from the straight back-traced corners.
    pub enforce_gas_volume: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            method: FluxMethod::LaxWendroff,
            beta: 0.5,
            cfl: 0.75,
            plic: PlicOptions::default(),
            checks: Checks::default(),
            enforce_gas_volume: true,
        }
    }
}

impl TransportConfig {
    /// `beta` as used by the switch: forced CTU behaves as `beta = +inf`.
    pub fn effective_beta(&self) -> f64 {
        if self.method == FluxMethod::Ctu {
            f64::INFINITY
        } else {
            self.beta
        }
    }

    pub fn validate(&self) -> Result<(), VofError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(VofError::InvalidConfig(format!("CFL limit {} outside (0, 1]", self.cfl)));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(VofError::InvalidConfig(format!("beta {} must be non-negative", self.beta)));
        }
        Ok(())
    }
}

/// Advecting velocities for one step.
#[derive(Clone, Copy, Debug)]
pub enum Advection<'a> {
    One(&'a FaceField),
    Two { liquid: &'a FaceField, gas: &'a FaceField },
}

impl Advection<'_> {
    pub fn model(&self) -> Model {
        match self {
            Advection::One(_) => Model::OneVelocity,
            Advection::Two { .. } => Model::TwoVelocity,
        }
    }
}

/// Liquid volume fraction plus the per-phase staggered transported quantity.
/// Staggered masses are `rho^pi I alpha^pi`, recomputed from `alpha` when
/// needed. In the one-velocity model both entries of `phi` hold the merged field.
#[derive(Clone, Debug)]
pub struct SimState {
    pub alpha: CenteredField,
    pub phi: [FaceField; 2],
    pub rho: [f64; 2],
    pub t: f64,
    pub step: usize,
}

impl SimState {
    pub fn new(mesh: &Mesh, alpha: CenteredField, phi: [FaceField; 2], rho: [f64; 2]) -> Result<Self, VofError> {
        if alpha.data.len() != mesh.n_cells() {
            return Err(VofError::InvalidConfig("volume fraction size does not match mesh".into()));
        }
        if alpha.data.iter().any(|a| !(-CHECK_SLACK..=1.0 + CHECK_SLACK).contains(a)) {
            return Err(VofError::InvalidConfig("volume fraction outside [0, 1]".into()));
        }
        if rho.iter().any(|r| !(*r > 0.0)) {
            return Err(VofError::InvalidConfig("densities must be positive".into()));
        }
        Ok(Self { alpha, phi, rho, t: 0.0, step: 0 })
    }

    /// Centred fraction of `phase`.
    pub fn fraction(&self, phase: usize) -> CenteredField {
        if phase == LIQUID {
            self.alpha.clone()
        } else {
            CenteredField { data: self.alpha.data.iter().map(|a| 1.0 - a).collect() }
        }
    }

    /// Staggered fraction `sigma alpha^pi = I alpha^pi`.
    pub fn stag_fraction(&self, mesh: &Mesh, phase: usize) -> FaceField {
        interp_c2f(mesh, &self.fraction(phase))
    }

    /// `1/2 sum_f |omega_f| sigma alpha rho phi^2`.
    pub fn kinetic_energy(&self, mesh: &Mesh, phase: usize) -> f64 {
        let sa = self.stag_fraction(mesh, phase);
        0.5 * self.rho[phase] * weighted_sum(mesh, |axis, f, p| sa.comp[axis.index()][f] * self.phi[phase].comp[axis.index()][f].powi(2) * mesh.face_volume(axis, p))
    }

    /// `sum_f |omega_f| sigma alpha rho phi` per face family.
    pub fn momentum(&self, mesh: &Mesh, phase: usize) -> [f64; 2] {
        let sa = self.stag_fraction(mesh, phase);
        Axis::BOTH.map(|axis| {
            let k = axis.index();
            let (np, _) = mesh.dims(axis);
            sa.comp[k]
                .iter()
                .zip(&self.phi[phase].comp[k])
                .enumerate()
                .map(|(f, (s, v))| mesh.face_volume(axis, f % (np + 1)) * s * v)
                .sum::<f64>()
                * self.rho[phase]
        })
    }

    /// `sum_f |omega_f| sigma alpha rho |phi|`, the scale momentum drift is measured against.
    pub fn momentum_scale(&self, mesh: &Mesh, phase: usize) -> f64 {
        let sa = self.stag_fraction(mesh, phase);
        self.rho[phase] * weighted_sum(mesh, |axis, f, p| sa.comp[axis.index()][f] * self.phi[phase].comp[axis.index()][f].abs() * mesh.face_volume(axis, p))
    }

    /// `sum_c |c| alpha^pi`.
    pub fn volume(&self, mesh: &Mesh, phase: usize) -> f64 {
        self.fraction(phase).integral(mesh)
    }
}

fn weighted_sum(mesh: &Mesh, mut f: impl FnMut(Axis, usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        for q in 0..nq {
            for p in 0..=np {
                s += f(axis, mesh.face_index(axis, p, q), p);
            }
        }
    }
    s
}

/// Cell and staggered CFL numbers of a velocity field.
#[derive(Clone, Debug)]
pub struct Cfl {
    pub cell: CflInfo,
    /// `kappa_g = dt |(J u)_g| / h~_g`.
    pub stag: StagFaceField,
    pub stag_max: f64,
}

pub fn compute_cfl(mesh: &Mesh, u: &FaceField, dt: f64) -> Cfl {
    let cell = cell_cfl(mesh, u, dt);
    let mut stag = interp_f2g(mesh, u);
    let mut stag_max = 0.0f64;
    for (corner, fam) in [(false, &mut stag.center), (true, &mut stag.corner)] {
        for axis in Axis::BOTH {
            let h = stag_spacing(mesh, axis, corner);
            for v in fam[axis.index()].iter_mut() {
                *v = dt * v.abs() / h;
                stag_max = stag_max.max(*v);
            }
        }
    }
    Cfl { cell, stag, stag_max }
}

/// Result of the volume-fraction stage, consumed by the momentum stage.
#[derive(Clone, Debug)]
pub struct VofStage {
    pub dt: f64,
    /// Advecting velocity per phase (the projected one for two-velocity liquid).
    pub velocity: [FaceField; 2],
    /// Phase partial fluxes `ῡ^pi_{f,b}`.
    pub partial: [PartialFluxes; 2],
    /// Staggered fractions at `t^n`.
    pub stag_old: [FaceField; 2],
    /// Flux-consistent staggered fractions `I alpha^pi - dt D~ J ῡ^pi`.
    pub stag_new: [FaceField; 2],
    /// Unclamped liquid fraction after the update.
    pub alpha_new: CenteredField,
    /// Largest `max(-alpha, alpha - 1)` of `alpha_new`.
    pub alpha_excess: f64,
    pub cfl_max: f64,
    pub outflow_excess: f64,
    pub sync_error: f64,
    pub projection_iterations: usize,
    pub audit: Option<AuditReport>,
    pub spilled: usize,
    pub degenerate: usize,
}

/// Largest `V^{-,pi}_c - alpha^{pi,n}_c`, where `V^-` sums per donor cell
/// the outgoing part of `-sum_f o_{c,f} |f| ῡ_{f,b} dt / |c|`.
pub fn outflow_excess(mesh: &Mesh, partial: &PartialFluxes, frac: &CenteredField, dt: f64) -> (f64, usize) {
    let mut worst = (f64::NEG_INFINITY, 0);
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let mut per_donor: SmallVec<[(usize, f64); 16]> = SmallVec::new();
            // (axis, face p, face q, o_{c,f}) in frame coordinates.
            let faces = [(Axis::X, i, j, -1.0), (Axis::X, i + 1, j, 1.0), (Axis::Y, j, i, -1.0), (Axis::Y, j + 1, i, 1.0)];
            for (axis, p, q, o) in faces {
                if mesh.is_wall_face(axis, p) {
                    continue;
                }
                let len = mesh.face_len(axis);
                let block = &partial.blocks[axis.index()][mesh.face_index(axis, p, q)];
                for s in 0..2 {
                    for r in -1isize..=1 {
                        let v = block[3 * s + (r + 1) as usize];
                        if v == 0.0 {
                            continue;
                        }
                        let Some(b) = mesh.frame_cell_checked(axis, p as isize - 1 + s as isize, q as isize + r) else {
                            continue;
                        };
                        let contrib = -o * len * v;
                        match per_donor.iter_mut().find(|e| e.0 == b) {
                            Some(e) => e.1 += contrib,
                            None => per_donor.push((b, contrib)),
                        }
                    }
                }
            }
            let c = mesh.cell_index(i, j);
            let vminus = -dt / mesh.cell_volume() * per_donor.iter().map(|e| e.1.min(0.0)).sum::<f64>();
            let excess = vminus - frac.data[c];
            if excess > worst.0 {
                worst = (excess, c);
            }
        }
    }
    worst
}

fn cell_label(mesh: &Mesh, c: usize) -> String {
    let (i, j) = mesh.cell_ij(c);
    format!("cell ({i}, {j})")
}

/// Volume-fraction stage: PLIC, donating regions, phase fluxes, the centred
/// update and the staggered fractions at the new level. Enforces the CFL
/// limit, bounded outflow per phase, boundedness and the staggered sync.
pub fn advect_vof(mesh: &Mesh, state: &SimState, adv: Advection, dt: f64, cfg: &TransportConfig) -> Result<VofStage, VofError> {
    let step = state.step;
    let plic = reconstruct_normals(mesh, &state.alpha, cfg.plic);
    let (vel_l, vel_g, projection_iterations) = match adv {
        Advection::One(u) => (u.clone(), u.clone(), 0),
        Advection::Two { liquid, gas } => {
            let pr = project_liquid_velocity(mesh, liquid, &state.alpha)?;
            (pr.velocity, gas.clone(), pr.iterations)
        }
    };
    let mut cfl_max = 0.0f64;
    for u in [&vel_l, &vel_g] {
        let c = cell_cfl(mesh, u, dt);
        cfl_max = cfl_max.max(c.max);
    }
    if cfl_max > cfg.cfl * (1.0 + 1e-12) {
        return Err(VofError::Cfl { step, kappa: cfl_max, limit: cfg.cfl });
    }

    let drs_l = build_dr_memfpa(mesh, &vel_l, dt);
    let audit = cfg.checks.audit.then(|| audit_fluxing_errors(mesh, &drs_l, step));
    if let Some(err) = audit.as_ref().and_then(|a| a.errors.first()) {
        return Err(VofError::Invariant {
            step,
            what: "fluxing-error audit",
            location: format!("{}-face ({}, {}): {:?}", err.face_axis, err.face_i, err.face_j, err.error),
            excess: err.magnitude,
        });
    }
    let (liq, tot_l) = partial_fluxes(mesh, &plic, &drs_l);
    let mut degenerate = drs_l.n_degenerate();
    let mut spilled = liq.spilled.max(tot_l.spilled);
    let gas = match adv {
        Advection::One(_) => tot_l.minus(&liq),
        Advection::Two { .. } => {
            let drs_g = if cfg.enforce_gas_volume { build_dr_memfpa(mesh, &vel_g, dt) } else { build_dr_plain(mesh, &vel_g, dt) };
            degenerate += drs_g.n_degenerate();
            let (lg, tg) = partial_fluxes(mesh, &plic, &drs_g);
            spilled = spilled.max(tg.spilled);
            tg.minus(&lg)
        }
    };
    let partial = [liq, gas];

    let frac_old = [state.fraction(LIQUID), state.fraction(GAS)];
    let mut outflow = f64::NEG_INFINITY;
    for (phase, name) in [(LIQUID, "bounded outflow (liquid)"), (GAS, "bounded outflow (gas)")] {
        let (excess, c) = outflow_excess(mesh, &partial[phase], &frac_old[phase], dt);
        if excess > CHECK_SLACK {
            return Err(VofError::Invariant { step, what: name, location: cell_label(mesh, c), excess });
        }
        outflow = outflow.max(excess);
    }

    let flux_l = partial[LIQUID].totals();
    let d = div(mesh, &flux_l);
    let alpha_new = CenteredField { data: state.alpha.data.iter().zip(&d.data).map(|(a, dv)| a - dt * dv).collect() };
    let mut alpha_excess = f64::NEG_INFINITY;
    for (c, &a) in alpha_new.data.iter().enumerate() {
        if !a.is_finite() {
            return Err(VofError::NonFinite { step, what: "volume fraction" });
        }
        let excess = (-a).max(a - 1.0);
        alpha_excess = alpha_excess.max(excess);
        if excess > CHECK_SLACK {
            return Err(VofError::Invariant { step, what: "volume fraction bounds", location: cell_label(mesh, c), excess });
        }
    }

    let stag_old = [interp_c2f(mesh, &frac_old[LIQUID]), interp_c2f(mesh, &frac_old[GAS])];
    let stag_new = [LIQUID, GAS].map(|phase| {
        let dd = stag_div(mesh, &interp_f2g(mesh, &partial[phase].totals()));
        FaceField {
            comp: [0, 1].map(|k| stag_old[phase].comp[k].iter().zip(&dd.comp[k]).map(|(s, v)| s - dt * v).collect()),
        }
    });
    let synced = interp_c2f(mesh, &alpha_new);
    let sync_error = stag_new[LIQUID]
        .comp
        .iter()
        .flatten()
        .zip(synced.comp.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if sync_error > 1e-13 {
        return Err(VofError::Invariant { step, what: "staggered mass sync", location: "liquid".into(), excess: sync_error });
    }

    Ok(VofStage {
        dt,
        velocity: [vel_l, vel_g],
        partial,
        stag_old,
        stag_new,
        alpha_new,
        alpha_excess,
        cfl_max,
        outflow_excess: outflow,
        sync_error,
        projection_iterations,
        audit,
        spilled,
        degenerate,
    })
}

/// Corner-transport-upwind flux numerator `sum_k ῡ~_{g,k} phi_k`.
pub fn ctu_flux(mesh: &Mesh, partial: &PartialFluxes, phi: &FaceField, g: StagFace) -> f64 {
    interpolant::ctu_weights(mesh, partial, g).iter().map(|&(p, q, w)| w * phi.get(mesh, g.axis, p, q)).sum()
}

/// Per staggered face: mass flux `rho (J ῡ)_g`, the face value of the chosen
/// interpolant, and whether CTU replaced it. CTU faces keep `sum_k w_k phi_k`
/// in `theta` and `sum_k w_k` in `weight`.
#[derive(Clone, Copy, Debug, Default)]
struct GFlux {
    mass: f64,
    theta: f64,
    weight: f64,
    ctu: bool,
}

struct GTable {
    center: [Vec<GFlux>; 2],
    corner: [Vec<GFlux>; 2],
}

impl GTable {
    fn get(&self, mesh: &Mesh, g: StagFace) -> GFlux {
        let np = mesh.cells_along(g.axis);
        if g.corner {
            self.corner[g.axis.index()][g.q * (np + 1) + g.p]
        } else {
            self.center[g.axis.index()][g.q * np + g.p]
        }
    }
}

/// Modified interpolant: CTU where `min_{F^omega(g)} sigma alpha^{n+1} < beta`,
/// the chosen method elsewhere.
fn modified_flux(
    mesh: &Mesh,
    view: &interpolant::PhaseView,
    partial: &PartialFluxes,
    stag_new: &FaceField,
    rho: f64,
    dt: f64,
    cfg: &TransportConfig,
) -> GTable {
    let beta = cfg.effective_beta();
    let jflux = interp_f2g(mesh, &partial.totals());
    let one = |g: StagFace, jv: f64| -> GFlux {
        let (lo, hi) = stag_neighbors(mesh, g.axis, g.corner, g.p, g.q);
        let frac = |f: Option<(usize, usize)>| f.map_or(f64::INFINITY, |(p, q)| stag_new.get(mesh, g.axis, p, q));
        let ctu = frac(lo).min(frac(hi)) < beta;
        let mass = rho * jv;
        if ctu {
            let w = interpolant::ctu_weights(mesh, partial, g);
            let theta = w.iter().map(|&(kp, kq, wt)| wt * view.phi.get(mesh, g.axis, kp, kq)).sum();
            return GFlux { mass, theta, weight: w.iter().map(|e| e.2).sum(), ctu };
        }
        if mass == 0.0 {
            return GFlux { mass, theta: 0.0, weight: 0.0, ctu };
        }
        let (un, ut) = interpolant::stag_velocity(mesh, view, g);
        let theta = match theta_interpolants(mesh, view, g, un, ut, dt) {
            Some(th) => flux_interpolant(cfg.method, th, interpolant::stag_courant(mesh, g, un, dt)),
            None => 0.0,
        };
        GFlux { mass, theta, weight: 0.0, ctu }
    };
    let mut center = [Vec::new(), Vec::new()];
    let mut corner = [Vec::new(), Vec::new()];
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        let k = axis.index();
        center[k] = (0..nq * np)
            .map(|idx| one(StagFace { axis, corner: false, p: idx % np, q: idx / np }, jflux.center[k][idx]))
            .collect();
        corner[k] = (0..(nq + 1) * (np + 1))
            .map(|idx| one(StagFace { axis, corner: true, p: idx % (np + 1), q: idx / (np + 1) }, jflux.corner[k][idx]))
            .collect();
    }
    GTable { center, corner }
}

/// Outcome of the momentum stage for one phase.
#[derive(Clone, Debug)]
pub struct PhaseMomentum {
    /// `N_f = (1/|omega_f|) sum_g o~ |g| (F_g - phi_f m~_g)`, so that
    /// `M^{n+1} (phi^{n+1} - phi^n) = -dt N`.
    pub residual: FaceField,
    pub ctu_faces: usize,
    /// Largest `|Δphi| - bound` over faces with `sigma alpha^{n+1} < beta`.
    pub ctu_excess: f64,
    /// Largest `|Δphi| - (2 C_kappa/beta) max_g |Θ_g - phi_f|` over faces with `sigma alpha^{n+1} >= beta`.
    pub modified_excess: f64,
    /// The same margins weighted by `sigma alpha^{n+1}`. A face that has
    /// almost drained divides roundoff in its phase volume by a tiny
    /// fraction, so the runtime checks compare these against the slack.
    pub ctu_mass_excess: f64,
    pub modified_mass_excess: f64,
}

fn phase_momentum(
    mesh: &Mesh,
    state: &SimState,
    vof: &VofStage,
    phase: usize,
    present: &[Vec<bool>; 2],
    cfg: &TransportConfig,
) -> PhaseMomentum {
    let phi = &state.phi[phase];
    let rho = state.rho[phase];
    let dt = vof.dt;
    let view = interpolant::PhaseView::new(mesh, phi, present, &vof.velocity[phase]);
    let partial = &vof.partial[phase];
    let table = modified_flux(mesh, &view, partial, &vof.stag_new[phase], rho, dt, cfg);
    let beta = cfg.effective_beta();
    let mut residual = FaceField::zeros(mesh);
    let mut ctu_faces = 0;
    let mut ctu_excess = f64::NEG_INFINITY;
    let mut modified_excess = f64::NEG_INFINITY;
    let (mut ctu_mass_excess, mut modified_mass_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        let k = axis.index();
        for q in 0..nq {
            for p in 0..=np {
                let f = mesh.face_index(axis, p, q);
                let pf = phi.comp[k][f];
                let mut gs: SmallVec<[(StagFace, f64, f64); 4]> = SmallVec::new();
                let hc = mesh.center_len(axis);
                let hk = mesh.corner_len(axis, p);
                if p > 0 {
                    gs.push((StagFace { axis, corner: false, p: p - 1, q }, -1.0, hc));
                }
                if p < np {
                    gs.push((StagFace { axis, corner: false, p, q }, 1.0, hc));
                }
                gs.push((StagFace { axis, corner: true, p, q }, -1.0, hk));
                gs.push((StagFace { axis, corner: true, p, q: q + 1 }, 1.0, hk));
                let mut n = 0.0;
                let mut spread = 0.0f64;
                for &(g, o, len) in &gs {
                    let gf = table.get(mesh, g);
                    let (contrib, eff) = if gf.ctu {
                        let c = gf.theta - pf * gf.weight;
                        (rho * c, if gf.weight != 0.0 { c / gf.weight } else { 0.0 })
                    } else {
                        (gf.mass * (gf.theta - pf), gf.theta - pf)
                    };
                    if gf.mass != 0.0 {
                        spread = spread.max(eff.abs());
                    }
                    n += o * len * contrib;
                }
                let vol = mesh.face_volume(axis, p);
                n /= vol;
                residual.comp[k][f] = n;

                let sa = vof.stag_new[phase].comp[k][f];
                if sa <= EPS_ALPHA {
                    continue;
                }
                let dphi = (dt * n / (rho * sa)).abs();
                if sa < beta {
                    ctu_faces += 1;
                    let mut bound = 0.0f64;
                    for dq in -1isize..=1 {
                        for dp in -1isize..=1 {
                            let (pp, qq) = (p as isize + dp, q as isize + dq);
                            if pp >= 0 && qq >= 0 && pp as usize <= np && (qq as usize) < nq {
                                bound = bound.max((phi.get(mesh, axis, pp as usize, qq as usize) - pf).abs());
                            }
                        }
                    }
                    ctu_excess = ctu_excess.max(dphi - bound);
                    ctu_mass_excess = ctu_mass_excess.max(sa * (dphi - bound));
                } else {
                    let bound = 2.0 * cfg.cfl / beta * spread;
                    modified_excess = modified_excess.max(dphi - bound);
                    modified_mass_excess = modified_mass_excess.max(sa * (dphi - bound));
                }
            }
        }
    }
    PhaseMomentum { residual, ctu_faces, ctu_excess, modified_excess, ctu_mass_excess, modified_mass_excess }
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub dt: f64,
    pub cfl_max: f64,
    pub alpha_excess: f64,
    pub outflow_excess: f64,
    pub sync_error: f64,
    pub ctu_faces: usize,
    pub ctu_excess: f64,
    pub modified_excess: f64,
    pub projection_iterations: usize,
    pub audit: Option<AuditReport>,
    pub spilled: usize,
    pub degenerate: usize,
}

/// Momentum stage: per-phase staggered fluxes with the modified interpolant,
/// then the one-velocity merge or the two-velocity per-phase division with
/// extrapolation into faces that hold no phase.
pub fn advect_momentum(
    mesh: &Mesh,
    state: &SimState,
    vof: &VofStage,
    cfg: &TransportConfig,
    model: Model,
) -> Result<([FaceField; 2], [PhaseMomentum; 2]), VofError> {
    let step = state.step;
    let dt = vof.dt;
    let all = Axis::BOTH.map(|a| vec![true; mesh.face_count(a)]);
    let present = |phase: usize| match model {
        Model::OneVelocity => all.clone(),
        Model::TwoVelocity => [0, 1].map(|k| vof.stag_old[phase].comp[k].iter().map(|&s| s > EPS_ALPHA).collect()),
    };
    let moms = [LIQUID, GAS].map(|phase| phase_momentum(mesh, state, vof, phase, &present(phase), cfg));
    for m in &moms {
        if cfg.checks.ctu_bound && m.ctu_mass_excess > CHECK_SLACK {
            return Err(VofError::Invariant { step, what: "CTU update bound", location: "staggered faces".into(), excess: m.ctu_mass_excess });
        }
        if cfg.checks.modified_bound && m.modified_mass_excess > CHECK_SLACK {
            return Err(VofError::Invariant { step, what: "modified-interpolant update bound", location: "staggered faces".into(), excess: m.modified_mass_excess });
        }
    }

    let new_phi = match model {
        Model::OneVelocity => {
            let (rl, rg) = (state.rho[LIQUID], state.rho[GAS]);
            let u = FaceField {
                comp: [0, 1].map(|k| {
                    (0..state.phi[LIQUID].comp[k].len())
                        .map(|f| {
                            let mass = rl * vof.stag_new[LIQUID].comp[k][f] + rg * vof.stag_new[GAS].comp[k][f];
                            let n = moms[LIQUID].residual.comp[k][f] + moms[GAS].residual.comp[k][f];
                            state.phi[LIQUID].comp[k][f] - dt * n / mass
                        })
                        .collect()
                }),
            };
            [u.clone(), u]
        }
        Model::TwoVelocity => [LIQUID, GAS].map(|phase| {
            let rho = state.rho[phase];
            let mut phi = state.phi[phase].clone();
            let mut defined = [Vec::new(), Vec::new()];
            for k in 0..2 {
                defined[k] = vof.stag_new[phase].comp[k].iter().map(|&s| s > EPS_ALPHA).collect();
                for (f, v) in phi.comp[k].iter_mut().enumerate() {
                    let sa = vof.stag_new[phase].comp[k][f];
                    if sa > EPS_ALPHA {
                        *v -= dt * moms[phase].residual.comp[k][f] / (rho * sa);
                    }
                }
            }
            extrapolate_faces(mesh, &mut phi, &defined);
            phi
        }),
    };
    if new_phi.iter().any(|p| p.comp.iter().flatten().any(|v| !v.is_finite())) {
        return Err(VofError::NonFinite { step, what: "staggered velocity" });
    }
    Ok((new_phi, moms))
}

/// Advance `state` by `dt`. On error the state is left untouched.
pub fn step(mesh: &Mesh, state: &mut SimState, adv: Advection, dt: f64, cfg: &TransportConfig) -> Result<StepReport, VofError> {
    let vof = advect_vof(mesh, state, adv, dt, cfg)?;
    let (phi, moms) = advect_momentum(mesh, state, &vof, cfg, adv.model())?;
    let report = StepReport {
        step: state.step,
        dt,
        cfl_max: vof.cfl_max,
        alpha_excess: vof.alpha_excess,
        outflow_excess: vof.outflow_excess,
        sync_error: vof.sync_error,
        ctu_faces: moms.iter().map(|m| m.ctu_faces).sum(),
        ctu_excess: moms[0].ctu_excess.max(moms[1].ctu_excess),
        modified_excess: moms[0].modified_excess.max(moms[1].modified_excess),
        projection_iterations: vof.projection_iterations,
        audit: vof.audit,
        spilled: vof.spilled,
        degenerate: vof.degenerate,
    };
    state.alpha = CenteredField {
        data: vof.alpha_new.data.iter().map(|&a| if a < EPS_ALPHA { 0.0 } else { a.min(1.0) }).collect(),
    };
    state.phi = phi;
    state.t += dt;
    state.step += 1;
    Ok(report)
}
