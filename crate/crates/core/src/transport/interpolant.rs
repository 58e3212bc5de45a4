//! Flux interpolants for staggered quantities: the upwind-biased family
//! built from the three values `theta_0, theta_1, theta_2` along the
//! characteristic through each staggered face, and the corner-transport-upwind
//! weights built from interpolated partial fluxes.

use serde::{Deserialize, Serialize};

use crate::donating::{vertex_velocities, PartialFluxes};
use crate::geom::Vec2;
use crate::mesh::{f2g_at, stag_spacing, Axis, FaceField, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxMethod {
    #[serde(rename = "lw")]
    LaxWendroff,
    Fromm,
    Mc,
    Upwind,
    Ctu,
}

impl FluxMethod {
    pub const LIMITED: [FluxMethod; 4] = [FluxMethod::LaxWendroff, FluxMethod::Fromm, FluxMethod::Mc, FluxMethod::Upwind];

    pub fn name(self) -> &'static str {
        match self {
            FluxMethod::LaxWendroff => "lw",
            FluxMethod::Fromm => "fromm",
            FluxMethod::Mc => "mc",
            FluxMethod::Upwind => "upwind",
            FluxMethod::Ctu => "ctu",
        }
    }
}

impl std::str::FromStr for FluxMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lw" | "lax-wendroff" => Ok(FluxMethod::LaxWendroff),
            "fromm" => Ok(FluxMethod::Fromm),
            "mc" => Ok(FluxMethod::Mc),
            "upwind" => Ok(FluxMethod::Upwind),
            "ctu" => Ok(FluxMethod::Ctu),
            _ => Err(format!("unknown flux method '{s}'")),
        }
    }
}

impl std::fmt::Display for FluxMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Slope-ratio limiter `Psi(iota)`.
pub fn limiter(method: FluxMethod, iota: f64) -> f64 {
    match method {
        FluxMethod::LaxWendroff => 1.0,
        FluxMethod::Fromm => 0.5 * (1.0 + iota),
        FluxMethod::Mc => (0.5 * (1.0 + iota)).min(2.0).min(2.0 * iota).max(0.0),
        FluxMethod::Upwind | FluxMethod::Ctu => 0.0,
    }
}

/// Values along the characteristic line through a staggered face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thetas {
    /// Downwind face value.
    pub theta0: f64,
    /// First upwind plane.
    pub theta1: f64,
    /// Second upwind plane, if its stencil is usable.
    pub theta2: Option<f64>,
    /// `|x_0 - x_1| / |x_1 - x_2|` along the line.
    pub ratio: f64,
}

/// Face value `theta_1 + 1/2 (1 - kappa) Psi(iota) (theta_0 - theta_1)`.
///
/// Written in product form so a vanishing `theta_0 - theta_1` never divides:
/// `Psi(iota) a` with `a = theta_0 - theta_1`, `b = ratio (theta_1 - theta_2)`.
/// Fromm and MC fall back to upwind when `theta_2` is missing.
pub fn flux_interpolant(method: FluxMethod, th: Thetas, kappa: f64) -> f64 {
    let a = th.theta0 - th.theta1;
    let corr = match method {
        FluxMethod::LaxWendroff => a,
        FluxMethod::Upwind | FluxMethod::Ctu => 0.0,
        FluxMethod::Fromm => th.theta2.map_or(0.0, |t2| 0.5 * (a + th.ratio * (th.theta1 - t2))),
        FluxMethod::Mc => th.theta2.map_or(0.0, |t2| {
            let b = th.ratio * (th.theta1 - t2);
            if a * b <= 0.0 {
                0.0
            } else {
                a.signum() * (0.5 * (a + b).abs()).min(2.0 * a.abs()).min(2.0 * b.abs())
            }
        }),
    };
    th.theta1 + 0.5 * (1.0 - kappa) * corr
}

/// A staggered face: family `axis`, centre or corner, frame position `(p, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StagFace {
    pub axis: Axis,
    pub corner: bool,
    pub p: usize,
    pub q: usize,
}

/// Phase data the interpolants read.
pub struct PhaseView<'a> {
    pub phi: &'a FaceField,
    /// Faces whose staggered volume holds the phase at `t^n`.
    pub present: &'a [Vec<bool>; 2],
    /// Advecting velocity of the phase.
    pub velocity: &'a FaceField,
    pub vertex_velocity: Vec<Vec2>,
}

impl<'a> PhaseView<'a> {
    pub fn new(mesh: &Mesh, phi: &'a FaceField, present: &'a [Vec<bool>; 2], velocity: &'a FaceField) -> Self {
        Self { phi, present, velocity, vertex_velocity: vertex_velocities(mesh, velocity) }
    }
}

/// Normal and tangential advecting velocity at a staggered face.
pub fn stag_velocity(mesh: &Mesh, view: &PhaseView, g: StagFace) -> (f64, f64) {
    let (a, b) = (g.axis, g.axis.other());
    let u = view.velocity;
    if g.corner {
        let un = f2g_at(mesh, u, a, true, g.p, g.q);
        let (i, j) = match a {
            Axis::X => (g.p, g.q),
            Axis::Y => (g.q, g.p),
        };
        let ut = a.of(view.vertex_velocity[mesh.vertex_index(i, j)]);
        (un, ut)
    } else {
        let un = f2g_at(mesh, u, a, false, g.p, g.q);
        let ut = 0.5 * (u.get(mesh, b, g.q, g.p) + u.get(mesh, b, g.q + 1, g.p));
        (un, ut)
    }
}

/// Courant number `dt |u_n| / h~_g` of a staggered face.
pub fn stag_courant(mesh: &Mesh, g: StagFace, un: f64, dt: f64) -> f64 {
    dt * un.abs() / stag_spacing(mesh, g.axis, g.corner)
}

/// Build `theta_0, theta_1, theta_2` for staggered face `g`: the line from the
/// downwind face node through `x_g - dt/2 u_g` is intersected with the two
/// upwind planes of faces, where values are interpolated linearly.
/// Returns `None` when there is no upwind plane (zero flux on walls).
pub fn theta_interpolants(mesh: &Mesh, view: &PhaseView, g: StagFace, un: f64, ut: f64, dt: f64) -> Option<Thetas> {
    let a = g.axis;
    let (np, nq) = mesh.dims(a);
    let (ha, hb) = (mesh.h(a), mesh.h(a.other()));
    let get = |p: usize, q: usize| view.phi.get(mesh, a, p, q);
    let has = |p: usize, q: usize| view.present[a.index()][mesh.face_index(a, p, q)];
    let sigma: isize = if un >= 0.0 { 1 } else { -1 };

    // In the local frame: `n` runs along the staggered-face normal, `l`
    // along the planes. Planes are indexed by `k` and hold faces at lateral
    // positions `start + idx * step`, `idx < len`.
    struct Line {
        x0: (f64, f64),
        c: (f64, f64),
        planes: [Option<(f64, usize)>; 2],
        start: f64,
        step: f64,
        len: usize,
    }
    let (line, theta0) = if g.corner {
        // Normal along b; planes are rows of a-faces.
        let down = if sigma > 0 { g.q as isize } else { g.q as isize - 1 };
        if down < 0 || down as usize >= nq {
            return None;
        }
        let down = down as usize;
        let plane = |k: isize| {
            let row = down as isize - sigma * k;
            (row >= 0 && (row as usize) < nq).then_some(((row as f64 + 0.5) * hb, row as usize))
        };
        let gn = g.q as f64 * hb;
        let gl = g.p as f64 * ha;
        let line = Line {
            x0: ((down as f64 + 0.5) * hb, gl),
            c: (gn - 0.5 * dt * un, gl - 0.5 * dt * ut),
            planes: [plane(1), plane(2)],
            start: 0.0,
            step: ha,
            len: np + 1,
        };
        (line, get(g.p, down))
    } else {
        // Normal along a; planes are columns of a-faces.
        let down = if sigma > 0 { g.p + 1 } else { g.p };
        let plane = |k: isize| {
            let col = down as isize - sigma * k;
            (col >= 0 && col as usize <= np).then_some((col as f64 * ha, col as usize))
        };
        let gn = (g.p as f64 + 0.5) * ha;
        let gl = (g.q as f64 + 0.5) * hb;
        let line = Line {
            x0: (down as f64 * ha, gl),
            c: (gn - 0.5 * dt * un, gl - 0.5 * dt * ut),
            planes: [plane(1), plane(2)],
            start: 0.5 * hb,
            step: hb,
            len: nq,
        };
        (line, get(down, g.q))
    };

    let fetch = |plane_idx: usize, idx: usize| -> (f64, bool) {
        if g.corner {
            (get(idx, plane_idx), has(idx, plane_idx))
        } else {
            (get(plane_idx, idx), has(plane_idx, idx))
        }
    };
    let slope = (line.c.1 - line.x0.1) / (line.c.0 - line.x0.0);
    let sample = |pl: Option<(f64, usize)>| {
        let (n, idx) = pl?;
        let l = line.x0.1 + slope * (n - line.x0.0);
        let s = ((l - line.start) / line.step).clamp(0.0, (line.len - 1) as f64);
        let i0 = (s.floor() as usize).min(line.len.saturating_sub(2));
        let w = s - i0 as f64;
        let (v0, p0) = fetch(idx, i0);
        let (v1, p1) = if line.len > 1 { fetch(idx, i0 + 1) } else { (v0, p0) };
        let ok = (w >= 1.0 || p0) && (w <= 0.0 || p1);
        Some(((1.0 - w) * v0 + w * v1, ok, Vec2::new(n, l)))
    };
    let (theta1, _, x1) = sample(line.planes[0])?;
    let x0 = Vec2::new(line.x0.0, line.x0.1);
    let (theta2, ratio) = match sample(line.planes[1]) {
        Some((t2, true, x2)) => (Some(t2), (x0 - x1).norm() / (x1 - x2).norm()),
        _ => (None, 1.0),
    };
    Some(Thetas { theta0, theta1, theta2, ratio })
}

/// Corner-transport-upwind weights of staggered face `g`: the interpolated
/// partial fluxes `ῡ~_{g,k}` for the six faces `k` sharing a vertex with `g`,
/// returned as `(k_p, k_q, weight)`. Their sum is `(J ῡ)_g`.
pub fn ctu_weights(mesh: &Mesh, partial: &PartialFluxes, g: StagFace) -> smallvec::SmallVec<[(usize, usize, f64); 6]> {
    let a = g.axis;
    let (np, nq) = mesh.dims(a);
    let mut out = smallvec::SmallVec::new();
    for s in 0..2usize {
        for r in -1isize..=1 {
            let w;
            let (kp, kq);
            if g.corner {
                let b = a.other();
                let mut sum = 0.0;
                let mut count = 0.0;
                for pp in [g.p as isize - 1, g.p as isize] {
                    if pp >= 0 && (pp as usize) < np {
                        sum += partial.at(mesh, b, g.q, pp as usize, s, r);
                        count += 1.0;
                    }
                }
                w = if count > 0.0 { sum / count } else { 0.0 };
                kp = g.p as isize + r;
                kq = g.q as isize - 1 + s as isize;
            } else {
                w = 0.5 * (partial.at(mesh, a, g.p, g.q, s, r) + partial.at(mesh, a, g.p + 1, g.q, s, r));
                kp = (g.p + s) as isize;
                kq = g.q as isize + r;
            }
            if w != 0.0 && kp >= 0 && kp as usize <= np && kq >= 0 && (kq as usize) < nq {
                out.push((kp as usize, kq as usize, w));
            }
        }
    }
    out
}
