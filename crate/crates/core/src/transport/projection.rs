//! Discrete projection of a liquid velocity onto fields that are
//! divergence-free on every liquid cell.

use crate::mesh::{Axis, CenteredField, FaceField, Mesh};
use crate::VofError;

#[derive(Clone, Debug)]
pub struct Projection {
    pub velocity: FaceField,
    pub pressure: CenteredField,
    pub iterations: usize,
    /// `max |D u|` over liquid cells after projection.
    pub max_div: f64,
}

/// Below this `max |D u|` on liquid cells (scaled by `max |u| / h`) the
/// solve is skipped and the input returned unchanged.
pub const DIV_TOLERANCE: f64 = 1e-13;

/// Fill faces where `defined` is false from defined neighbours of the same
/// family, sweeping until nothing changes. Faces that never see a defined
/// neighbour keep their value.
pub fn extrapolate_faces(mesh: &Mesh, u: &mut FaceField, defined: &[Vec<bool>; 2]) {
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        let k = axis.index();
        let mut known = defined[k].clone();
        let neighbours = |f: usize| {
            let (p, q) = ((f % (np + 1)) as isize, (f / (np + 1)) as isize);
            [(p - 1, q), (p + 1, q), (p, q - 1), (p, q + 1)]
                .into_iter()
                .filter(move |&(pp, qq)| pp >= 0 && qq >= 0 && pp as usize <= np && (qq as usize) < nq)
                .map(move |(pp, qq)| qq as usize * (np + 1) + pp as usize)
        };
        // Each sweep fills the unknown faces that touch a known one; only
        // neighbours of freshly filled faces can qualify in the next sweep.
        let mut candidates: Vec<usize> = (0..known.len()).filter(|&f| !known[f] && neighbours(f).any(|g| known[g])).collect();
        let mut queued = vec![false; known.len()];
        while !candidates.is_empty() {
            let fresh: Vec<(usize, f64)> = candidates
                .iter()
                .filter_map(|&f| {
                    let (sum, cnt) = neighbours(f).filter(|&g| known[g]).fold((0.0, 0), |(s, c), g| (s + u.comp[k][g], c + 1));
                    (cnt > 0).then(|| (f, sum / cnt as f64))
                })
                .collect();
            for &(f, v) in &fresh {
                u.comp[k][f] = v;
                known[f] = true;
            }
            candidates.clear();
            for &(f, _) in &fresh {
                for g in neighbours(f) {
                    if !known[g] && !queued[g] {
                        queued[g] = true;
                        candidates.push(g);
                    }
                }
            }
            for &g in &candidates {
                queued[g] = false;
            }
        }
    }
}

/// Project `u` onto the fields with zero discrete divergence on liquid cells
/// (`alpha > 0`): solve `-D G p = -D u` there with `p = 0` on gas cells, and
/// set `u <- u - G p` on faces touching a liquid cell. Gas-only faces are
/// left alone.
pub fn project_liquid_velocity(mesh: &Mesh, u: &FaceField, alpha: &CenteredField) -> Result<Projection, VofError> {
    let n = mesh.n_cells();
    let liquid: Vec<bool> = alpha.data.iter().map(|&a| a > 0.0).collect();
    let d = crate::mesh::div(mesh, u);
    let scale = u.max_abs() / mesh.hx().min(mesh.hy());
    let max_div = |d: &CenteredField| {
        d.data.iter().zip(&liquid).filter(|(_, &l)| l).fold(0.0f64, |m, (v, _)| m.max(v.abs()))
    };
    let d0 = max_div(&d);
    if d0 <= DIV_TOLERANCE * scale.max(1.0) {
        return Ok(Projection { velocity: u.clone(), pressure: CenteredField::zeros(mesh), iterations: 0, max_div: d0 });
    }

    let (nx, ny) = (mesh.nx, mesh.ny);
    let (ix2, iy2) = (1.0 / (mesh.hx() * mesh.hx()), 1.0 / (mesh.hy() * mesh.hy()));
    // Matrix-free -D G restricted to liquid cells.
    let apply = |x: &[f64], out: &mut [f64]| {
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                if !liquid[c] {
                    out[c] = 0.0;
                    continue;
                }
                let xc = x[c];
                let mut s = 0.0;
                let nb = |cc: usize| if liquid[cc] { x[cc] } else { 0.0 };
                if i > 0 {
                    s += (xc - nb(c - 1)) * ix2;
                }
                if i + 1 < nx {
                    s += (xc - nb(c + 1)) * ix2;
                }
                if j > 0 {
                    s += (xc - nb(c - nx)) * iy2;
                }
                if j + 1 < ny {
                    s += (xc - nb(c + nx)) * iy2;
                }
                out[c] = s;
            }
        }
    };
    let mut b: Vec<f64> = (0..n).map(|c| if liquid[c] { -d.data[c] } else { 0.0 }).collect();
    // A closed liquid region (no gas neighbour anywhere) makes the operator
    // singular; remove the constant mode from the right-hand side.
    let touches_gas = (0..n).any(|c| !liquid[c]);
    if !touches_gas {
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
    }
    let (p, iterations, residual) = conjugate_gradient(apply, &b, 1e-13, 20 * n + 100);
    if residual > 1e-8 {
        return Err(VofError::SolverStalled { iterations, residual });
    }
    let pressure = CenteredField { data: p };
    let mut velocity = u.clone();
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        let h = mesh.h(axis);
        for q in 0..nq {
            for pf in 1..np {
                let lo = mesh.frame_cell(axis, pf - 1, q);
                let hi = mesh.frame_cell(axis, pf, q);
                if liquid[lo] || liquid[hi] {
                    let g = (pressure.data[hi] - pressure.data[lo]) / h;
                    let f = mesh.face_index(axis, pf, q);
                    velocity.comp[axis.index()][f] -= g;
                }
            }
        }
    }
    let max_div = max_div(&crate::mesh::div(mesh, &velocity));
    Ok(Projection { velocity, pressure, iterations, max_div })
}

/// Unpreconditioned conjugate gradients from a zero initial guess; returns
/// the solution, iteration count and final relative residual.
fn conjugate_gradient(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= rtol * bnorm {
            return (x, it, rr.sqrt() / bnorm);
        }
        apply(&d, &mut ad);
        let step = rr / dot(&d, &ad);
        for k in 0..n {
            x[k] += step * d[k];
            r[k] -= step * ad[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            d[k] = r[k] + beta * d[k];
        }
    }
    (x, max_iter, rr.sqrt() / bnorm)
}
