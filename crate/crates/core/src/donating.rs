//! Donating regions, partial fluxes, the local CFL number and the fluxing
//! error audit.
//!
//! The donating region of face `f` is the oriented loop
//! `(x_v1, x_v2, x*_v2, [x*_f,] x*_v1)` where `x*_v = x_v - dt u_v` is the
//! backward-remapped vertex. Its signed area is the volume crossing `f` in the
//! direction of `n_f`. The volume-enforcing variant inserts the fifth vertex
//! `x*_f` so that the signed area equals `dt |f| u_f` exactly.

use serde::Serialize;
use smallvec::SmallVec;

use crate::geom::{clip_halfplane, cross, decompose_region, for_each_grid_piece, shoelace_area, triangle_overlap, TriangleFan, Vec2};
use crate::mesh::{Axis, CenteredField, FaceField, Mesh};
use crate::plic::{CellKind, PlicState};

/// Triangles smaller than this fraction of a cell are dropped.
const SLIVER: f64 = 1e-14;

/// Velocity at every mesh vertex: each component is the mean of the adjacent
/// faces normal to it along the vertex line. Components normal to a wall
/// vanish; along a wall the single adjacent face is used.
pub fn vertex_velocities(mesh: &Mesh, u: &FaceField) -> Vec<Vec2> {
    let mut out = vec![Vec2::zeros(); mesh.n_vertices()];
    for j in 0..=mesh.ny {
        for i in 0..=mesh.nx {
            let comp = |axis: Axis| {
                let (p, q) = match axis {
                    Axis::X => (i, j),
                    Axis::Y => (j, i),
                };
                let (np, nq) = mesh.dims(axis);
                if p == 0 || p == np {
                    return 0.0;
                }
                let mut s = 0.0;
                let mut k = 0.0;
                if q > 0 {
                    s += u.get(mesh, axis, p, q - 1);
                    k += 1.0;
                }
                if q < nq {
                    s += u.get(mesh, axis, p, q);
                    k += 1.0;
                }
                s / k
            };
            out[mesh.vertex_index(i, j)] = Vec2::new(comp(Axis::X), comp(Axis::Y));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DrKind {
    /// Shared remapped corners, no volume enforcement.
    Plain,
    /// Shared remapped corners plus a volume-enforcing fifth vertex.
    Memfpa,
    /// Per-face corner remap along the vertex velocities (audit fixture).
    Emfpa,
}

#[derive(Clone, Debug)]
pub struct DonatingRegion {
    pub axis: Axis,
    pub p: usize,
    pub q: usize,
    pub loop_pts: SmallVec<[Vec2; 5]>,
    /// `(vertex id, remapped position)` for `v1` and `v2`.
    pub corners: [(usize, Vec2); 2],
    pub triangles: TriangleFan,
    /// `dt |f| u_f`.
    pub target: f64,
    /// The volume correction could not be constructed; plain loop used.
    pub degenerate: bool,
}

impl DonatingRegion {
    pub fn signed_volume(&self) -> f64 {
        self.triangles.iter().map(|t| t.sign * t.area()).sum()
    }
}

/// Donating regions of all faces, per family, indexed like [`FaceField`].
/// Wall faces carry no region.
#[derive(Clone, Debug)]
pub struct DonatingRegions {
    pub kind: DrKind,
    pub dt: f64,
    pub regions: [Vec<Option<DonatingRegion>>; 2],
}

impl DonatingRegions {
    pub fn iter(&self) -> impl Iterator<Item = &DonatingRegion> {
        self.regions.iter().flatten().flatten()
    }

    pub fn get(&self, mesh: &Mesh, axis: Axis, p: usize, q: usize) -> Option<&DonatingRegion> {
        self.regions[axis.index()][mesh.face_index(axis, p, q)].as_ref()
    }

    pub fn n_degenerate(&self) -> usize {
        self.iter().filter(|r| r.degenerate).count()
    }
}

pub fn build_dr_plain(mesh: &Mesh, u: &FaceField, dt: f64) -> DonatingRegions {
    build_donating_regions(mesh, u, dt, DrKind::Plain)
}

pub fn build_dr_memfpa(mesh: &Mesh, u: &FaceField, dt: f64) -> DonatingRegions {
    build_donating_regions(mesh, u, dt, DrKind::Memfpa)
}

pub fn build_donating_regions(mesh: &Mesh, u: &FaceField, dt: f64, kind: DrKind) -> DonatingRegions {
    let uv = vertex_velocities(mesh, u);
    let star: Vec<Vec2> = (0..mesh.n_vertices()).map(|v| mesh.vertex_position(v) - dt * uv[v]).collect();
    let min_area = SLIVER * mesh.cell_volume();
    let regions = Axis::BOTH.map(|axis| {
        let (np, nq) = mesh.dims(axis);
        let mut out = vec![None; mesh.face_count(axis)];
        for q in 0..nq {
            for p in 1..np {
                let (v1, v2) = mesh.face_vertex_ids(axis, p, q);
                let (x1, x2) = mesh.face_vertices(axis, p, q);
                let target = dt * mesh.face_len(axis) * u.get(mesh, axis, p, q);
                let (s1, s2) = (star[v1], star[v2]);
                let mut degenerate = false;
                let mut pts: SmallVec<[Vec2; 5]> = SmallVec::new();
                let mut corners = [(v1, s1), (v2, s2)];
                match kind {
                    DrKind::Plain => pts.extend([x1, x2, s2, s1]),
                    DrKind::Memfpa => match fifth_vertex(x1, x2, s1, s2, target, mesh.mean_h()) {
                        Some(xf) => pts.extend([x1, x2, s2, xf, s1]),
                        None => {
                            degenerate = true;
                            pts.extend([x1, x2, s2, s1]);
                        }
                    },
                    DrKind::Emfpa => {
                        let (c1, c2) = emfpa_corners(x1, x2, s1, s2, uv[v1], uv[v2], target, dt).unwrap_or_else(|| {
                            degenerate = true;
                            (s1, s2)
                        });
                        corners = [(v1, c1), (v2, c2)];
                        pts.extend([x1, x2, c2, c1]);
                    }
                }
                let triangles = decompose_region(&pts, 0.5 * (x1 + x2), min_area);
                out[mesh.face_index(axis, p, q)] =
                    Some(DonatingRegion { axis, p, q, loop_pts: pts, corners, triangles, target, degenerate });
            }
        }
        out
    });
    DonatingRegions { kind, dt, regions }
}

/// Fifth vertex `x*_f = mid(x*_v1, x*_v2) + delta n*` with `n*` the unit normal
/// of the remapped segment, chosen so the pentagon has signed area `target`.
/// The pentagon area is affine in `delta`.
fn fifth_vertex(x1: Vec2, x2: Vec2, s1: Vec2, s2: Vec2, target: f64, h: f64) -> Option<Vec2> {
    let e = s1 - s2;
    let len = e.norm();
    if len < 1e-12 * h {
        return None;
    }
    let n = Vec2::new(e.y, -e.x) / len;
    let a0 = shoelace_area(&[x1, x2, s2, s1]);
    let delta = (target - a0) / (0.5 * len);
    Some(0.5 * (s1 + s2) + delta * n)
}

/// Per-face corners `x*_v - d_v u_v` with the corrected segment kept parallel
/// to the uncorrected one and the quadrilateral area equal to `target`.
#[allow(clippy::too_many_arguments)]
fn emfpa_corners(x1: Vec2, x2: Vec2, s1: Vec2, s2: Vec2, u1: Vec2, u2: Vec2, target: f64, dt: f64) -> Option<(Vec2, Vec2)> {
    let d = s2 - s1;
    // d_1 = t c2, d_2 = t c1 keeps the corrected segment parallel to d.
    let (c1, c2) = (cross(d, u1), cross(d, u2));
    let scale = c1.abs().max(c2.abs());
    if scale == 0.0 {
        return None;
    }
    let corners = |t: f64| (s1 - t * c2 * u1, s2 - t * c1 * u2);
    let area = |t: f64| {
        let (a, b) = corners(t);
        shoelace_area(&[x1, x2, b, a])
    };
    let tau = dt / scale;
    let (am, a0, ap) = (area(-tau), area(0.0), area(tau));
    let qa = (ap + am - 2.0 * a0) / (2.0 * tau * tau);
    let qb = (ap - am) / (2.0 * tau);
    let qc = a0 - target;
    let t = if qa.abs() * tau < 1e-12 * qb.abs() {
        if qb == 0.0 {
            return None;
        }
        -qc / qb
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let r = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * r);
        let roots = [q / qa, if q != 0.0 { qc / q } else { q / qa }];
        if roots[0].abs() < roots[1].abs() {
            roots[0]
        } else {
            roots[1]
        }
    };
    Some(corners(t))
}

/// Partial fluxes `M_0(DR_f ∩ b^pi) / (dt |f|)` over the 2x3 block `C^2(f)`.
///
/// Block slot `3 * s + (r + 1)` holds the cell at frame position
/// `(p - 1 + s, q + r)`. Contributions from cells outside the block (only
/// possible when the CFL limit is exceeded) are attributed to the nearest
/// block cell and counted in `spilled`.
#[derive(Clone, Debug)]
pub struct PartialFluxes {
    pub blocks: [Vec<[f64; 6]>; 2],
    pub spilled: usize,
}

impl PartialFluxes {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { blocks: Axis::BOTH.map(|a| vec![[0.0; 6]; mesh.face_count(a)]), spilled: 0 }
    }

    /// Face flux `sum_b ῡ_{f,b}`.
    pub fn totals(&self) -> FaceField {
        FaceField { comp: self.blocks.clone().map(|v| v.iter().map(|b| b.iter().sum()).collect()) }
    }

    /// `self - other`, slot by slot.
    pub fn minus(&self, other: &PartialFluxes) -> PartialFluxes {
        let blocks = [0, 1].map(|k| {
            self.blocks[k]
                .iter()
                .zip(&other.blocks[k])
                .map(|(a, b)| std::array::from_fn(|s| a[s] - b[s]))
                .collect()
        });
        PartialFluxes { blocks, spilled: self.spilled.max(other.spilled) }
    }

    /// Partial flux of face `(p, q)` from the cell at frame offset
    /// `(side, lateral)`, `side` in `{0, 1}`, `lateral` in `{-1, 0, 1}`.
    pub fn at(&self, mesh: &Mesh, axis: Axis, p: usize, q: usize, side: usize, lateral: isize) -> f64 {
        self.blocks[axis.index()][mesh.face_index(axis, p, q)][3 * side + (lateral + 1) as usize]
    }
}

/// Liquid and total partial fluxes of every donating region.
pub fn partial_fluxes(mesh: &Mesh, plic: &PlicState, drs: &DonatingRegions) -> (PartialFluxes, PartialFluxes) {
    let mut liquid = PartialFluxes::zeros(mesh);
    let mut total = PartialFluxes::zeros(mesh);
    if drs.dt <= 0.0 {
        return (liquid, total);
    }
    for dr in drs.iter() {
        let norm = 1.0 / (drs.dt * mesh.face_len(dr.axis));
        let fi = mesh.face_index(dr.axis, dr.p, dr.q);
        let mut bl = [0.0; 6];
        let mut bt = [0.0; 6];
        let mut spilled = false;
        let h = Vec2::new(mesh.hx(), mesh.hy());
        for t in &dr.triangles {
            for_each_grid_piece(&t.v, h, (mesh.nx, mesh.ny), |i, j, piece| {
                let c = mesh.cell_index(i, j);
                let full = t.sign * shoelace_area(piece);
                let liq = match plic.cells[c] {
                    CellKind::Empty => 0.0,
                    CellKind::Full => full,
                    CellKind::Interface { .. } => {
                        let hp = plic.liquid_halfplane(mesh, c).expect("interface cell");
                        t.sign * shoelace_area(&clip_halfplane(piece, hp.n, hp.d))
                    }
                };
                let (pc, qc) = match dr.axis {
                    Axis::X => (i as isize, j as isize),
                    Axis::Y => (j as isize, i as isize),
                };
                let s = pc - (dr.p as isize - 1);
                let r = qc - dr.q as isize;
                if !(0..=1).contains(&s) || !(-1..=1).contains(&r) {
                    spilled = true;
                }
                let slot = 3 * s.clamp(0, 1) as usize + (r.clamp(-1, 1) + 1) as usize;
                bt[slot] += full;
                bl[slot] += liq;
            });
        }
        for s in 0..6 {
            bl[s] *= norm;
            bt[s] *= norm;
        }
        liquid.blocks[dr.axis.index()][fi] = bl;
        total.blocks[dr.axis.index()][fi] = bt;
        if spilled {
            liquid.spilled += 1;
            total.spilled += 1;
        }
    }
    (liquid, total)
}

/// Local CFL numbers `kappa_c = (dt/|c|) sum_f [-o_{c,f} |f| u_f]^+`.
#[derive(Clone, Debug)]
pub struct CflInfo {
    pub kappa: CenteredField,
    pub max: f64,
    pub argmax: usize,
}

/// Inflow rate `kappa_c / dt` per cell.
pub fn inflow_rates(mesh: &Mesh, u: &FaceField) -> CenteredField {
    CenteredField::from_fn(mesh, |i, j| {
        let inflow = |v: f64| v.max(0.0);
        (inflow(u.x_face(mesh, i, j)) + inflow(-u.x_face(mesh, i + 1, j))) / mesh.hx()
            + (inflow(u.y_face(mesh, i, j)) + inflow(-u.y_face(mesh, i, j + 1))) / mesh.hy()
    })
}

pub fn cell_cfl(mesh: &Mesh, u: &FaceField, dt: f64) -> CflInfo {
    let mut kappa = inflow_rates(mesh, u);
    let mut max = 0.0;
    let mut argmax = 0;
    for (c, k) in kappa.data.iter_mut().enumerate() {
        *k *= dt;
        if *k > max {
            max = *k;
            argmax = c;
        }
    }
    CflInfo { kappa, max, argmax }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FluxErrorKind {
    Overlap,
    Transit,
    Volume,
    Gap,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxError {
    pub step: usize,
    pub face_axis: char,
    pub face_i: usize,
    pub face_j: usize,
    pub error: FluxErrorKind,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub errors: Vec<FluxError>,
}

impl AuditReport {
    pub fn count(&self, kind: FluxErrorKind) -> usize {
        self.errors.iter().filter(|e| e.error == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), crate::VofError> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.errors {
            wr.serialize(e)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn face_ij(axis: Axis, p: usize, q: usize) -> (char, usize, usize) {
    match axis {
        Axis::X => ('x', p, q),
        Axis::Y => ('y', q, p),
    }
}

/// Split a closed loop at its first proper self-intersection, recursively,
/// into simple loops.
fn simple_parts(pts: &[Vec2]) -> Vec<Vec<Vec2>> {
    let k = pts.len();
    for a in 0..k {
        for b in a + 2..k {
            if a == 0 && b == k - 1 {
                continue;
            }
            let (p0, p1) = (pts[a], pts[(a + 1) % k]);
            let (q0, q1) = (pts[b], pts[(b + 1) % k]);
            let r = p1 - p0;
            let s = q1 - q0;
            let den = cross(r, s);
            if den == 0.0 {
                continue;
            }
            let t = cross(q0 - p0, s) / den;
            let u = cross(q0 - p0, r) / den;
            let eps = 1e-12;
            if t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps {
                let x = p0 + t * r;
                let mut first = vec![x];
                first.extend_from_slice(&pts[a + 1..=b]);
                let mut second = vec![x];
                second.extend_from_slice(&pts[b + 1..]);
                second.extend_from_slice(&pts[..=a]);
                let mut out = simple_parts(&first);
                out.extend(simple_parts(&second));
                return out;
            }
        }
    }
    vec![pts.to_vec()]
}

struct Part {
    /// Orientation relative to the owning face normal.
    sign: f64,
    tris: TriangleFan,
    lo: Vec2,
    hi: Vec2,
}

fn parts_of(dr: &DonatingRegion, min_area: f64) -> Vec<Part> {
    simple_parts(&dr.loop_pts)
        .into_iter()
        .filter_map(|pts| {
            let area = shoelace_area(&pts);
            if area.abs() < min_area {
                return None;
            }
            let tris = decompose_region(&pts, pts[0], 0.0);
            let (mut lo, mut hi) = (pts[0], pts[0]);
            for p in &pts {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            Some(Part { sign: area.signum(), tris, lo, hi })
        })
        .collect()
}

fn part_overlap(a: &Part, b: &Part) -> f64 {
    if a.hi.x < b.lo.x || b.hi.x < a.lo.x || a.hi.y < b.lo.y || b.hi.y < a.lo.y {
        return 0.0;
    }
    let mut s = 0.0;
    for ta in &a.tris {
        for tb in &b.tris {
            s += ta.sign * tb.sign * triangle_overlap(&ta.v, &tb.v);
        }
    }
    // Both parts are simple, so the signed sum is +/- the overlap area.
    s * a.sign * b.sign
}

/// Check a set of donating regions for overlap, transit, volume and gap
/// errors against their own target volumes.
pub fn audit_fluxing_errors(mesh: &Mesh, drs: &DonatingRegions, step: usize) -> AuditReport {
    let tol = 1e-12 * mesh.cell_volume();
    let mut report = AuditReport::default();
    let mut push = |axis: Axis, p: usize, q: usize, error: FluxErrorKind, magnitude: f64| {
        let (face_axis, face_i, face_j) = face_ij(axis, p, q);
        report.errors.push(FluxError { step, face_axis, face_i, face_j, error, magnitude });
    };

    // Volume errors.
    for dr in drs.iter() {
        let err = (dr.signed_volume() - dr.target).abs();
        if err > tol {
            push(dr.axis, dr.p, dr.q, FluxErrorKind::Volume, err);
        }
    }

    // Corner consistency at shared vertices.
    let mut seen: Vec<SmallVec<[(Vec2, f64, Vec2, &DonatingRegion); 4]>> = vec![SmallVec::new(); mesh.n_vertices()];
    for dr in drs.iter() {
        let area = dr.signed_volume();
        for (k, &(v, pos)) in dr.corners.iter().enumerate() {
            // Interior side of the side edge x_v -> x*_v: for v2 the loop
            // walks the edge forwards, for v1 backwards.
            let left = if k == 1 { area.signum() } else { -area.signum() };
            seen[v].push((pos, left, mesh.vertex_position(v), dr));
        }
    }
    for entries in &seen {
        for a in 0..entries.len() {
            for b in a + 1..entries.len() {
                let (pa, la, xv, da) = entries[a];
                let (pb, lb, _, db) = entries[b];
                if pa == pb {
                    continue;
                }
                let ea = pa - xv;
                let eb = pb - xv;
                let sliver = 0.5 * cross(ea, eb);
                let mag = (pa - pb).norm();
                // Does each region cover the sliver between the two side edges?
                let a_covers = (sliver > 0.0) == (la > 0.0);
                let b_covers = (sliver < 0.0) == (lb > 0.0);
                let kind = if !a_covers && !b_covers && sliver.abs() > tol { FluxErrorKind::Gap } else { FluxErrorKind::Transit };
                push(da.axis, da.p, da.q, kind, mag);
                push(db.axis, db.p, db.q, kind, mag);
            }
        }
    }

    // Overlap of same-orientation parts among the faces of each cell.
    let min_area = SLIVER * mesh.cell_volume();
    let parts: [Vec<Vec<Part>>; 2] = [0, 1].map(|k| {
        drs.regions[k].iter().map(|r| r.as_ref().map_or_else(Vec::new, |d| parts_of(d, min_area))).collect()
    });
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            // (axis, p, q, o_{c,f})
            let faces = [
                (Axis::X, i, j, -1.0),
                (Axis::X, i + 1, j, 1.0),
                (Axis::Y, j, i, -1.0),
                (Axis::Y, j + 1, i, 1.0),
            ];
            for a in 0..4 {
                for b in a + 1..4 {
                    let (fa, fb) = (faces[a], faces[b]);
                    let pa = &parts[fa.0.index()][mesh.face_index(fa.0, fa.1, fa.2)];
                    let pb = &parts[fb.0.index()][mesh.face_index(fb.0, fb.1, fb.2)];
                    let mut overlap = 0.0;
                    for x in pa {
                        for y in pb {
                            if x.sign * fa.3 == y.sign * fb.3 {
                                overlap += part_overlap(x, y);
                            }
                        }
                    }
                    if overlap > tol {
                        push(fa.0, fa.1, fa.2, FluxErrorKind::Overlap, overlap);
                        push(fb.0, fb.1, fb.2, FluxErrorKind::Overlap, overlap);
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plic::{reconstruct_normals, PlicOptions};

    fn uniform(mesh: &Mesh, ux: f64, uy: f64) -> FaceField {
        let mut u = FaceField::from_fn(mesh, |axis, _, _| if axis == Axis::X { ux } else { uy });
        u.zero_walls(mesh);
        u
    }

    /// Discretely solenoidal face velocities from a stream function.
    fn from_stream(mesh: &Mesh, psi: impl Fn(f64, f64) -> f64) -> FaceField {
        FaceField::from_fn(mesh, |axis, p, q| {
            let (v1, v2) = mesh.face_vertices(axis, p, q);
            (psi(v2.x, v2.y) - psi(v1.x, v1.y)) / mesh.face_len(axis) * if axis == Axis::X { 1.0 } else { -1.0 }
        })
    }

    fn shear(mesh: &Mesh) -> FaceField {
        use std::f64::consts::PI;
        from_stream(mesh, |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2) / PI)
    }

    #[test]
    fn vertex_velocity_is_mean_of_adjacent_faces() {
        let mesh = Mesh::unit(4).unwrap();
        let mut u = FaceField::zeros(&mesh);
        u.set(&mesh, Axis::X, 2, 1, 1.0);
        u.set(&mesh, Axis::X, 2, 2, 3.0);
        let uv = vertex_velocities(&mesh, &u);
        assert_eq!(uv[mesh.vertex_index(2, 2)], Vec2::new(2.0, 0.0));
        // Bottom wall vertex uses its single face for the tangential part.
        u.set(&mesh, Axis::X, 1, 0, 4.0);
        let uv = vertex_velocities(&mesh, &u);
        assert_eq!(uv[mesh.vertex_index(1, 0)], Vec2::new(4.0, 0.0));
        assert_eq!(uv[mesh.vertex_index(0, 2)].x, 0.0);
    }

    #[test]
    fn uniform_flow_gives_rectangles() {
        let mesh = Mesh::unit(8).unwrap();
        let u = uniform(&mesh, 0.5, 0.0);
        let dt = 0.1;
        let drs = build_dr_plain(&mesh, &u, dt);
        let dr = drs.get(&mesh, Axis::X, 3, 4).unwrap();
        assert!((dr.signed_volume() - 0.5 * dt * mesh.hy()).abs() < 1e-15);
        // 0.05 of a 0.125-wide cell, drawn entirely from the upwind cell.
        let alpha = CenteredField::filled(&mesh, 1.0);
        let plic = reconstruct_normals(&mesh, &alpha, PlicOptions::default());
        let (liq, _) = partial_fluxes(&mesh, &plic, &drs);
        assert!((liq.at(&mesh, Axis::X, 3, 4, 0, 0) - 0.5).abs() < 1e-14);
        assert!(liq.at(&mesh, Axis::X, 3, 4, 1, 0).abs() < 1e-15);
    }

    #[test]
    fn memfpa_enforces_face_volumes_in_shear() {
        let mesh = Mesh::unit(16).unwrap();
        let u = shear(&mesh);
        let dt = 0.5 * mesh.hx();
        let plain = build_dr_plain(&mesh, &u, dt);
        let memfpa = build_dr_memfpa(&mesh, &u, dt);
        let worst = |d: &DonatingRegions| d.iter().map(|r| (r.signed_volume() - r.target).abs()).fold(0.0, f64::max);
        assert!(worst(&plain) > 1e-8);
        assert!(worst(&memfpa) < 1e-12 * mesh.cell_volume());
        assert_eq!(memfpa.n_degenerate(), 0);
    }

    #[test]
    fn fifth_vertex_fixes_a_known_deficit() {
        // Unit face at x = 0, remapped corners sheared so the quad is 0.08 short.
        let x1 = Vec2::new(0.0, 0.0);
        let x2 = Vec2::new(0.0, 1.0);
        let s1 = Vec2::new(-0.2, 0.0);
        let s2 = Vec2::new(-0.2, 1.0);
        let xf = fifth_vertex(x1, x2, s1, s2, 0.28, 1.0).unwrap();
        // Triangle of base 1 and height 0.16 adds 0.08.
        assert!((xf - Vec2::new(-0.36, 0.5)).norm() < 1e-14);
        assert!((shoelace_area(&[x1, x2, s2, xf, s1]) - 0.28).abs() < 1e-15);
    }

    #[test]
    fn coinciding_remapped_corners_fall_back_to_plain() {
        let x1 = Vec2::new(0.0, 0.0);
        let x2 = Vec2::new(0.0, 1.0);
        let s = Vec2::new(-0.5, 0.5);
        assert!(fifth_vertex(x1, x2, s, s, 0.3, 1.0).is_none());
    }

    #[test]
    fn partial_fluxes_sum_to_memfpa_face_flux() {
        let mesh = Mesh::unit(16).unwrap();
        let u = shear(&mesh);
        let dt = 0.7 * mesh.hx();
        let drs = build_dr_memfpa(&mesh, &u, dt);
        let alpha = CenteredField::from_fn(&mesh, |i, j| ((i + 2 * j) % 5) as f64 / 4.0);
        let plic = reconstruct_normals(&mesh, &alpha, PlicOptions::default());
        let (liq, tot) = partial_fluxes(&mesh, &plic, &drs);
        let t = tot.totals();
        for axis in Axis::BOTH {
            for (k, v) in t.comp[axis.index()].iter().enumerate() {
                assert!((v - u.comp[axis.index()][k]).abs() < 1e-11, "{v}");
            }
        }
        assert_eq!(tot.spilled, 0);
        let g = tot.minus(&liq);
        assert!(g.blocks.iter().flatten().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn memfpa_audit_is_clean_and_emfpa_has_transit_errors() {
        let mesh = Mesh::unit(16).unwrap();
        let u = shear(&mesh);
        let dt = 0.7 / inflow_rates(&mesh, &u).data.iter().fold(0.0, |m: f64, v| m.max(*v));
        let memfpa = audit_fluxing_errors(&mesh, &build_dr_memfpa(&mesh, &u, dt), 0);
        assert!(memfpa.is_clean(), "{:?}", &memfpa.errors[..memfpa.errors.len().min(5)]);
        let emfpa = audit_fluxing_errors(&mesh, &build_donating_regions(&mesh, &u, dt, DrKind::Emfpa), 0);
        assert!(emfpa.count(FluxErrorKind::Transit) > 0);
        assert_eq!(emfpa.count(FluxErrorKind::Volume), 0);
        let plain = audit_fluxing_errors(&mesh, &build_dr_plain(&mesh, &u, dt), 0);
        assert!(plain.count(FluxErrorKind::Volume) > 0);
        assert_eq!(plain.count(FluxErrorKind::Transit), 0);
    }

    #[test]
    fn overlapping_regions_are_flagged() {
        let mesh = Mesh::unit(8).unwrap();
        let mut drs = build_dr_plain(&mesh, &uniform(&mesh, 0.0, 0.0), 0.1);
        // Two inflow regions of cell (3, 3) forced onto the same patch.
        let c = mesh.cell_center(3, 3);
        let patch = [c, c + Vec2::new(0.05, 0.0), c + Vec2::new(0.0, 0.05)];
        for (axis, p, q) in [(Axis::X, 3, 3), (Axis::Y, 3, 3)] {
            let k = mesh.face_index(axis, p, q);
            let dr = drs.regions[axis.index()][k].as_mut().unwrap();
            // Orient as inflow: negative for the lower/left faces of the cell.
            dr.loop_pts = patch.iter().rev().copied().collect();
            dr.triangles = decompose_region(&dr.loop_pts, dr.loop_pts[0], 0.0);
            dr.target = dr.signed_volume();
        }
        let rep = audit_fluxing_errors(&mesh, &drs, 0);
        assert_eq!(rep.count(FluxErrorKind::Overlap), 2);
    }

    #[test]
    fn cfl_of_uniform_flow() {
        let mesh = Mesh::unit(10).unwrap();
        let u = uniform(&mesh, 2.0, 0.0);
        let info = cell_cfl(&mesh, &u, 0.01);
        assert!((info.max - 0.2).abs() < 1e-14);
    }
}
