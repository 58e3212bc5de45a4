//! Piecewise-linear interface reconstruction.
//!
//! In an interface cell the liquid occupies `{x : eta . (x - x_c) + s <= 0}`
//! where `eta` is the unit normal pointing into the gas and `x_c` the cell
//! centre. Normals come from ELVIRA with an optional height-function override.

use crate::geom::{HalfPlane, Vec2};
use crate::mesh::{Axis, CenteredField, FaceField, Mesh};

/// Cells with `alpha <= EPS_ALPHA` are empty, `alpha >= 1 - EPS_ALPHA` full.
pub const EPS_ALPHA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellKind {
    Empty,
    Full,
    Interface { eta: Vec2, shift: f64 },
}

#[derive(Clone, Debug)]
pub struct PlicState {
    pub cells: Vec<CellKind>,
}

impl PlicState {
    /// Liquid half-plane of an interface cell, in absolute coordinates.
    pub fn liquid_halfplane(&self, mesh: &Mesh, c: usize) -> Option<HalfPlane> {
        match self.cells[c] {
            CellKind::Interface { eta, shift } => {
                let (i, j) = mesh.cell_ij(c);
                let xc = mesh.cell_center(i, j);
                Some(HalfPlane::new(eta, shift - eta.dot(&xc)))
            }
            _ => None,
        }
    }

    pub fn n_interface(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, CellKind::Interface { .. })).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PlicOptions {
    /// Prefer a 3x7 height-function normal where complete column heights exist.
    pub height_function: bool,
}

/// The line `eta . x' + s = 0` in a cell of size `hx x hy` centred at the
/// origin, in the normalised form `a x + b y <= d` over the unit square with
/// `a <= b`, `a + b = 1`. Returns `(a, b, m)` where `m = |eta_x| hx + |eta_y| hy`.
fn normalised(eta: Vec2, hx: f64, hy: f64) -> (f64, f64, f64) {
    let m1 = eta.x.abs() * hx;
    let m2 = eta.y.abs() * hy;
    let m = m1 + m2;
    (m1.min(m2) / m, m1.max(m2) / m, m)
}

/// Liquid fraction of a `hx x hy` cell below the line with normal `eta` and
/// shift `s`. Monotone non-increasing in `s`.
pub fn volume_from_shift(eta: Vec2, s: f64, hx: f64, hy: f64) -> f64 {
    let (a, b, m) = normalised(eta, hx, hy);
    if !(m > 0.0) {
        return if s <= 0.0 { 1.0 } else { 0.0 };
    }
    let d = (0.5 - s / m).clamp(0.0, 1.0);
    if a < 1e-15 {
        return d;
    }
    if d < a {
        d * d / (2.0 * a * b)
    } else if d <= b {
        (2.0 * d - a) / (2.0 * b)
    } else {
        1.0 - (1.0 - d) * (1.0 - d) / (2.0 * a * b)
    }
}

/// Inverse of [`volume_from_shift`] for `alpha` in `[0, 1]`.
pub fn shift_from_volume(eta: Vec2, alpha: f64, hx: f64, hy: f64) -> f64 {
    let (a, b, m) = normalised(eta, hx, hy);
    let alpha = alpha.clamp(0.0, 1.0);
    let d = if a < 1e-15 {
        alpha
    } else if alpha <= a / (2.0 * b) {
        (2.0 * a * b * alpha).sqrt()
    } else if alpha <= 1.0 - a / (2.0 * b) {
        b * alpha + 0.5 * a
    } else {
        1.0 - (2.0 * a * b * (1.0 - alpha)).sqrt()
    };
    m * (0.5 - d)
}

fn classify(alpha: f64) -> Option<CellKind> {
    if alpha <= EPS_ALPHA {
        Some(CellKind::Empty)
    } else if alpha >= 1.0 - EPS_ALPHA {
        Some(CellKind::Full)
    } else {
        None
    }
}

/// Reconstruct every cell from the volume fractions.
pub fn reconstruct_normals(mesh: &Mesh, alpha: &CenteredField, opts: PlicOptions) -> PlicState {
    let mut cells = Vec::with_capacity(mesh.n_cells());
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let a = alpha.data[mesh.cell_index(i, j)];
            let kind = classify(a).unwrap_or_else(|| {
                let eta = opts
                    .height_function
                    .then(|| height_normal(mesh, alpha, i, j))
                    .flatten()
                    .unwrap_or_else(|| elvira_normal(mesh, alpha, i, j));
                CellKind::Interface { eta, shift: shift_from_volume(eta, a, mesh.hx(), mesh.hy()) }
            });
            cells.push(kind);
        }
    }
    PlicState { cells }
}

fn at(mesh: &Mesh, alpha: &CenteredField, i: isize, j: isize) -> Option<f64> {
    if i < 0 || j < 0 || i as usize >= mesh.nx || j as usize >= mesh.ny {
        None
    } else {
        Some(alpha.data[mesh.cell_index(i as usize, j as usize)])
    }
}

/// ELVIRA: try backward, central and forward differences of the column and
/// row sums over the 3x3 block and keep the normal
/// whose line best reproduces the block's volume fractions. Near walls only
/// the differences built from in-mesh columns are tried.
pub fn elvira_normal(mesh: &Mesh, alpha: &CenteredField, i: usize, j: usize) -> Vec2 {
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let (i, j) = (i as isize, j as isize);
    let mut block = [[None; 3]; 3];
    for (dj, row) in block.iter_mut().enumerate() {
        for (di, v) in row.iter_mut().enumerate() {
            *v = at(mesh, alpha, i + di as isize - 1, j + dj as isize - 1);
        }
    }
    let row_ok = |dj: usize| block[dj][1].is_some();
    let col_ok = |di: usize| block[1][di].is_some();
    // Column sums over in-mesh rows, row sums over in-mesh columns.
    let col_sum = |di: usize| col_ok(di).then(|| (0..3).filter(|&r| row_ok(r)).map(|r| block[r][di].unwrap()).sum::<f64>());
    let row_sum = |dj: usize| row_ok(dj).then(|| (0..3).filter(|&c| col_ok(c)).map(|c| block[dj][c].unwrap()).sum::<f64>());

    let mut candidates: smallvec::SmallVec<[Vec2; 12]> = smallvec::SmallVec::new();
    // The sums measure liquid extent from whichever end holds the liquid, so
    // each slope yields one candidate per orientation of that end.
    let mut push_slopes = |sums: [Option<f64>; 3], make: &dyn Fn(f64, f64) -> Vec2| {
        let mut slopes = smallvec::SmallVec::<[f64; 3]>::new();
        if let (Some(a), Some(b)) = (sums[0], sums[1]) {
            slopes.push(b - a);
        }
        if let (Some(a), Some(c)) = (sums[0], sums[2]) {
            slopes.push(0.5 * (c - a));
        }
        if let (Some(b), Some(c)) = (sums[1], sums[2]) {
            slopes.push(c - b);
        }
        for s in slopes {
            candidates.push(make(s, 1.0));
            candidates.push(make(s, -1.0));
        }
    };
    push_slopes([col_sum(0), col_sum(1), col_sum(2)], &|s, e| Vec2::new(-s * hy / hx, e));
    push_slopes([row_sum(0), row_sum(1), row_sum(2)], &|s, e| Vec2::new(e, -s * hx / hy));

    let a0 = block[1][1].unwrap();
    let mut best = (f64::INFINITY, Vec2::new(1.0, 0.0));
    for n in candidates {
        let eta = n.normalize();
        let s0 = shift_from_volume(eta, a0, hx, hy);
        let mut err = 0.0;
        for (dj, row) in block.iter().enumerate() {
            for (di, v) in row.iter().enumerate() {
                if let Some(a) = v {
                    let offset = Vec2::new((di as f64 - 1.0) * hx, (dj as f64 - 1.0) * hy);
                    let r = volume_from_shift(eta, s0 + eta.dot(&offset), hx, hy) - a;
                    err += r * r;
                }
            }
        }
        if err < best.0 {
            best = (err, eta);
        }
    }
    best.1
}

/// Height-function normal from a 3x7 stencil oriented along the dominant
/// gradient direction. `None` unless all three column heights are complete:
/// every column runs monotonically from a full cell to an empty one.
pub fn height_normal(mesh: &Mesh, alpha: &CenteredField, i: usize, j: usize) -> Option<Vec2> {
    let (ii, jj) = (i as isize, j as isize);
    let get = |di: isize, dj: isize| at(mesh, alpha, ii + di, jj + dj);
    // Centred gradient decides the column direction.
    let gx = get(1, 0).unwrap_or(get(0, 0)?) - get(-1, 0).unwrap_or(get(0, 0)?);
    let gy = get(0, 1).unwrap_or(get(0, 0)?) - get(0, -1).unwrap_or(get(0, 0)?);
    let vertical = gy.abs() >= gx.abs();
    let along = if vertical { Axis::Y } else { Axis::X };
    let mut heights = [0.0; 3];
    let mut liquid_low = None;
    for (k, h) in heights.iter_mut().enumerate() {
        let lat = k as isize - 1;
        let col: Option<Vec<f64>> = (-3..=3)
            .map(|t| if vertical { get(lat, t) } else { get(t, lat) })
            .collect();
        let col = col?;
        let low = col[0] >= 1.0 - EPS_ALPHA && col[6] <= EPS_ALPHA;
        let high = col[0] <= EPS_ALPHA && col[6] >= 1.0 - EPS_ALPHA;
        if !(low || high) || liquid_low.is_some_and(|l| l != low) {
            return None;
        }
        liquid_low = Some(low);
        let monotone = col.windows(2).all(|w| if low { w[1] <= w[0] } else { w[1] >= w[0] });
        if !monotone {
            return None;
        }
        *h = col.iter().sum::<f64>();
    }
    let sign = if liquid_low? { 1.0 } else { -1.0 };
    let slope = 0.5 * (heights[2] - heights[0]);
    let (ha, hb) = (mesh.h(along), mesh.h(along.other()));
    // Heights are measured along `along` and vary across it.
    Some(along.point(sign, -slope * ha / hb).normalize())
}

/// Liquid fraction of face `f` seen from the PLIC line of cell `c`.
fn segment_fraction(mesh: &Mesh, plic: &PlicState, c: usize, v1: Vec2, v2: Vec2) -> f64 {
    match plic.cells[c] {
        CellKind::Empty => 0.0,
        CellKind::Full => 1.0,
        CellKind::Interface { .. } => {
            let h = plic.liquid_halfplane(mesh, c).expect("interface cell");
            let (g0, g1) = (h.eval(v1), h.eval(v2));
            match (g0 <= 0.0, g1 <= 0.0) {
                (true, true) => 1.0,
                (false, false) => 0.0,
                (true, false) => g0 / (g0 - g1),
                (false, true) => g1 / (g1 - g0),
            }
        }
    }
}

/// Liquid apertures: the mean over the adjacent cells of the liquid fraction
/// of the face segment under each cell's own PLIC line. The gas aperture is
/// `1 - a`.
pub fn face_apertures(mesh: &Mesh, plic: &PlicState) -> FaceField {
    FaceField::from_fn(mesh, |axis, p, q| {
        let (v1, v2) = mesh.face_vertices(axis, p, q);
        let np = mesh.cells_along(axis);
        let mut s = 0.0;
        let mut k = 0.0;
        if p > 0 {
            s += segment_fraction(mesh, plic, mesh.frame_cell(axis, p - 1, q), v1, v2);
            k += 1.0;
        }
        if p < np {
            s += segment_fraction(mesh, plic, mesh.frame_cell(axis, p, q), v1, v2);
            k += 1.0;
        }
        s / k
    })
}
