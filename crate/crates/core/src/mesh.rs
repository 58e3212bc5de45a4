//! Uniform 2D MAC mesh, the centred/face/staggered field containers and the
//! discrete operators acting between them.
//!
//! Faces of both orientations are addressed through a *frame*: for the family
//! of faces normal to axis `a`, `p` counts along `a` and `q` counts along the
//! other axis. An `a`-face `(p, q)` sits at `a = p * h_a` and spans the cell
//! row `q`. This lets the x- and y-face code paths share one implementation.
//!
//! Boundary faces (`p == 0` or `p == np`) own a half-size staggered control
//! volume. Normal velocities and mass fluxes vanish there (closed walls), but
//! staggered quantities such as the staggered volume fraction live on them.

use crate::geom::Vec2;
use crate::VofError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Component of `v` along this axis.
    pub fn of(self, v: Vec2) -> f64 {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
        }
    }

    /// Build a point from (along this axis, along the other axis) coordinates.
    pub fn point(self, a: f64, b: f64) -> Vec2 {
        match self {
            Axis::X => Vec2::new(a, b),
            Axis::Y => Vec2::new(b, a),
        }
    }
}

/// Uniform rectangular mesh on `[0, lx] x [0, ly]` with closed walls.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    hx: f64,
    hy: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, VofError> {
        if nx < 4 || ny < 4 {
            return Err(VofError::InvalidMesh(format!("need at least 4x4 cells, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(VofError::InvalidMesh(format!("bad extents {lx} x {ly}")));
        }
        Ok(Self { nx, ny, lx, ly, hx: lx / nx as f64, hy: ly / ny as f64 })
    }

    /// `n x n` mesh on the unit square.
    pub fn unit(n: usize) -> Result<Self, VofError> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn h(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx,
            Axis::Y => self.hy,
        }
    }

    /// Number of cells along `axis`.
    pub fn cells_along(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
        }
    }

    /// `(np, nq)` for the family of faces normal to `axis`.
    pub fn dims(&self, axis: Axis) -> (usize, usize) {
        (self.cells_along(axis), self.cells_along(axis.other()))
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// Lower-left and upper-right corners of cell `(i, j)`.
    pub fn cell_bounds(&self, i: usize, j: usize) -> (Vec2, Vec2) {
        let lo = Vec2::new(i as f64 * self.hx, j as f64 * self.hy);
        (lo, lo + Vec2::new(self.hx, self.hy))
    }

    /// Cell `(i, j)` addressed in the frame of `axis`.
    pub fn frame_cell(&self, axis: Axis, p: usize, q: usize) -> usize {
        match axis {
            Axis::X => self.cell_index(p, q),
            Axis::Y => self.cell_index(q, p),
        }
    }

    /// Like [`Mesh::frame_cell`] but with signed indices; `None` outside the mesh.
    pub fn frame_cell_checked(&self, axis: Axis, p: isize, q: isize) -> Option<usize> {
        let (np, nq) = self.dims(axis);
        if p < 0 || q < 0 || p as usize >= np || q as usize >= nq {
            return None;
        }
        Some(self.frame_cell(axis, p as usize, q as usize))
    }

    pub fn face_count(&self, axis: Axis) -> usize {
        let (np, nq) = self.dims(axis);
        (np + 1) * nq
    }

    pub fn face_index(&self, axis: Axis, p: usize, q: usize) -> usize {
        q * (self.cells_along(axis) + 1) + p
    }

    pub fn face_pq(&self, axis: Axis, f: usize) -> (usize, usize) {
        let np1 = self.cells_along(axis) + 1;
        (f % np1, f / np1)
    }

    pub fn face_center(&self, axis: Axis, p: usize, q: usize) -> Vec2 {
        axis.point(p as f64 * self.h(axis), (q as f64 + 0.5) * self.h(axis.other()))
    }

    /// Length `|f|` of faces normal to `axis`.
    pub fn face_len(&self, axis: Axis) -> f64 {
        self.h(axis.other())
    }

    pub fn is_wall_face(&self, axis: Axis, p: usize) -> bool {
        p == 0 || p == self.cells_along(axis)
    }

    /// Staggered control volume `|omega_f|`; half a cell on walls.
    pub fn face_volume(&self, axis: Axis, p: usize) -> f64 {
        if self.is_wall_face(axis, p) {
            0.5 * self.cell_volume()
        } else {
            self.cell_volume()
        }
    }

    /// Endpoints `(v1, v2)` of face `(p, q)`, ordered so that `v2 - v1` is the
    /// face normal rotated by +90 degrees.
    pub fn face_vertices(&self, axis: Axis, p: usize, q: usize) -> (Vec2, Vec2) {
        let a = p as f64 * self.h(axis);
        let b0 = q as f64 * self.h(axis.other());
        let b1 = b0 + self.h(axis.other());
        match axis {
            Axis::X => (Vec2::new(a, b0), Vec2::new(a, b1)),
            Axis::Y => (Vec2::new(b1, a), Vec2::new(b0, a)),
        }
    }

    /// Vertex indices matching [`Mesh::face_vertices`].
    pub fn face_vertex_ids(&self, axis: Axis, p: usize, q: usize) -> (usize, usize) {
        match axis {
            Axis::X => (self.vertex_index(p, q), self.vertex_index(p, q + 1)),
            Axis::Y => (self.vertex_index(q + 1, p), self.vertex_index(q, p)),
        }
    }

    pub fn n_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn vertex_position(&self, v: usize) -> Vec2 {
        let i = v % (self.nx + 1);
        let j = v / (self.nx + 1);
        Vec2::new(i as f64 * self.hx, j as f64 * self.hy)
    }

    /// Number of centre and corner staggered faces for the `axis` family.
    pub fn stag_counts(&self, axis: Axis) -> (usize, usize) {
        let (np, nq) = self.dims(axis);
        (np * nq, (np + 1) * (nq + 1))
    }

    /// `|g|` of the corner staggered face at vertex `(p, q)` of the `axis`
    /// family; half-length where the vertex lies on a wall normal to `axis`.
    pub fn corner_len(&self, axis: Axis, p: usize) -> f64 {
        let np = self.cells_along(axis);
        let k = (p >= 1) as usize + (p < np) as usize;
        0.5 * self.h(axis) * k as f64
    }

    /// `|g|` of centre staggered faces of the `axis` family.
    pub fn center_len(&self, axis: Axis) -> f64 {
        self.h(axis.other())
    }

    pub fn mean_h(&self) -> f64 {
        (self.hx * self.hy).sqrt()
    }
}

/// One value per cell, row-major (`j * nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredField {
    pub data: Vec<f64>,
}

impl CenteredField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { data: vec![0.0; mesh.n_cells()] }
    }

    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(mesh.n_cells());
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                data.push(f(i, j));
            }
        }
        Self { data }
    }

    pub fn filled(mesh: &Mesh, v: f64) -> Self {
        Self { data: vec![v; mesh.n_cells()] }
    }

    /// Volume integral `sum |c| a_c`.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        mesh.cell_volume() * self.data.iter().sum::<f64>()
    }
}

/// One value per face, both orientations, stored per frame.
/// Index with [`Mesh::face_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub comp: [Vec<f64>; 2],
}

impl FaceField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { comp: [vec![0.0; mesh.face_count(Axis::X)], vec![0.0; mesh.face_count(Axis::Y)]] }
    }

    /// Fill every face with `f(axis, p, q)`.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(Axis, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(mesh);
        for axis in Axis::BOTH {
            let (np, nq) = mesh.dims(axis);
            for q in 0..nq {
                for p in 0..=np {
                    out.comp[axis.index()][mesh.face_index(axis, p, q)] = f(axis, p, q);
                }
            }
        }
        out
    }

    pub fn get(&self, mesh: &Mesh, axis: Axis, p: usize, q: usize) -> f64 {
        self.comp[axis.index()][mesh.face_index(axis, p, q)]
    }

    pub fn set(&mut self, mesh: &Mesh, axis: Axis, p: usize, q: usize, v: f64) {
        self.comp[axis.index()][mesh.face_index(axis, p, q)] = v;
    }

    /// Value on x-face `(i, j)` at `x = i * hx`.
    pub fn x_face(&self, mesh: &Mesh, i: usize, j: usize) -> f64 {
        self.get(mesh, Axis::X, i, j)
    }

    /// Value on y-face `(i, j)` at `y = j * hy`.
    pub fn y_face(&self, mesh: &Mesh, i: usize, j: usize) -> f64 {
        self.get(mesh, Axis::Y, j, i)
    }

    /// Zero the normal values on the walls.
    pub fn zero_walls(&mut self, mesh: &Mesh) {
        for axis in Axis::BOTH {
            let (np, nq) = mesh.dims(axis);
            for q in 0..nq {
                self.set(mesh, axis, 0, q, 0.0);
                self.set(mesh, axis, np, q, 0.0);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comp.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Staggered volume integral `sum |omega_f| w_f`.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        let mut s = 0.0;
        for axis in Axis::BOTH {
            let (np, nq) = mesh.dims(axis);
            for q in 0..nq {
                for p in 0..=np {
                    s += mesh.face_volume(axis, p) * self.get(mesh, axis, p, q);
                }
            }
        }
        s
    }
}

/// Values on the faces `g` of the staggered control volumes.
///
/// Per family `a`: `center[a]` holds faces normal to `a` sitting at cell
/// centres (between `a`-faces `p` and `p + 1`, index `q * np + p`), and
/// `corner[a]` holds faces normal to the other axis sitting at vertices
/// (between `a`-faces `(p, q - 1)` and `(p, q)`, index `q * (np + 1) + p`).
#[derive(Clone, Debug, PartialEq)]
pub struct StagFaceField {
    pub center: [Vec<f64>; 2],
    pub corner: [Vec<f64>; 2],
}

impl StagFaceField {
    pub fn zeros(mesh: &Mesh) -> Self {
        let (cx, kx) = mesh.stag_counts(Axis::X);
        let (cy, ky) = mesh.stag_counts(Axis::Y);
        Self { center: [vec![0.0; cx], vec![0.0; cy]], corner: [vec![0.0; kx], vec![0.0; ky]] }
    }

    pub fn center_at(&self, mesh: &Mesh, axis: Axis, p: usize, q: usize) -> f64 {
        self.center[axis.index()][q * mesh.cells_along(axis) + p]
    }

    pub fn corner_at(&self, mesh: &Mesh, axis: Axis, p: usize, q: usize) -> f64 {
        self.corner[axis.index()][q * (mesh.cells_along(axis) + 1) + p]
    }
}

/// `(D m)_c = (1/|c|) sum_f |f| o_{c,f} m_f`.
pub fn div(mesh: &Mesh, m: &FaceField) -> CenteredField {
    CenteredField::from_fn(mesh, |i, j| {
        (m.x_face(mesh, i + 1, j) - m.x_face(mesh, i, j)) / mesh.hx
            + (m.y_face(mesh, i, j + 1) - m.y_face(mesh, i, j)) / mesh.hy
    })
}

/// `(G p)_f`, the negative adjoint of [`div`]; zero on walls.
pub fn grad(mesh: &Mesh, p: &CenteredField) -> FaceField {
    FaceField::from_fn(mesh, |axis, a, q| {
        if mesh.is_wall_face(axis, a) {
            return 0.0;
        }
        let hi = p.data[mesh.frame_cell(axis, a, q)];
        let lo = p.data[mesh.frame_cell(axis, a - 1, q)];
        (hi - lo) / mesh.h(axis)
    })
}

/// Cell-to-face volume-weighted average `|omega_f| (I a)_f = 1/2 sum_c |c| a_c`.
pub fn interp_c2f(mesh: &Mesh, a: &CenteredField) -> FaceField {
    FaceField::from_fn(mesh, |axis, p, q| {
        let np = mesh.cells_along(axis);
        if p == 0 {
            a.data[mesh.frame_cell(axis, 0, q)]
        } else if p == np {
            a.data[mesh.frame_cell(axis, np - 1, q)]
        } else {
            0.5 * (a.data[mesh.frame_cell(axis, p - 1, q)] + a.data[mesh.frame_cell(axis, p, q)])
        }
    })
}

/// Staggered divergence `|omega_f| (D~ T)_f = sum_g o~_{f,g} |g| T_g`.
/// Wall-coincident staggered faces carry no flux.
pub fn stag_div(mesh: &Mesh, t: &StagFaceField) -> FaceField {
    FaceField::from_fn(mesh, |axis, p, q| stag_div_at(mesh, t, axis, p, q))
}

pub(crate) fn stag_div_at(mesh: &Mesh, t: &StagFaceField, axis: Axis, p: usize, q: usize) -> f64 {
    let (np, _) = mesh.dims(axis);
    let hc = mesh.center_len(axis);
    let mut s = 0.0;
    if p < np {
        s += hc * t.center_at(mesh, axis, p, q);
    }
    if p > 0 {
        s -= hc * t.center_at(mesh, axis, p - 1, q);
    }
    let hk = mesh.corner_len(axis, p);
    s += hk * (t.corner_at(mesh, axis, p, q + 1) - t.corner_at(mesh, axis, p, q));
    s / mesh.face_volume(axis, p)
}

/// Walk every staggered face of every family: `f(axis, is_corner, p, q, idx)`.
fn for_each_stag(mesh: &Mesh, mut f: impl FnMut(Axis, bool, usize, usize, usize)) {
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        for q in 0..nq {
            for p in 0..np {
                f(axis, false, p, q, q * np + p);
            }
        }
        for q in 0..=nq {
            for p in 0..=np {
                f(axis, true, p, q, q * (np + 1) + p);
            }
        }
    }
}

fn stag_from_fn(mesh: &Mesh, mut f: impl FnMut(Axis, bool, usize, usize) -> f64) -> StagFaceField {
    let mut out = StagFaceField::zeros(mesh);
    for_each_stag(mesh, |axis, corner, p, q, idx| {
        let v = f(axis, corner, p, q);
        if corner {
            out.corner[axis.index()][idx] = v;
        } else {
            out.center[axis.index()][idx] = v;
        }
    });
    out
}

/// Distance `h~_g` between the nodes of the two faces adjacent to `g`.
pub fn stag_spacing(mesh: &Mesh, axis: Axis, corner: bool) -> f64 {
    if corner {
        mesh.h(axis.other())
    } else {
        mesh.h(axis)
    }
}

/// `|omega~_g| = |g| h~_g`, the weight making [`stag_grad`] adjoint to [`stag_div`].
pub fn stag_volume(mesh: &Mesh, axis: Axis, corner: bool, p: usize) -> f64 {
    let len = if corner { mesh.corner_len(axis, p) } else { mesh.center_len(axis) };
    len * stag_spacing(mesh, axis, corner)
}

/// The two `axis`-faces straddling staggered face `(p, q)` as `(minus, plus)`;
/// `None` where the face would lie outside the mesh.
pub fn stag_neighbors(
    mesh: &Mesh,
    axis: Axis,
    corner: bool,
    p: usize,
    q: usize,
) -> (Option<(usize, usize)>, Option<(usize, usize)>) {
    let (_, nq) = mesh.dims(axis);
    if corner {
        let lo = if q > 0 { Some((p, q - 1)) } else { None };
        let hi = if q < nq { Some((p, q)) } else { None };
        (lo, hi)
    } else {
        (Some((p, q)), Some((p + 1, q)))
    }
}

/// Staggered gradient `(G~ u)_g = -(1/h~_g) sum_f o~_{f,g} u_f`, one-sided with
/// zero data outside the mesh.
pub fn stag_grad(mesh: &Mesh, u: &FaceField) -> StagFaceField {
    stag_from_fn(mesh, |axis, corner, p, q| {
        let (lo, hi) = stag_neighbors(mesh, axis, corner, p, q);
        let val = |f: Option<(usize, usize)>| f.map_or(0.0, |(a, b)| u.get(mesh, axis, a, b));
        (val(hi) - val(lo)) / stag_spacing(mesh, axis, corner)
    })
}

/// Equal-weight interpolation `1/2 sum_{f in F^omega(g)} phi_f`.
pub fn interp_equal_weight(mesh: &Mesh, phi: &FaceField) -> StagFaceField {
    stag_from_fn(mesh, |axis, corner, p, q| {
        let (lo, hi) = stag_neighbors(mesh, axis, corner, p, q);
        let val = |f: Option<(usize, usize)>| f.map_or(0.0, |(a, b)| phi.get(mesh, axis, a, b));
        0.5 * (val(lo) + val(hi))
    })
}

/// Face-to-staggered-face interpolation
/// `|g| (J m)_g = 1/2 sum_{f in F(g)} (n_g . n_f) |f| m_f`.
pub fn interp_f2g(mesh: &Mesh, m: &FaceField) -> StagFaceField {
    stag_from_fn(mesh, |axis, corner, p, q| f2g_at(mesh, m, axis, corner, p, q))
}

pub(crate) fn f2g_at(mesh: &Mesh, m: &FaceField, axis: Axis, corner: bool, p: usize, q: usize) -> f64 {
    if corner {
        // Faces normal to the other axis on the line through vertex (p, q).
        let np = mesh.cells_along(axis);
        let other = axis.other();
        let mut s = 0.0;
        let mut k = 0;
        if p >= 1 {
            s += m.get(mesh, other, q, p - 1);
            k += 1;
        }
        if p < np {
            s += m.get(mesh, other, q, p);
            k += 1;
        }
        if k == 0 {
            0.0
        } else {
            s / k as f64
        }
    } else {
        0.5 * (m.get(mesh, axis, p, q) + m.get(mesh, axis, p + 1, q))
    }
}

/// `max_f |(D~ J m)_f - (I D m)_f|`, the discrete mass-connection residual.
pub fn check_connection(mesh: &Mesh, m: &FaceField) -> f64 {
    let lhs = stag_div(mesh, &interp_f2g(mesh, m));
    let rhs = interp_c2f(mesh, &div(mesh, m));
    lhs.comp
        .iter()
        .flatten()
        .zip(rhs.comp.iter().flatten())
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

/// Inner product `sum |c| a b` over cells.
pub fn dot_cells(mesh: &Mesh, a: &CenteredField, b: &CenteredField) -> f64 {
    mesh.cell_volume() * a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>()
}

/// Inner product `sum |omega_f| a b` over faces.
pub fn dot_faces(mesh: &Mesh, a: &FaceField, b: &FaceField) -> f64 {
    let mut s = 0.0;
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        for q in 0..nq {
            for p in 0..=np {
                let k = mesh.face_index(axis, p, q);
                s += mesh.face_volume(axis, p) * a.comp[axis.index()][k] * b.comp[axis.index()][k];
            }
        }
    }
    s
}

/// Inner product `sum |omega~_g| a b` over staggered faces.
pub fn dot_stag(mesh: &Mesh, a: &StagFaceField, b: &StagFaceField) -> f64 {
    let mut s = 0.0;
    for_each_stag(mesh, |axis, corner, p, _q, idx| {
        let w = stag_volume(mesh, axis, corner, p);
        s += if corner {
            w * a.corner[axis.index()][idx] * b.corner[axis.index()][idx]
        } else {
            w * a.center[axis.index()][idx] * b.center[axis.index()][idx]
        };
    });
    s
}

/// Pointwise product of two staggered fields.
pub fn stag_mul(a: &StagFaceField, b: &StagFaceField) -> StagFaceField {
    let mul = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(u, v)| u * v).collect::<Vec<_>>();
    StagFaceField {
        center: [mul(&a.center[0], &b.center[0]), mul(&a.center[1], &b.center[1])],
        corner: [mul(&a.corner[0], &b.corner[0]), mul(&a.corner[1], &b.corner[1])],
    }
}

/// Face velocities `u_f = (psi(v2) - psi(v1)) / |f|` of a stream function,
/// discretely divergence-free by construction. Walls are set to zero, so
/// `psi` should be constant along the boundary.
pub fn velocity_from_stream(mesh: &Mesh, psi: impl Fn(Vec2) -> f64) -> FaceField {
    let mut u = FaceField::from_fn(mesh, |axis, p, q| {
        let (v1, v2) = mesh.face_vertices(axis, p, q);
        (psi(v2) - psi(v1)) / mesh.face_len(axis)
    });
    u.zero_walls(mesh);
    u
}
