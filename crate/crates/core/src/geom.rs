//! Small polygon toolkit: shoelace areas, half-plane clipping and the signed
//! fan triangulation used to integrate oriented (possibly self-intersecting)
//! donating regions over cells.

use smallvec::SmallVec;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Polygon vertex buffer; stays on the stack for everything the fluxing
/// kernels produce.
pub type Polygon = SmallVec<[Vec2; 8]>;

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area, positive for counter-clockwise loops. Summed relative to the
/// first vertex so that small polygons far from the origin keep their digits.
pub fn shoelace_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let o = pts[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += cross(pts[i] - o, pts[i + 1] - o);
    }
    0.5 * s
}

/// The closed half-plane `{x : n . x + d <= 0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub n: Vec2,
    pub d: f64,
}

impl HalfPlane {
    pub fn new(n: Vec2, d: f64) -> Self {
        Self { n, d }
    }

    #[inline]
    pub fn eval(&self, x: Vec2) -> f64 {
        self.n.dot(&x) + self.d
    }

    /// The complementary half-plane.
    pub fn flipped(&self) -> Self {
        Self { n: -self.n, d: -self.d }
    }
}

/// Sutherland-Hodgman clip of `poly` against `{n . x + d <= 0}`.
pub fn clip_halfplane(poly: &[Vec2], n: Vec2, d: f64) -> Polygon {
    clip_by(poly, |x| n.dot(&x) + d)
}

#[inline]
fn clip_by(poly: &[Vec2], eval: impl Fn(Vec2) -> f64) -> Polygon {
    let mut out = Polygon::new();
    let k = poly.len();
    if k == 0 {
        return out;
    }
    let mut prev = poly[k - 1];
    let mut dprev = eval(prev);
    for &cur in poly {
        let dcur = eval(cur);
        if dcur <= 0.0 {
            if dprev > 0.0 {
                out.push(prev + (cur - prev) * (dprev / (dprev - dcur)));
            }
            out.push(cur);
        } else if dprev <= 0.0 {
            out.push(prev + (cur - prev) * (dprev / (dprev - dcur)));
        }
        prev = cur;
        dprev = dcur;
    }
    out
}

/// Split `poly` by the line `eval = 0` into the parts with `eval <= 0` and
/// `eval >= 0`.
pub fn split_by(poly: &[Vec2], eval: impl Fn(Vec2) -> f64) -> (Polygon, Polygon) {
    let (mut neg, mut pos) = (Polygon::new(), Polygon::new());
    let k = poly.len();
    if k == 0 {
        return (neg, pos);
    }
    let mut prev = poly[k - 1];
    let mut dprev = eval(prev);
    for &cur in poly {
        let dcur = eval(cur);
        if (dprev < 0.0 && dcur > 0.0) || (dprev > 0.0 && dcur < 0.0) {
            let x = prev + (cur - prev) * (dprev / (dprev - dcur));
            neg.push(x);
            pos.push(x);
        }
        if dcur <= 0.0 {
            neg.push(cur);
        }
        if dcur >= 0.0 {
            pos.push(cur);
        }
        prev = cur;
        dprev = dcur;
    }
    (neg, pos)
}

/// Cut `poly` along the lines of a uniform grid with spacing `h` and cells
/// `0..n` per axis, calling `f(i, j, piece)` for every non-empty piece.
/// Parts outside the grid are dropped.
pub fn for_each_grid_piece(poly: &[Vec2], h: Vec2, n: (usize, usize), mut f: impl FnMut(usize, usize, &[Vec2])) {
    let (lo, hi) = bounds(poly);
    let range = |lo: f64, hi: f64, h: f64, n: usize| {
        let i0 = ((lo / h).floor().max(0.0) as usize).min(n - 1);
        let i1 = ((hi / h).ceil() as usize).clamp(1, n) - 1;
        (i0, i1)
    };
    let (i0, i1) = range(lo.x, hi.x, h.x, n.0);
    let (j0, j1) = range(lo.y, hi.y, h.y, n.1);
    let mut rest: Polygon = poly.iter().copied().collect();
    if lo.x < i0 as f64 * h.x {
        rest = clip_by(&rest, |x| i0 as f64 * h.x - x.x);
    }
    if hi.x > (i1 + 1) as f64 * h.x {
        rest = clip_by(&rest, |x| x.x - (i1 + 1) as f64 * h.x);
    }
    for i in i0..=i1 {
        if rest.len() < 3 {
            return;
        }
        let column = if i < i1 {
            let (left, right) = split_by(&rest, |x| x.x - (i + 1) as f64 * h.x);
            rest = right;
            left
        } else {
            std::mem::take(&mut rest)
        };
        let mut col = column;
        if col.len() < 3 {
            continue;
        }
        let (clo, chi) = bounds(&col);
        if clo.y < j0 as f64 * h.y {
            col = clip_by(&col, |x| j0 as f64 * h.y - x.y);
        }
        if chi.y > (j1 + 1) as f64 * h.y {
            col = clip_by(&col, |x| x.y - (j1 + 1) as f64 * h.y);
        }
        for j in j0..=j1 {
            if col.len() < 3 {
                break;
            }
            let piece = if j < j1 {
                let (below, above) = split_by(&col, |x| x.y - (j + 1) as f64 * h.y);
                col = above;
                below
            } else {
                std::mem::take(&mut col)
            };
            if piece.len() >= 3 {
                f(i, j, &piece);
            }
        }
    }
}

/// Clip against the axis-aligned box `[lo, hi]`. Sides the polygon does not
/// cross are skipped.
pub fn clip_box(poly: &[Vec2], lo: Vec2, hi: Vec2) -> Polygon {
    let mut p: Polygon = poly.iter().copied().collect();
    let (mut plo, mut phi) = bounds(&p);
    if plo.x < lo.x {
        p = clip_by(&p, |x| lo.x - x.x);
    }
    if phi.x > hi.x {
        p = clip_by(&p, |x| x.x - hi.x);
    }
    if p.len() < 3 {
        return p;
    }
    (plo, phi) = bounds(&p);
    if plo.y < lo.y {
        p = clip_by(&p, |x| lo.y - x.y);
    }
    if phi.y > hi.y {
        p = clip_by(&p, |x| x.y - hi.y);
    }
    p
}

fn bounds(pts: &[Vec2]) -> (Vec2, Vec2) {
    pts.iter().fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(lo, hi), x| (lo.inf(x), hi.sup(x)))
}

/// Counter-clockwise triangle carrying the orientation of the loop edge it
/// was generated from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedTriangle {
    pub v: [Vec2; 3],
    pub sign: f64,
}

impl SignedTriangle {
    pub fn area(&self) -> f64 {
        shoelace_area(&self.v)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let [a, b, c] = self.v;
        (
            Vec2::new(a.x.min(b.x).min(c.x), a.y.min(b.y).min(c.y)),
            Vec2::new(a.x.max(b.x).max(c.x), a.y.max(b.y).max(c.y)),
        )
    }
}

pub type TriangleFan = SmallVec<[SignedTriangle; 6]>;

/// Fan-triangulate the closed loop `pts` from `anchor`. Each edge `(p_i, p_i+1)`
/// yields the triangle `(anchor, p_i, p_i+1)` with the sign of its shoelace
/// area, stored counter-clockwise. The signed sum of the triangle indicator
/// functions equals the winding number of the loop, so a bowtie produces
/// parts of both signs. Triangles with `|area| < min_area` are dropped.
pub fn decompose_region(pts: &[Vec2], anchor: Vec2, min_area: f64) -> TriangleFan {
    let mut out = TriangleFan::new();
    let k = pts.len();
    for i in 0..k {
        let a = pts[i];
        let b = pts[(i + 1) % k];
        let area = 0.5 * cross(a - anchor, b - anchor);
        if area.abs() < min_area {
            continue;
        }
        if area > 0.0 {
            out.push(SignedTriangle { v: [anchor, a, b], sign: 1.0 });
        } else {
            out.push(SignedTriangle { v: [anchor, b, a], sign: -1.0 });
        }
    }
    out
}

/// `sum_t sign_t * |t ∩ [lo, hi] ∩ phase|`.
pub fn signed_intersection_volume(tris: &[SignedTriangle], lo: Vec2, hi: Vec2, phase: Option<HalfPlane>) -> f64 {
    let mut s = 0.0;
    for t in tris {
        let clipped = clip_box(&t.v, lo, hi);
        if clipped.len() < 3 {
            continue;
        }
        let area = match phase {
            Some(h) => shoelace_area(&clip_halfplane(&clipped, h.n, h.d)),
            None => shoelace_area(&clipped),
        };
        s += t.sign * area;
    }
    s
}

/// Area of the intersection of two counter-clockwise triangles.
pub fn triangle_overlap(a: &[Vec2; 3], b: &[Vec2; 3]) -> f64 {
    // A degenerate clipper would have zero edge normals and keep everything.
    if cross(b[1] - b[0], b[2] - b[0]) <= 0.0 || cross(a[1] - a[0], a[2] - a[0]) <= 0.0 {
        return 0.0;
    }
    let mut poly: Polygon = a.iter().copied().collect();
    for i in 0..3 {
        let p = b[i];
        let q = b[(i + 1) % 3];
        let e = q - p;
        // Interior of a CCW triangle lies to the left of each edge.
        let n = Vec2::new(e.y, -e.x);
        poly = clip_halfplane(&poly, n, -n.dot(&p));
        if poly.len() < 3 {
            return 0.0;
        }
    }
    shoelace_area(&poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_triangles_do_not_overlap() {
        let t = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        let flat = [v(0.0, 0.0), v(0.5, 0.0), v(1.0, 0.0)];
        assert_eq!(triangle_overlap(&t, &flat), 0.0);
        assert_eq!(triangle_overlap(&flat, &t), 0.0);
        assert!((triangle_overlap(&t, &t) - 0.5).abs() < 1e-15);
    }

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    /// Winding number of a closed polyline around `x`.
    fn winding(pts: &[Vec2], x: Vec2) -> i32 {
        let mut w = 0;
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            if a.y <= x.y {
                if b.y > x.y && cross(b - a, x - a) > 0.0 {
                    w += 1;
                }
            } else if b.y <= x.y && cross(b - a, x - a) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    fn monte_carlo(pts: &[Vec2], lo: Vec2, hi: Vec2, phase: Option<HalfPlane>, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = 0i64;
        for _ in 0..n {
            let x = v(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if phase.map_or(true, |h| h.eval(x) <= 0.0) {
                s += winding(pts, x) as i64;
            }
        }
        s as f64 / n as f64 * (hi - lo).x * (hi - lo).y
    }

    #[test]
    fn unit_square_area() {
        let sq = [v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)];
        assert_eq!(shoelace_area(&sq), 1.0);
        let cw: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(shoelace_area(&cw), -1.0);
    }

    #[test]
    fn clipping_square_in_half() {
        let sq = [v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)];
        let half = clip_halfplane(&sq, v(1.0, 0.0), -0.5);
        assert!((shoelace_area(&half) - 0.5).abs() < 1e-15);
        assert!(half.iter().all(|p| p.x <= 0.5));
        let diag = clip_halfplane(&sq, v(1.0, 1.0), -1.0);
        assert!((shoelace_area(&diag) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bowtie_has_both_signs_and_zero_net_area() {
        let bow = [v(0., 0.), v(1., 1.), v(1., 0.), v(0., 1.)];
        let tris = decompose_region(&bow, v(0.5, 0.0), 1e-14);
        assert!(tris.iter().any(|t| t.sign > 0.0));
        assert!(tris.iter().any(|t| t.sign < 0.0));
        let net = signed_intersection_volume(&tris, v(-1., -1.), v(2., 2.), None);
        assert!(net.abs() < 1e-15);
        // Each lobe counted separately.
        let right = signed_intersection_volume(&tris, v(0.5, -1.), v(2., 2.), None);
        let left = signed_intersection_volume(&tris, v(-1., -1.), v(0.5, 2.), None);
        assert!((right + 0.25).abs() < 1e-15, "{right}");
        assert!((left - 0.25).abs() < 1e-15, "{left}");
    }

    #[test]
    fn signed_volume_matches_monte_carlo() {
        let lo = v(0.1, 0.0);
        let hi = v(0.9, 0.7);
        let phase = Some(HalfPlane::new(v(0.6, 0.8), -0.45));
        let loops: [Vec<Vec2>; 3] = [
            vec![v(0.5, 0.0), v(0.5, 1.0), v(0.2, 0.9), v(0.1, 0.5), v(0.25, 0.05)],
            vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)],
            vec![v(0.7, 0.1), v(0.3, 0.8), v(0.9, 0.6), v(0.2, 0.2)],
        ];
        for (k, pts) in loops.iter().enumerate() {
            let tris = decompose_region(pts, 0.5 * (pts[0] + pts[1]), 1e-14);
            let exact = signed_intersection_volume(&tris, lo, hi, phase);
            let mc = monte_carlo(pts, lo, hi, phase, 1_000_000, k as u64);
            let scale = (hi - lo).x * (hi - lo).y;
            assert!((exact - mc).abs() <= 2e-3 * scale, "{k}: {exact} vs {mc}");
        }
    }

    #[test]
    fn triangle_overlap_of_shifted_copies() {
        let a = [v(0., 0.), v(2., 0.), v(0., 2.)];
        let b = [v(1., 0.), v(3., 0.), v(1., 2.)];
        // Overlap is the triangle (1,0),(2,0),(1,1).
        assert!((triangle_overlap(&a, &b) - 0.5).abs() < 1e-15);
        let far = [v(5., 5.), v(6., 5.), v(5., 6.)];
        assert_eq!(triangle_overlap(&a, &far), 0.0);
    }

    proptest! {
        #[test]
        fn grid_pieces_match_per_cell_clipping(
            pts in proptest::collection::vec((-0.2f64..1.2, -0.2f64..1.2), 3),
        ) {
            let tri: Vec<Vec2> = pts.iter().map(|&(x, y)| v(x, y)).collect();
            let h = v(0.25, 0.2);
            let mut pieces = Vec::new();
            for_each_grid_piece(&tri, h, (4, 5), |i, j, piece| pieces.push((i, j, shoelace_area(piece))));
            let mut total = 0.0;
            for (i, j, a) in pieces {
                let lo = v(i as f64 * h.x, j as f64 * h.y);
                prop_assert!((a - shoelace_area(&clip_box(&tri, lo, lo + h))).abs() < 1e-14);
                total += a;
            }
            let inside = shoelace_area(&clip_box(&tri, v(0.0, 0.0), v(1.0, 1.0)));
            prop_assert!((total - inside).abs() < 1e-14);
        }

        #[test]
        fn phase_parts_sum_to_bare_cell(
            pts in proptest::collection::vec((-0.5f64..1.5, -0.5f64..1.5), 3..6),
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, d in -1.0f64..1.0,
        ) {
            prop_assume!(nx.abs() + ny.abs() > 1e-3);
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let tris = decompose_region(&pts, pts[0], 1e-14);
            let h = HalfPlane::new(v(nx, ny), d);
            let lo = v(0.0, 0.0);
            let hi = v(1.0, 1.0);
            let bare = signed_intersection_volume(&tris, lo, hi, None);
            let l = signed_intersection_volume(&tris, lo, hi, Some(h));
            let g = signed_intersection_volume(&tris, lo, hi, Some(h.flipped()));
            prop_assert!((l + g - bare).abs() < 1e-13);
        }

        #[test]
        fn fan_total_equals_shoelace(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..7),
            ax in -1.0f64..1.0, ay in -1.0f64..1.0,
        ) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let tris = decompose_region(&pts, v(ax, ay), 0.0);
            let total: f64 = tris.iter().map(|t| t.sign * t.area()).sum();
            prop_assert!((total - shoelace_area(&pts)).abs() < 1e-13);
        }
    }
}
