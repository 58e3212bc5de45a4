//! Analytic velocity fields and initial conditions.

use std::f64::consts::PI;

use crate::mesh::{interp_c2f, velocity_from_stream, Axis, CenteredField, FaceField, Mesh};
use crate::Vec2;

use super::{Case, CaseConfig};

/// Circle radius and centre of the vortex test.
pub const VORTEX_RADIUS: f64 = 0.15;
pub const VORTEX_CENTER: [f64; 2] = [0.5, 0.75];
/// Circle centre of the rotation test (same radius).
pub const ROTATION_CENTER: [f64; 2] = [0.5, 0.7];
/// Rigidly rotating core and outer radius of the rotation test.
pub const ROTATION_CORE: f64 = 0.4;
pub const ROTATION_OUTER: f64 = 0.5;
/// Liquid strip width of the translation test.
pub const STRIP_WIDTH: f64 = 0.25;

/// Vortex stream function `cos(pi t/T)/pi sin^2(pi x) sin^2(pi y)`.
pub fn vortex_stream(t: f64, period: f64, x: Vec2) -> f64 {
    (PI * t / period).cos() / PI * (PI * x.x).sin().powi(2) * (PI * x.y).sin().powi(2)
}

/// Point velocity `(psi_y, -psi_x)` of the vortex.
pub fn velocity_vortex2d(t: f64, period: f64, x: Vec2) -> Vec2 {
    let c = (PI * t / period).cos();
    let (sx, sy) = ((PI * x.x).sin(), (PI * x.y).sin());
    Vec2::new(c * sx * sx * (2.0 * PI * x.y).sin(), -c * sy * sy * (2.0 * PI * x.x).sin())
}

/// Stream function of a rigid core rotation at angular speed `omega`
/// decaying smoothly to rest between `ROTATION_CORE` and `ROTATION_OUTER`.
/// `psi' = -Omega(r) r`, so the flow is counter-clockwise.
pub fn rotation_stream(omega: f64, x: Vec2) -> f64 {
    let r = (x - Vec2::new(0.5, 0.5)).norm();
    let (ri, d) = (ROTATION_CORE, ROTATION_OUTER - ROTATION_CORE);
    let core = 0.5 * ri * ri;
    // int_0^z (1 - 3s^2 + 2s^3)(ri + d s) d ds
    let ring = |z: f64| d * (ri * z + 0.5 * d * z * z - ri * z.powi(3) + (2.0 * ri - 3.0 * d) * z.powi(4) / 4.0 + 0.4 * d * z.powi(5));
    let integral = if r <= ri {
        0.5 * r * r
    } else if r < ri + d {
        core + ring((r - ri) / d)
    } else {
        core + ring(1.0)
    };
    -omega * integral
}

/// Face velocities of `config.case` at time `t`.
pub fn face_velocity(mesh: &Mesh, config: &CaseConfig, t: f64) -> FaceField {
    let s = config.speed;
    match config.case {
        Case::Vortex2d | Case::NoInterface => velocity_from_stream(mesh, |x| s * vortex_stream(t, config.period, x)),
        Case::Rotation => {
            let omega = 2.0 * PI / config.period;
            velocity_from_stream(mesh, |x| s * rotation_stream(omega, x))
        }
        Case::Translation => {
            let mut u = FaceField::from_fn(mesh, |axis, _, _| if axis == Axis::X { s } else { 0.0 });
            u.zero_walls(mesh);
            u
        }
    }
}

/// `int_a^b sqrt(r^2 - u^2) du` for `a, b` in `[-r, r]`.
fn half_chord_integral(r: f64, a: f64, b: f64) -> f64 {
    let g = |u: f64| {
        let u = u.clamp(-r, r);
        0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
    };
    g(b) - g(a)
}

/// Exact area of the intersection of the disc `|x - c| < r` with the box `[lo, hi]`.
pub fn circle_box_area(c: Vec2, r: f64, lo: Vec2, hi: Vec2) -> f64 {
    let (x0, x1) = (lo.x.max(c.x - r), hi.x.min(c.x + r));
    if x0 >= x1 {
        return 0.0;
    }
    // Breakpoints where a chord end crosses the box's horizontal edges.
    let mut xs = vec![x0, x1];
    for y in [lo.y, hi.y] {
        let dy = y - c.y;
        if dy.abs() < r {
            let w = (r * r - dy * dy).sqrt();
            xs.extend([c.x - w, c.x + w].into_iter().filter(|&x| x > x0 && x < x1));
        }
    }
    xs.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for win in xs.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let w = (r * r - (m - c.x).powi(2)).max(0.0).sqrt();
        // Each chord end is either clamped to a box edge over the whole
        // sub-interval or follows the circle.
        let top = if c.y + w >= hi.y {
            hi.y * (b - a)
        } else if c.y + w <= lo.y {
            lo.y * (b - a)
        } else {
            c.y * (b - a) + half_chord_integral(r, a - c.x, b - c.x)
        };
        let bottom = if c.y - w <= lo.y {
            lo.y * (b - a)
        } else if c.y - w >= hi.y {
            hi.y * (b - a)
        } else {
            c.y * (b - a) - half_chord_integral(r, a - c.x, b - c.x)
        };
        area += (top - bottom).max(0.0);
    }
    area
}

/// Cell liquid fractions of a disc from exact areas.
pub fn circle_fraction(mesh: &Mesh, c: Vec2, r: f64) -> CenteredField {
    CenteredField::from_fn(mesh, |i, j| {
        let (lo, hi) = mesh.cell_bounds(i, j);
        (circle_box_area(c, r, lo, hi) / mesh.cell_volume()).clamp(0.0, 1.0)
    })
}

/// Liquid fractions of the strip `[x_lo, x_lo + STRIP_WIDTH] x [0, ly]`.
pub fn strip_fraction(mesh: &Mesh, x_lo: f64) -> CenteredField {
    CenteredField::from_fn(mesh, |i, _| {
        let a = (i as f64 * mesh.hx()).max(x_lo);
        let b = ((i + 1) as f64 * mesh.hx()).min(x_lo + STRIP_WIDTH);
        ((b - a) / mesh.hx()).clamp(0.0, 1.0)
    })
}

/// Liquid fraction at `t = 0`.
pub fn initial_alpha(mesh: &Mesh, case: Case) -> CenteredField {
    match case {
        Case::Vortex2d => circle_fraction(mesh, Vec2::from(VORTEX_CENTER), VORTEX_RADIUS),
        Case::Rotation => circle_fraction(mesh, Vec2::from(ROTATION_CENTER), VORTEX_RADIUS),
        Case::Translation => strip_fraction(mesh, 0.0),
        Case::NoInterface => CenteredField::filled(mesh, 1.0),
    }
}

/// Exact liquid fraction at `t`: the initial one for the periodic flows, the
/// shifted strip for translation.
pub fn exact_alpha(mesh: &Mesh, config: &CaseConfig, t: f64) -> CenteredField {
    match config.case {
        Case::Translation => strip_fraction(mesh, config.speed * t),
        case => initial_alpha(mesh, case),
    }
}

/// Per-phase staggered test fields: the x-component of an unresolved shear
/// layer (`sin 4 pi x sin 4 pi y` in the liquid, `cos 2 pi x cos 2 pi y` in
/// the gas), zero y-component. Translation uses constants.
pub fn phase_fields(mesh: &Mesh, case: Case) -> [FaceField; 2] {
    let f = |g: fn(Vec2) -> f64| FaceField::from_fn(mesh, |axis, p, q| if axis == Axis::X { g(mesh.face_center(axis, p, q)) } else { 0.0 });
    match case {
        Case::Translation => [f(|_| 1.0), f(|_| 0.5)],
        _ => [
            f(|x| (4.0 * PI * x.x).sin() * (4.0 * PI * x.y).sin()),
            f(|x| (2.0 * PI * x.x).cos() * (2.0 * PI * x.y).cos()),
        ],
    }
}

/// Mass-weighted merge `sum rho sigma alpha phi / sum rho sigma alpha`.
pub fn merge_fields(mesh: &Mesh, alpha: &CenteredField, phi: &[FaceField; 2], rho: [f64; 2]) -> FaceField {
    let sl = interp_c2f(mesh, alpha);
    let mut out = phi[0].clone();
    for k in 0..2 {
        for (f, v) in out.comp[k].iter_mut().enumerate() {
            let (ml, mg) = (rho[0] * sl.comp[k][f], rho[1] * (1.0 - sl.comp[k][f]));
            *v = (ml * phi[0].comp[k][f] + mg * phi[1].comp[k][f]) / (ml + mg);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_velocity_matches_stream_derivatives() {
        let h = 1e-6;
        for &(x, y, t) in &[(0.3, 0.6, 0.1), (0.71, 0.22, 0.4), (0.5, 0.75, 0.0)] {
            let p = Vec2::new(x, y);
            let psi = |q: Vec2| vortex_stream(t, 1.0, q);
            let fd = Vec2::new(
                (psi(p + Vec2::new(0.0, h)) - psi(p - Vec2::new(0.0, h))) / (2.0 * h),
                -(psi(p + Vec2::new(h, 0.0)) - psi(p - Vec2::new(h, 0.0))) / (2.0 * h),
            );
            assert!((velocity_vortex2d(t, 1.0, p) - fd).norm() < 1e-8);
        }
        assert!(velocity_vortex2d(0.5, 1.0, Vec2::new(0.3, 0.4)).norm() < 1e-15);
        assert!(velocity_vortex2d(0.2, 1.0, Vec2::new(0.0, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn rotation_is_rigid_in_the_core_and_at_rest_outside() {
        let omega = 2.0;
        let h = 1e-6;
        let vel = |p: Vec2| {
            let psi = |q: Vec2| rotation_stream(omega, q);
            Vec2::new(
                (psi(p + Vec2::new(0.0, h)) - psi(p - Vec2::new(0.0, h))) / (2.0 * h),
                -(psi(p + Vec2::new(h, 0.0)) - psi(p - Vec2::new(h, 0.0))) / (2.0 * h),
            )
        };
        let p = Vec2::new(0.6, 0.7);
        let rigid = omega * Vec2::new(-(p.y - 0.5), p.x - 0.5);
        assert!((vel(p) - rigid).norm() < 1e-8);
        assert!(vel(Vec2::new(0.95, 0.95)).norm() < 1e-8);
        // Continuous across the outer radius.
        let a = rotation_stream(omega, Vec2::new(0.5 + ROTATION_OUTER - 1e-9, 0.5));
        let b = rotation_stream(omega, Vec2::new(0.5 + ROTATION_OUTER + 1e-9, 0.5));
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn circle_areas() {
        let c = Vec2::new(0.5, 0.75);
        // Fully inside, fully outside, and the full disc.
        assert!((circle_box_area(c, 0.15, Vec2::new(0.48, 0.73), Vec2::new(0.52, 0.77)) - 0.04f64.powi(2)).abs() < 1e-15);
        assert_eq!(circle_box_area(c, 0.15, Vec2::new(0.0, 0.0), Vec2::new(0.1, 0.1)), 0.0);
        assert!((circle_box_area(c, 0.15, Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)) - PI * 0.0225).abs() < 1e-15);
        // Quarter disc.
        assert!((circle_box_area(c, 0.15, c, Vec2::new(1.0, 1.0)) - PI * 0.0225 / 4.0).abs() < 1e-15);
        // Half-plane cut at y = c.y + 0.05: segment area r^2 acos(d/r) - d sqrt(r^2-d^2).
        let (r, d) = (0.15f64, 0.05f64);
        let seg = r * r * (d / r).acos() - d * (r * r - d * d).sqrt();
        assert!((circle_box_area(c, r, Vec2::new(0.0, c.y + d), Vec2::new(1.0, 1.0)) - seg).abs() < 1e-15);
    }

    #[test]
    fn circle_fractions_sum_to_disc_area() {
        let mesh = Mesh::unit(128).unwrap();
        let a = circle_fraction(&mesh, Vec2::from(VORTEX_CENTER), VORTEX_RADIUS);
        assert!((a.integral(&mesh) - PI * VORTEX_RADIUS * VORTEX_RADIUS).abs() < 1e-10);
        let (i, j) = ((0.5 * 128.0) as usize, (0.75 * 128.0) as usize);
        assert_eq!(a.data[mesh.cell_index(i, j)], 1.0);
        assert_eq!(a.data[mesh.cell_index(3, 3)], 0.0);
    }

    #[test]
    fn merged_field_weights_by_mass() {
        let mesh = Mesh::unit(4).unwrap();
        let alpha = CenteredField::filled(&mesh, 0.5);
        let phi = [FaceField::from_fn(&mesh, |_, _, _| 1.0), FaceField::zeros(&mesh)];
        let m = merge_fields(&mesh, &alpha, &phi, [1.0, 1.0]);
        assert!(m.comp.iter().flatten().all(|v| (v - 0.5).abs() < 1e-15));
    }
}
