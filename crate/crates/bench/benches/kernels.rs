use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use vofflux_bench::vortex;
use vofflux_core::donating::{build_donating_regions, DrKind};
use vofflux_core::geom::{for_each_grid_piece, shoelace_area};
use vofflux_core::plic::reconstruct_normals;
use vofflux_core::transport::{step, Advection};
use vofflux_core::Vec2;

fn grid_pieces(c: &mut Criterion) {
    // A skewed quadrilateral spanning a few cells, like a large donating region.
    let quad = [Vec2::new(0.11, 0.13), Vec2::new(0.27, 0.09), Vec2::new(0.31, 0.24), Vec2::new(0.08, 0.29)];
    c.bench_function("grid_pieces_quad", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for_each_grid_piece(black_box(&quad), Vec2::new(1.0 / 64.0, 1.0 / 64.0), (64, 64), |_, _, p| s += shoelace_area(p));
            s
        })
    });
}

fn plic(c: &mut Criterion) {
    let mut g = c.benchmark_group("plic_normals");
    for n in [32, 64, 128] {
        let f = vortex(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| reconstruct_normals(&f.mesh, &f.state.alpha, f.config.plic))
        });
    }
    g.finish();
}

fn donating_regions(c: &mut Criterion) {
    let mut g = c.benchmark_group("donating_regions");
    for n in [32, 64, 128] {
        let f = vortex(n);
        g.bench_with_input(BenchmarkId::new("memfpa", n), &f, |b, f| {
            b.iter(|| build_donating_regions(&f.mesh, &f.velocity, f.dt, DrKind::Memfpa))
        });
    }
    g.finish();
}

fn full_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step_two_velocity");
    g.sample_size(10);
    for n in [32, 64] {
        let f = vortex(n);
        let cfg = f.config.transport();
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter_batched(
                || f.state.clone(),
                |mut st| step(&f.mesh, &mut st, Advection::Two { liquid: &f.velocity, gas: &f.velocity }, f.dt, &cfg).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, grid_pieces, plic, donating_regions, full_step);
criterion_main!(benches);
