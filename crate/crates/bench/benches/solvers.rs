use criterion::{criterion_group, criterion_main, Criterion};
use mist_core::synth::{gaussian_phase_phantom, grid_center, smooth_diffusion_phantom};
use mist_core::*;
use std::hint::black_box;

const SIZE: usize = 256;
const PITCH: f64 = 5.8e-6;

fn pairs(count: u64, mode: ForwardMode) -> (Geometry, Vec<SpecklePair>) {
    let g = Geometry::new(1.0, 17_000.0, PITCH).unwrap();
    let c = grid_center(SIZE, SIZE, PITCH);
    let phi = gaussian_phase_phantom(SIZE, SIZE, PITCH, 2.0, 30.0 * PITCH, c).unwrap();
    let d = smooth_diffusion_phantom(SIZE, SIZE, PITCH, 2e-11, 40.0 * PITCH, c).unwrap();
    let zero = ScalarField::zeros(SIZE, SIZE, PITCH).unwrap();
    let diffusion = match mode {
        ForwardMode::Tensor => Diffusion::Tensor {
            xx: &d,
            yy: &d,
            xy: &zero,
        },
        _ => Diffusion::Scalar(&d),
    };
    let pairs = (0..count)
        .map(|i| {
            let r = generate_speckle(&SpeckleSpec {
                seed: 100 + i,
                width: SIZE,
                height: SIZE,
                pitch: PITCH,
                correlation_length: 3.0 * PITCH,
                mean_intensity: 1.0,
                contrast: 0.2,
            })
            .unwrap();
            let s = forward(mode, &r, &phi, diffusion, &g, StencilScheme::FD_MIRROR).unwrap();
            SpecklePair::new(r, s, i.to_string()).unwrap()
        })
        .collect();
    (g, pairs)
}

fn solvers(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let (g, two) = pairs(2, ForwardMode::Simplified);
    c.bench_function("two_shot_256", |b| {
        b.iter(|| solve_two_shot(black_box(&two[0]), black_box(&two[1]), &g, &opts).unwrap())
    });

    let (g, four) = pairs(4, ForwardMode::Full);
    c.bench_function("least_squares_n4_256", |b| {
        b.iter(|| solve_least_squares(black_box(&four), &g, &opts).unwrap())
    });

    let (g, six) = pairs(6, ForwardMode::Tensor);
    c.bench_function("tensor_n6_256", |b| b.iter(|| solve_tensor(black_box(&six), &g, &opts).unwrap()));

    let lap = diffops::laplacian(two[0].reference(), StencilScheme::SPECTRAL).unwrap();
    c.bench_function("integrate_phase_256", |b| {
        b.iter(|| integrate_phase(black_box(&lap), &PoissonOptions::default()).unwrap())
    });
}

criterion_group!(benches, solvers);
criterion_main!(benches);
