use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nlch_core::diagnostics::{degiorgi_sequences, DeGiorgiParams, LevelSign};
use nlch_core::potential::PotentialParams;
use nlch_core::{
    step, BoundaryMode, ConvolutionMode, Domain, Field, Kernel, KernelSpec, Potential, RunSettings, SimState,
    SolverConfig, Trajectory,
};

const GAUSSIAN: KernelSpec = KernelSpec::Gaussian {
    sigma: 0.1,
    amplitude: 2.0,
};

fn potential() -> Potential {
    Potential::flory_huggins(PotentialParams::flory_huggins(1.0, 0.5, 0.25).unwrap())
}

fn wavy(domain: &Domain) -> Field {
    Field::from_fn(domain, |x| 0.5 * x.iter().map(|v| (7.0 * v).sin()).product::<f64>())
}

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve");
    for (label, cells) in [("1d-64", vec![64]), ("1d-256", vec![256]), ("2d-32", vec![32, 32])] {
        let extents = vec![1.0; cells.len()];
        let domain = Domain::new(extents, cells, BoundaryMode::Neumann).unwrap();
        let kernel = Kernel::build(&GAUSSIAN, &domain, ConvolutionMode::Truncated).unwrap();
        let phi = wavy(&domain);
        group.bench_with_input(BenchmarkId::new("fft", label), &phi, |b, phi| {
            b.iter(|| kernel.convolve(black_box(phi)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("direct", label), &phi, |b, phi| {
            b.iter(|| kernel.convolve_direct(black_box(phi), None).unwrap())
        });
    }
    group.finish();
}

fn time_step(c: &mut Criterion) {
    let pot = potential();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("step");
    for (label, cells) in [("1d-256", vec![256]), ("2d-64", vec![64, 64])] {
        let extents = vec![1.0; cells.len()];
        let domain = Domain::new(extents, cells, BoundaryMode::Neumann).unwrap();
        let kernel = Kernel::build(&GAUSSIAN, &domain, ConvolutionMode::Truncated).unwrap();
        let state = SimState::new(wavy(&domain), 0.0, &kernel, &pot).unwrap();
        group.bench_function(label, |b| {
            b.iter(|| step(black_box(&state), 1e-3, &kernel, &pot, &cfg).unwrap())
        });
    }
    group.finish();
}

fn degiorgi(c: &mut Criterion) {
    let domain = Domain::unit_1d(256, BoundaryMode::Neumann).unwrap();
    let kernel = Kernel::build(&GAUSSIAN, &domain, ConvolutionMode::Truncated).unwrap();
    let pot = potential();
    let settings = RunSettings {
        dt: 1e-3,
        t_end: 0.2,
        snapshot_every: 2,
        solver: SolverConfig::default(),
    };
    let phi0 = Field::from_fn(&domain, |x| 0.95 * (20.0 * (x[0] - 0.5)).tanh());
    let traj: Trajectory = nlch_core::dynamics::run(phi0, &kernel, &pot, &settings).unwrap();
    let dp = DeGiorgiParams {
        t_final: 0.2,
        tau_tilde: 0.05,
        delta: 0.02,
        n_levels: 20,
        sign: LevelSign::Plus,
    };
    c.bench_function("degiorgi/1d-256", |b| {
        b.iter(|| degiorgi_sequences(black_box(&traj), &dp, kernel.l1_grad_j(), &pot).unwrap())
    });
}

criterion_group!(benches, convolution, time_step, degiorgi);
criterion_main!(benches);
