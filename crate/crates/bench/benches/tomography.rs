use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use timebin::pipeline::run_cell;
use timebin::povm::jittered_operator;
use timebin::simulate::simulate_state;
use timebin::states::sample_state_grid;
use timebin::tomography::{reconstruct_ls, reconstruct_mle};
use timebin::wavepacket::{BETA_SMF28_S2_PER_M, PS2_PER_S2};
use timebin::{CellSpec, FiberConfig, JitterConfig, Method, PulseConfig, SystemKind};

const SEED: u64 = 2024;
const BETA_PS2_PER_M: f64 = BETA_SMF28_S2_PER_M * PS2_PER_S2;

fn operators(c: &mut Criterion) {
    let fiber = FiberConfig::new(BETA_PS2_PER_M, 500.0).unwrap();
    let mut group = c.benchmark_group("jittered_operator");
    for bins in [2, 3, 4] {
        let pulse = PulseConfig::with_dim(bins).unwrap();
        let jitter = JitterConfig::new(4.0).unwrap();
        group.bench_function(format!("d{bins}"), |b| {
            b.iter(|| jittered_operator(black_box(1.3), &pulse, &fiber, &jitter))
        });
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct");
    for system in [SystemKind::Qubit, SystemKind::Qutrit, SystemKind::Entangled] {
        let experiment = CellSpec::new(system, 500.0, 1.0, SEED)
            .experiment()
            .unwrap();
        let rho = system.states(3, 3).unwrap().remove(1);
        let counts = simulate_state(&rho, &experiment, 0).unwrap().sampled;
        let photons = experiment.config.photons as f64;
        let povm = &experiment.povm;
        group.bench_function(format!("ls_{system}"), |b| {
            b.iter(|| reconstruct_ls(black_box(&counts), povm, photons).unwrap())
        });
        group.bench_function(format!("mle_{system}"), |b| {
            b.iter(|| reconstruct_mle(black_box(&counts), povm, photons).unwrap())
        });
    }
    group.finish();
}

fn cells(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell");
    group.sample_size(10);
    let states = sample_state_grid(2, 3).unwrap();
    let spec = CellSpec::new(SystemKind::Qubit, 200.0, 4.0, SEED);
    group.bench_function("qubit_27_states_both", |b| {
        b.iter(|| run_cell(&spec, &states, &[Method::Ls, Method::Mle]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, operators, reconstruction, cells);
criterion_main!(benches);
