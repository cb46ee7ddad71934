mod common;

use common::{random_mixed, random_pure, rng};
use timebin::linalg;
use timebin::povm::{select_time_grid, single_photon_povm};
use timebin::simulate::poisson_sample;
use timebin::states::{fidelity, phi_plus};
use timebin::tomography::{
    average_fidelity, reconstruct, reconstruct_expected, reconstruct_ls, reconstruct_mle,
};
use timebin::{
    CellSpec, DensityMatrix, Experiment, FiberConfig, JitterConfig, MeasurementOperator, Method,
    PulseConfig, SystemKind,
};

fn povm(dim: usize, length: f64, sigma_d: f64) -> Vec<MeasurementOperator> {
    let p = PulseConfig::with_dim(dim).unwrap();
    let f = FiberConfig::smf28(length).unwrap();
    let g = select_time_grid(&p, &f, 26, 0.05).unwrap();
    single_photon_povm(&g, &p, &f, &JitterConfig::new(sigma_d).unwrap())
}

fn noiseless(rho: &DensityMatrix, ops: &[MeasurementOperator], photons: f64) -> Vec<f64> {
    timebin::simulate::expected_counts(rho, ops, photons).unwrap()
}

fn assert_physical(rho: &DensityMatrix) {
    let m = rho.matrix();
    assert!(linalg::hermiticity_defect(m) < 1e-12);
    assert!((linalg::real_trace(m) - 1.0).abs() < 1e-10);
    assert!(linalg::min_eigenvalue(m) > -1e-10);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn noiseless_least_squares() {
    let ops = povm(2, 500.0, 0.0);
    let mut r = rng(1);
    for _ in 0..25 {
        let rho = random_pure(2, &mut r);
        let out =
            reconstruct_expected(Method::Ls, &noiseless(&rho, &ops, 1000.0), &ops, 1000.0).unwrap();
        assert_physical(&out.rho_out);
        assert!(fidelity(&rho, &out.rho_out).unwrap() >= 0.999);
        assert!(out.objective_value.is_finite());
    }
}

#[test]
fn noiseless_maximum_likelihood() {
    let ops = povm(2, 200.0, 0.0);
    let mut r = rng(2);
    for _ in 0..25 {
        let rho = random_pure(2, &mut r);
        let out = reconstruct_expected(Method::Mle, &noiseless(&rho, &ops, 1000.0), &ops, 1000.0)
            .unwrap();
        assert!(fidelity(&rho, &out.rho_out).unwrap() >= 0.99);
    }
}

#[test]
fn noiseless_higher_dimensions() {
    let mut r = rng(3);
    let ops = povm(3, 200.0, 1.0);
    for _ in 0..10 {
        let rho = random_mixed(3, &mut r);
        for method in [Method::Ls, Method::Mle] {
            let out = reconstruct_expected(method, &noiseless(&rho, &ops, 1e4), &ops, 1e4).unwrap();
            assert!(fidelity(&rho, &out.rho_out).unwrap() > 0.999, "{method}");
        }
    }
    let spec = CellSpec::new(SystemKind::Entangled, 500.0, 0.0, 1);
    let exp = spec.experiment().unwrap();
    let photons = exp.config.photons as f64;
    for phi in [0.0, 1.0, 4.0] {
        let rho = phi_plus(phi);
        let out = reconstruct_expected(
            Method::Ls,
            &noiseless(&rho, &exp.povm, photons),
            &exp.povm,
            photons,
        )
        .unwrap();
        assert!(fidelity(&rho, &out.rho_out).unwrap() > 0.999);
    }
}

#[test]
fn maximally_mixed_is_recovered() {
    let ops = povm(2, 200.0, 1.0);
    let half = DensityMatrix::maximally_mixed(2);
    for method in [Method::Ls, Method::Mle] {
        let out =
            reconstruct_expected(method, &noiseless(&half, &ops, 1000.0), &ops, 1000.0).unwrap();
        assert!(out.rho_out.trace_distance(&half).unwrap() < 1e-3);
    }
}

#[test]
fn duplicated_data_gives_same_estimate() {
    let ops = povm(2, 200.0, 1.0);
    let mut r = rng(4);
    for i in 0..5 {
        let rho = random_mixed(2, &mut r);
        let counts = poisson_sample(&noiseless(&rho, &ops, 26_000.0), i).unwrap();
        let single = reconstruct_ls(&counts, &ops, 26_000.0).unwrap();
        let ops2: Vec<MeasurementOperator> = ops.iter().chain(&ops).cloned().collect();
        let counts2: Vec<u64> = counts.iter().chain(&counts).copied().collect();
        let double = reconstruct_ls(&counts2, &ops2, 26_000.0).unwrap();
        let diff = linalg::max_abs_diff(single.rho_out.matrix(), double.rho_out.matrix());
        assert!(diff < 1e-6, "{diff}");
    }
}

#[test]
fn scaling_does_not_hurt() {
    let ops = povm(2, 200.0, 0.0);
    let mut r = rng(5);
    for _ in 0..10 {
        let rho = random_pure(2, &mut r);
        let base = noiseless(&rho, &ops, 1000.0);
        let scaled: Vec<f64> = base.iter().map(|c| 10.0 * c).collect();
        let a = reconstruct_expected(Method::Mle, &base, &ops, 1000.0).unwrap();
        let b = reconstruct_expected(Method::Mle, &scaled, &ops, 10_000.0).unwrap();
        let fa = fidelity(&rho, &a.rho_out).unwrap();
        let fb = fidelity(&rho, &b.rho_out).unwrap();
        assert!(fb >= fa - 1e-6, "{fa} {fb}");
        assert!(fb > 0.9999);
    }
}

#[test]
fn methods_agree_without_noise() {
    let ops = povm(2, 200.0, 1.0);
    let mut r = rng(6);
    for _ in 0..20 {
        let rho = random_mixed(2, &mut r);
        let counts = noiseless(&rho, &ops, 1000.0);
        let ls = reconstruct_expected(Method::Ls, &counts, &ops, 1000.0).unwrap();
        let mle = reconstruct_expected(Method::Mle, &counts, &ops, 1000.0).unwrap();
        assert!(fidelity(&ls.rho_out, &mle.rho_out).unwrap() > 1.0 - 1e-3);
    }
}

#[test]
fn consistency_at_high_photon_number() {
    let ops = povm(2, 200.0, 0.0);
    let mut r = rng(7);
    let states: Vec<DensityMatrix> = (0..50).map(|_| random_pure(2, &mut r)).collect();
    for method in [Method::Ls, Method::Mle] {
        let infidelities: Vec<f64> = states
            .iter()
            .enumerate()
            .map(|(i, rho)| {
                let counts = poisson_sample(&noiseless(rho, &ops, 1e6), 1000 + i as u64).unwrap();
                let out = reconstruct(method, &counts, &ops, 1e6).unwrap();
                assert_physical(&out.rho_out);
                1.0 - fidelity(rho, &out.rho_out).unwrap()
            })
            .collect();
        let m = median(infidelities);
        assert!(m < 1e-3, "{method}: {m}");
    }
}

#[test]
fn reconstruction_is_deterministic() {
    let ops = povm(3, 500.0, 4.0);
    let rho = random_mixed(3, &mut rng(8));
    let counts = poisson_sample(&noiseless(&rho, &ops, 25_000.0), 3).unwrap();
    let a = reconstruct_mle(&counts, &ops, 25_000.0).unwrap();
    let b = reconstruct_mle(&counts, &ops, 25_000.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_counts() {
    let ops = povm(2, 200.0, 0.0);
    let mut counts = vec![1.0; 26];
    counts[4] = -1.0;
    assert!(reconstruct_expected(Method::Ls, &counts, &ops, 1000.0).is_err());
    counts[4] = f64::NAN;
    assert!(reconstruct_expected(Method::Ls, &counts, &ops, 1000.0).is_err());
}

#[test]
fn single_state_average() {
    let exp = CellSpec::new(SystemKind::Qubit, 200.0, 1.0, 5)
        .experiment()
        .unwrap();
    let rho = random_pure(2, &mut rng(9));
    let report =
        average_fidelity(std::slice::from_ref(&rho), &exp, &[Method::Ls, Method::Mle]).unwrap();
    for (method, stats) in &report.stats {
        assert_eq!(stats.count, 1);
        assert_eq!(stats.std_dev, 0.0);
        let (result, f) = &report.outcomes[0].results[if *method == Method::Ls { 0 } else { 1 }];
        assert_eq!(result.method, *method);
        assert_eq!(stats.mean, *f);
    }
    assert!(average_fidelity(&[rho], &exp, &[]).is_err());
}

#[test]
fn shared_data_across_methods() {
    let spec = CellSpec::new(SystemKind::Qubit, 500.0, 4.0, 11);
    let exp: Experiment = spec.experiment().unwrap();
    let states = SystemKind::Qubit.states(3, 0).unwrap();
    let both = average_fidelity(&states, &exp, &[Method::Ls, Method::Mle]).unwrap();
    let ls = average_fidelity(&states, &exp, &[Method::Ls]).unwrap();
    assert_eq!(both.stats[0].1, ls.stats[0].1);
    for o in &both.outcomes {
        for (r, f) in &o.results {
            assert_physical(&r.rho_out);
            assert!((0.0..=1.0).contains(f));
        }
    }
}
