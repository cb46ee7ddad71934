mod common;

use common::trapezoid;
use num_complex::Complex64;
use std::f64::consts::PI;
use timebin::wavepacket::{self, basis_overlap, envelope, gram_matrix, propagated_envelope};
use timebin::{FiberConfig, PulseConfig};

const BETA: f64 = -0.0115;

fn pulse(dim: usize) -> PulseConfig {
    PulseConfig::with_dim(dim).unwrap()
}

/// Closed-form modulus of the propagated amplitude, written out independently.
fn intensity_oracle(t: f64, sigma: f64, beta: f64, length: f64) -> f64 {
    let c = 4.0 * beta * beta * length * length + sigma.powi(4);
    sigma / (PI.sqrt() * c.sqrt()) * (-sigma * sigma * t * t / c).exp()
}

#[test]
fn beta_conversion() {
    let b = wavepacket::beta_s2_to_ps2(wavepacket::BETA_SMF28_S2_PER_M);
    assert!((b - BETA).abs() < 1e-15);
    assert_eq!(FiberConfig::smf28(1.0).unwrap().beta_ps2_per_m, b);
}

#[test]
fn envelope_values() {
    let p = pulse(2);
    let expected = 1.0 / (PI.powf(0.25) * 0.65f64.sqrt());
    assert!((envelope(0.0, &p) - expected).abs() < 1e-14);
    assert!((envelope(0.0, &p) - 0.9317).abs() < 1e-4);
    for t in [0.1, 0.9, 3.3] {
        assert_eq!(envelope(t, &p), envelope(-t, &p));
    }
    assert!(envelope(40.0, &p) < 1e-300);
    let norm = trapezoid(-12.0, 12.0, 4000, |t| envelope(t, &p).powi(2));
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn zero_length_reduces_to_input() {
    let p = pulse(2);
    let f = FiberConfig::new(BETA, 0.0).unwrap();
    for i in -50..=50 {
        let t = 0.07 * i as f64;
        let z = propagated_envelope(t, &p, &f);
        assert!((z - Complex64::new(envelope(t, &p), 0.0)).norm() < 1e-12);
    }
}

#[test]
fn propagated_intensity_matches_closed_form() {
    let p = pulse(2);
    let f = FiberConfig::smf28(200.0).unwrap();
    let c = 4.0 * BETA * BETA * 200.0 * 200.0 + 0.65f64.powi(4);
    assert!((c - 21.34).abs() < 0.01);
    let peak = propagated_envelope(0.0, &p, &f).norm_sqr();
    assert!((peak - 0.0794).abs() < 1e-4);
    for t in [-9.0, -2.0, 0.0, 1.5, 11.0] {
        let got = propagated_envelope(t, &p, &f).norm_sqr();
        assert!((got - intensity_oracle(t, 0.65, BETA, 200.0)).abs() < 1e-14);
    }
}

#[test]
fn propagation_is_unitary() {
    for sigma in [0.3, 0.65, 1.2] {
        for length in [0.0, 50.0, 200.0, 500.0, 5000.0] {
            let p = PulseConfig::new(sigma, 10.0 * sigma, 2).unwrap();
            let f = FiberConfig::new(BETA, length).unwrap();
            let c = 4.0 * BETA * BETA * length * length + sigma.powi(4);
            let half = 20.0 * c.sqrt() / sigma;
            let norm = trapezoid(-half, half, 20_000, |t| {
                propagated_envelope(t, &p, &f).norm_sqr()
            });
            assert!(
                (norm - 1.0).abs() < 1e-9,
                "sigma={sigma} L={length}: {norm}"
            );
            assert!((wavepacket::norm_by_quadrature(&p, &f) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn broadened_width() {
    let p = pulse(2);
    for length in [0.0, 200.0, 500.0, 5000.0] {
        let f = FiberConfig::smf28(length).unwrap();
        let c = 4.0 * BETA * BETA * length * length + 0.65f64.powi(4);
        let half = 20.0 * c.sqrt() / 0.65;
        let second = trapezoid(-half, half, 40_000, |t| {
            t * t * propagated_envelope(t, &p, &f).norm_sqr()
        });
        let expected = c.sqrt() / (0.65 * 2f64.sqrt());
        assert!((second.sqrt() - expected).abs() < 1e-6, "L={length}");
        assert!((wavepacket::intensity_std_ps(&p, &f) - expected).abs() < 1e-12);
    }
}

#[test]
fn overlap_matches_quadrature() {
    let p = PulseConfig::new(1.3, 2.0, 5).unwrap();
    for n in 0..5 {
        for k in 0..5 {
            let (cn, ck) = (p.center(n), p.center(k));
            let oracle = trapezoid(-30.0, 30.0, 12_000, |t| {
                envelope(t - cn, &p) * envelope(t - ck, &p)
            });
            let got = basis_overlap(n, k, &p).unwrap();
            assert!((got - oracle).abs() < 1e-9, "({n},{k}): {got} vs {oracle}");
        }
    }
    assert!(basis_overlap(0, 5, &p).is_err());
}

#[test]
fn default_overlaps() {
    let q = pulse(2);
    let o = basis_overlap(0, 1, &q).unwrap();
    assert!((o - 3.77e-7).abs() < 0.01e-7, "{o}");
    // quoted as 3e-7 for tau/sigma = 7.7
    assert!(o / 3e-7 < 1.5 && 3e-7 / o < 1.5);

    let r = pulse(3);
    let o2 = basis_overlap(0, 2, &r).unwrap();
    let expected = (-4.0f64 * 25.0 / 1.69).exp();
    assert!(((o2 - expected) / expected).abs() < 1e-12);
    assert!((o2 - 2.0e-26).abs() < 0.1e-26);
}

#[test]
fn gram_properties() {
    let g = gram_matrix(&pulse(2));
    assert!((g[(0, 1)] - 3.8e-7).abs() < 0.05e-7);
    for (sigma, tau, dim) in [(0.65, 5.0, 3), (1.0, 1.0, 4), (2.0, 1.5, 6), (0.4, 0.3, 5)] {
        let p = PulseConfig::new(sigma, tau, dim).unwrap();
        let g = gram_matrix(&p);
        for i in 0..dim {
            assert_eq!(g[(i, i)], 1.0);
            for j in 0..dim {
                assert_eq!(g[(i, j)], g[(j, i)]);
                assert!(g[(i, j)] > 0.0 && g[(i, j)] <= 1.0);
            }
        }
        let eig = g.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-12), "{eig:?}");
    }
    let wide = PulseConfig::new(0.1, 50.0, 4).unwrap();
    let g = gram_matrix(&wide);
    assert!((g - nalgebra::DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-300);
}

#[test]
fn invalid_configs() {
    assert!(PulseConfig::new(0.0, 5.0, 2).is_err());
    assert!(PulseConfig::new(0.65, -1.0, 2).is_err());
    assert!(PulseConfig::new(0.65, 5.0, 1).is_err());
    assert!(FiberConfig::new(BETA, -1.0).is_err());
    assert!(FiberConfig::new(0.02, 10.0).is_ok());
}
