#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use timebin::DensityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite trapezoid rule; spectrally accurate for smooth integrands that
/// decay to zero at both ends, and independent of the library's quadrature.
pub fn trapezoid<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + h * i as f64);
    }
    s * h
}

pub fn gaussian_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_amplitudes(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn random_pure(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    DensityMatrix::pure(&random_amplitudes(dim, rng)).unwrap()
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    g.qr().q()
}

/// `U diag(p) U†` with a random spectrum, optionally with some zero eigenvalues.
pub fn random_mixed(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let u = random_unitary(dim, rng);
    let zeros = rng.random_range(0..dim);
    let mut p: Vec<f64> = (0..dim)
        .map(|i| {
            if i < zeros {
                0.0
            } else {
                rng.random::<f64>() + 1e-3
            }
        })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    let d = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(p[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = &u * d * u.adjoint();
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(m).unwrap()
}
