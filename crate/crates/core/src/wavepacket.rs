//! Gaussian time-bin envelopes and their propagation through a dispersive fiber.
//!
//! Times are in picoseconds, lengths in meters and the group-velocity dispersion
//! in ps²/m, so that every exponent stays of order one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;

/// Dispersion of a standard telecom fiber (SMF28e+), in s²/m.
pub const BETA_SMF28_S2_PER_M: f64 = -1.15e-26;
/// Number of ps² in one s².
pub const PS2_PER_S2: f64 = 1e24;
/// Default envelope width, ps.
pub const DEFAULT_SIGMA_PS: f64 = 0.65;
/// Default bin separation, ps.
pub const DEFAULT_TAU_PS: f64 = 5.0;

/// Largest off-diagonal Gram entry that still counts as an orthogonal basis.
const MAX_BASIS_OVERLAP: f64 = 1e-3;

/// Converts a dispersion parameter from s²/m to ps²/m.
pub fn beta_s2_to_ps2(beta_s2_per_m: f64) -> f64 {
    beta_s2_per_m * PS2_PER_S2
}

/// Geometry of the time-bin basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub sigma_ps: f64,
    pub tau_ps: f64,
    pub dim: usize,
}

impl PulseConfig {
    pub fn new(sigma_ps: f64, tau_ps: f64, dim: usize) -> Result<Self> {
        let pulse = Self {
            sigma_ps,
            tau_ps,
            dim,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Default σ and τ with the requested number of bins.
    pub fn with_dim(dim: usize) -> Result<Self> {
        Self::new(DEFAULT_SIGMA_PS, DEFAULT_TAU_PS, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ps > 0.0 && self.sigma_ps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma_ps
            )));
        }
        if !(self.tau_ps > 0.0 && self.tau_ps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau_ps
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        let overlap = self.neighbour_overlap();
        if overlap >= MAX_BASIS_OVERLAP {
            log::warn!(
                "time bins overlap by {overlap:.3e} (tau/sigma = {:.2}); basis is far from orthogonal",
                self.tau_ps / self.sigma_ps
            );
        }
        Ok(())
    }

    /// Center of bin `n`: `nτ − (d−1)τ/2`, symmetric about zero.
    pub fn center(&self, n: usize) -> f64 {
        (n as f64 - (self.dim as f64 - 1.0) / 2.0) * self.tau_ps
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(|n| self.center(n))
    }

    fn neighbour_overlap(&self) -> f64 {
        overlap_for_distance(self.tau_ps, self.sigma_ps)
    }
}

/// Fiber link: dispersion (ps²/m, signed) and length (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberConfig {
    pub beta_ps2_per_m: f64,
    pub length_m: f64,
}

impl FiberConfig {
    pub fn new(beta_ps2_per_m: f64, length_m: f64) -> Result<Self> {
        let fiber = Self {
            beta_ps2_per_m,
            length_m,
        };
        fiber.validate()?;
        Ok(fiber)
    }

    /// SMF28e+ dispersion at the given length.
    pub fn smf28(length_m: f64) -> Result<Self> {
        Self::new(beta_s2_to_ps2(BETA_SMF28_S2_PER_M), length_m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta_ps2_per_m.is_finite() {
            return Err(Error::InvalidConfig("dispersion must be finite".into()));
        }
        if !(self.length_m >= 0.0 && self.length_m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "fiber length must be >= 0, got {}",
                self.length_m
            )));
        }
        Ok(())
    }

    /// Accumulated dispersion βL in ps².
    pub fn beta_l(&self) -> f64 {
        self.beta_ps2_per_m * self.length_m
    }
}

/// `4β²L² + σ⁴` in ps⁴; controls the width of the propagated intensity.
pub fn dispersion_factor(pulse: &PulseConfig, fiber: &FiberConfig) -> f64 {
    let bl = fiber.beta_l();
    4.0 * bl * bl + pulse.sigma_ps.powi(4)
}

/// Temporal standard deviation of `|u_L(t)|²`.
pub fn intensity_std_ps(pulse: &PulseConfig, fiber: &FiberConfig) -> f64 {
    dispersion_factor(pulse, fiber).sqrt() / (pulse.sigma_ps * 2f64.sqrt())
}

/// Unpropagated envelope `u(t)`, normalized so that `∫u² dt = 1`.
pub fn envelope(t: f64, pulse: &PulseConfig) -> f64 {
    let s = pulse.sigma_ps;
    (-t * t / (2.0 * s * s)).exp() / (PI.powf(0.25) * s.sqrt())
}

/// Envelope after a fiber of accumulated dispersion βL, `K·exp(γt²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatedEnvelope {
    /// Complex Gaussian exponent coefficient `i / (4βL − 2iσ²)`.
    pub gamma: Complex64,
    /// Complex prefactor `1 / (π^{1/4} √(σ + 2iβL/σ))`.
    pub prefactor: Complex64,
}

impl PropagatedEnvelope {
    pub fn new(pulse: &PulseConfig, fiber: &FiberConfig) -> Self {
        let s = pulse.sigma_ps;
        let bl = fiber.beta_l();
        let i = Complex64::i();
        let gamma = if bl == 0.0 {
            Complex64::new(-1.0 / (2.0 * s * s), 0.0)
        } else {
            i / Complex64::new(4.0 * bl, -2.0 * s * s)
        };
        let root = Complex64::new(s, 2.0 * bl / s).sqrt();
        let prefactor = Complex64::new(PI.powf(0.25), 0.0) * root;
        Self {
            gamma,
            prefactor: prefactor.inv(),
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> Complex64 {
        self.prefactor * (self.gamma * (t * t)).exp()
    }

    /// `|K|²`, the peak intensity.
    pub fn peak_intensity(&self) -> f64 {
        self.prefactor.norm_sqr()
    }
}

/// `u_L(t)`: the envelope after propagation through `fiber`.
pub fn propagated_envelope(t: f64, pulse: &PulseConfig, fiber: &FiberConfig) -> Complex64 {
    PropagatedEnvelope::new(pulse, fiber).value(t)
}

fn overlap_for_distance(distance_ps: f64, sigma_ps: f64) -> f64 {
    (-distance_ps * distance_ps / (4.0 * sigma_ps * sigma_ps)).exp()
}

/// Overlap `⟨n|k⟩` of two basis envelopes, `exp(−Δ²/(4σ²))` for bin distance Δ.
pub fn basis_overlap(n: usize, k: usize, pulse: &PulseConfig) -> Result<f64> {
    for index in [n, k] {
        if index >= pulse.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: pulse.dim,
            });
        }
    }
    let distance = (k as f64 - n as f64) * pulse.tau_ps;
    Ok(overlap_for_distance(distance, pulse.sigma_ps))
}

/// Gram matrix of the time-bin basis.
pub fn gram_matrix(pulse: &PulseConfig) -> DMatrix<f64> {
    DMatrix::from_fn(pulse.dim, pulse.dim, |n, k| {
        overlap_for_distance((k as f64 - n as f64) * pulse.tau_ps, pulse.sigma_ps)
    })
}

/// Half-width of the integration window used for propagated intensities.
pub fn quadrature_half_width(pulse: &PulseConfig, fiber: &FiberConfig) -> f64 {
    20.0 * dispersion_factor(pulse, fiber).sqrt() / pulse.sigma_ps
}

/// `∫|u_L(t)|² dt` by composite Gauss-Legendre quadrature.
pub fn norm_by_quadrature(pulse: &PulseConfig, fiber: &FiberConfig) -> f64 {
    let env = PropagatedEnvelope::new(pulse, fiber);
    let h = quadrature_half_width(pulse, fiber);
    quadrature::default_rule().integrate(-h, h, 200, |t| env.value(t).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(dim: usize) -> PulseConfig {
        PulseConfig::with_dim(dim).unwrap()
    }

    #[test]
    fn beta_conversion() {
        assert!((beta_s2_to_ps2(BETA_SMF28_S2_PER_M) + 0.0115).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(PulseConfig::new(0.0, 5.0, 2).is_err());
        assert!(PulseConfig::new(0.65, -1.0, 2).is_err());
        assert!(PulseConfig::new(0.65, 5.0, 1).is_err());
        assert!(FiberConfig::new(-0.0115, -1.0).is_err());
        assert!(FiberConfig::new(f64::NAN, 1.0).is_err());
        // negative dispersion is physical
        assert!(FiberConfig::new(-0.0115, 0.0).is_ok());
    }

    #[test]
    fn envelope_peak_value() {
        let p = defaults(2);
        let v = envelope(0.0, &p);
        // 1 / (π^{1/4} √0.65)
        assert!((v - 0.931_657).abs() < 1e-6, "{v}");
        assert!((envelope(1.3, &p) - envelope(-1.3, &p)).abs() == 0.0);
        assert!(envelope(1e3, &p) == 0.0);
        let gl = quadrature::default_rule();
        let norm = gl.integrate(-20.0, 20.0, 100, |t| envelope(t, &p).powi(2));
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_length_reduces_to_envelope() {
        let p = defaults(2);
        let f = FiberConfig::smf28(0.0).unwrap();
        for i in -100..=100 {
            let t = i as f64 * 0.05;
            let u = propagated_envelope(t, &p, &f);
            assert!((u.re - envelope(t, &p)).abs() < 1e-12);
            assert!(u.im.abs() < 1e-12);
        }
    }

    #[test]
    fn propagated_peak_intensity() {
        let p = defaults(2);
        let f = FiberConfig::smf28(200.0).unwrap();
        let c = dispersion_factor(&p, &f);
        assert!((c - 21.3385).abs() < 1e-3, "{c}");
        let peak = propagated_envelope(0.0, &p, &f).norm_sqr();
        let expected = p.sigma_ps / (PI.sqrt() * c.sqrt());
        assert!((peak - expected).abs() < 1e-14);
        assert!((peak - 0.0794).abs() < 1e-4, "{peak}");
    }

    #[test]
    fn propagation_is_unitary() {
        for (sigma, len) in [(0.65, 200.0), (0.65, 500.0), (1.0, 5000.0), (0.3, 0.0)] {
            let p = PulseConfig::new(sigma, 5.0, 2).unwrap();
            let f = FiberConfig::smf28(len).unwrap();
            let n = norm_by_quadrature(&p, &f);
            assert!((n - 1.0).abs() < 1e-9, "sigma={sigma} L={len}: {n}");
        }
    }

    #[test]
    fn overlap_values() {
        let p2 = defaults(2);
        assert_eq!(basis_overlap(1, 1, &p2).unwrap(), 1.0);
        let o = basis_overlap(0, 1, &p2).unwrap();
        assert!((o - 3.77e-7).abs() < 0.01e-7, "{o}");
        let p3 = defaults(3);
        let o2 = basis_overlap(0, 2, &p3).unwrap();
        assert!((o2 / (-100.0f64 / 1.69).exp() - 1.0).abs() < 1e-12);
        assert!(matches!(
            basis_overlap(0, 2, &p2),
            Err(Error::IndexOutOfRange { index: 2, dim: 2 })
        ));
    }

    #[test]
    fn gram_limits() {
        let g = gram_matrix(&defaults(2));
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
        let wide = PulseConfig::new(0.65, 60.0, 4).unwrap();
        let g = gram_matrix(&wide);
        assert!((g - DMatrix::identity(4, 4)).abs().max() < 1e-300);
    }

    #[test]
    fn centers_are_symmetric() {
        let p = defaults(3);
        assert_eq!(p.centers().collect::<Vec<_>>(), vec![-5.0, 0.0, 5.0]);
        let p = defaults(2);
        assert_eq!(p.centers().collect::<Vec<_>>(), vec![-2.5, 2.5]);
    }
}
