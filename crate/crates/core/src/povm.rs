//! Time-resolved measurement operators.
//!
//! An ideal detector registering a photon at time `t` after the fiber realizes the
//! rank-one operator `M(t) = v(t) v(t)†` with `v_n(t) = u_L(t − c_n)`, where `c_n`
//! is the center of bin `n`. Its trace is the weight `μ(t)`. Timing jitter smears
//! `M(t)` with a normalized Gaussian kernel; every entry of `M(t')` is itself a
//! complex Gaussian in `t'`, so the smeared operator has a closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quadrature;
use crate::states::DensityMatrix;
use crate::wavepacket::{self, FiberConfig, PropagatedEnvelope, PulseConfig};

/// Gaussian detector timing jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct JitterConfig {
    pub sigma_d_ps: f64,
}

impl JitterConfig {
    pub fn new(sigma_d_ps: f64) -> Result<Self> {
        if !(sigma_d_ps >= 0.0 && sigma_d_ps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "jitter must be >= 0, got {sigma_d_ps}"
            )));
        }
        Ok(Self { sigma_d_ps })
    }

    pub fn ideal() -> Self {
        Self { sigma_d_ps: 0.0 }
    }

    /// Kernel `q_D(t)`.
    pub fn kernel(&self, t: f64) -> f64 {
        let s = self.sigma_d_ps;
        (-t * t / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt()
    }
}

/// A POVM element. Two-photon elements carry one time per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    pub matrix: CMatrix,
    pub times_ps: Vec<f64>,
    /// Integration measure attached to the element: the grid spacing for a single
    /// photon, the product of spacings for a two-photon element. Zero when the
    /// operator is a bare density (not attached to a grid).
    pub bin_width_ps: f64,
    pub jitter_ps: f64,
}

impl MeasurementOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn time_ps(&self) -> f64 {
        self.times_ps[0]
    }

    pub fn trace(&self) -> f64 {
        linalg::real_trace(&self.matrix)
    }

    /// `tr(M²)/tr(M)²`; one for a rank-one element.
    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        linalg::trace_product(&self.matrix, &self.matrix).re / (tr * tr)
    }

    /// Probability density `tr(M ρ)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rho.dim(),
            });
        }
        Ok(linalg::trace_product(&self.matrix, rho.matrix()).re)
    }

    /// The element normalized to unit trace, as a state.
    pub fn normalized_state(&self) -> CMatrix {
        &self.matrix / Complex64::new(self.trace(), 0.0)
    }

    pub fn with_bin_width(mut self, bin_width_ps: f64) -> Self {
        self.bin_width_ps = bin_width_ps;
        self
    }
}

/// Equally spaced detection instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub instants: Vec<f64>,
    pub bin_width_ps: f64,
}

impl TimeGrid {
    pub fn new(instants: Vec<f64>, bin_width_ps: f64) -> Result<Self> {
        if instants.is_empty() {
            return Err(Error::Empty("time grid"));
        }
        if !(bin_width_ps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bin width must be positive, got {bin_width_ps}"
            )));
        }
        if instants.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            instants,
            bin_width_ps,
        })
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.instants.last().unwrap() - self.instants[0]
    }
}

/// Weight `μ(t) = tr M(t)`, the total detection density at time `t`.
pub fn weight_mu(t: f64, pulse: &PulseConfig, fiber: &FiberConfig) -> f64 {
    let c = wavepacket::dispersion_factor(pulse, fiber);
    let s2 = pulse.sigma_ps * pulse.sigma_ps;
    let sum: f64 = pulse
        .centers()
        .map(|center| (-s2 * (t - center).powi(2) / c).exp())
        .sum();
    pulse.sigma_ps / (PI.sqrt() * c.sqrt()) * sum
}

/// Unnormalized measurement vector `(u_L(t − c_0), …, u_L(t − c_{d−1}))`.
/// These are the components of the bra `⟨m(t)|`, so that `⟨m(t)|ψ⟩ = Σ α_n u_L(t − c_n)`
/// is the detection amplitude.
pub fn measurement_vector(t: f64, pulse: &PulseConfig, fiber: &FiberConfig) -> Vec<Complex64> {
    let env = PropagatedEnvelope::new(pulse, fiber);
    pulse.centers().map(|c| env.value(t - c)).collect()
}

/// Ideal rank-one element `M(t) = |m(t)⟩⟨m(t)|`.
pub fn measurement_operator(
    t: f64,
    pulse: &PulseConfig,
    fiber: &FiberConfig,
) -> MeasurementOperator {
    let ket: Vec<Complex64> = measurement_vector(t, pulse, fiber)
        .iter()
        .map(|z| z.conj())
        .collect();
    MeasurementOperator {
        matrix: linalg::outer(&ket),
        times_ps: vec![t],
        bin_width_ps: 0.0,
        jitter_ps: 0.0,
    }
}

/// Jitter-smeared element `M_D(t) = ∫ M(t') q_D(t − t') dt'`, in closed form.
pub fn jittered_operator(
    t: f64,
    pulse: &PulseConfig,
    fiber: &FiberConfig,
    jitter: &JitterConfig,
) -> MeasurementOperator {
    if jitter.sigma_d_ps == 0.0 {
        return measurement_operator(t, pulse, fiber);
    }
    let env = PropagatedEnvelope::new(pulse, fiber);
    let g = env.gamma;
    // p = γ + γ̄ is real and negative; each entry is |K|² exp(p (t' − m)² + κ).
    let p = 2.0 * g.re;
    let var = -1.0 / (2.0 * p);
    let s2 = jitter.sigma_d_ps * jitter.sigma_d_ps;
    let total_var = var + s2;
    let shrink = (var / total_var).sqrt();
    let amp = env.peak_intensity() * shrink;
    let centers: Vec<f64> = pulse.centers().collect();
    let d = pulse.dim;
    // entry (n, k) integrates conj(u_L(t' − c_n)) u_L(t' − c_k)
    let matrix = CMatrix::from_fn(d, d, |k, n| {
        let (cn, ck) = (centers[n], centers[k]);
        let gc = g.conj();
        let m = (g * cn + gc * ck) / p;
        let kappa = g * (cn * cn) + gc * (ck * ck) - m * m * p;
        let dt = Complex64::new(t, 0.0) - m;
        amp * (kappa - dt * dt / (2.0 * total_var)).exp()
    });
    MeasurementOperator {
        matrix,
        times_ps: vec![t],
        bin_width_ps: 0.0,
        jitter_ps: jitter.sigma_d_ps,
    }
}

/// Same operator as [`jittered_operator`], integrated numerically entry by entry.
pub fn jittered_operator_by_quadrature(
    t: f64,
    pulse: &PulseConfig,
    fiber: &FiberConfig,
    jitter: &JitterConfig,
) -> MeasurementOperator {
    if jitter.sigma_d_ps == 0.0 {
        return measurement_operator(t, pulse, fiber);
    }
    let env = PropagatedEnvelope::new(pulse, fiber);
    let centers: Vec<f64> = pulse.centers().collect();
    let d = pulse.dim;
    let half = 14.0 * jitter.sigma_d_ps;
    let raw =
        quadrature::default_rule().integrate_vec(t - half, t + half, 400, 2 * d * d, |tp, out| {
            let w = jitter.kernel(t - tp);
            let v: Vec<Complex64> = centers.iter().map(|c| env.value(tp - c)).collect();
            for n in 0..d {
                for k in 0..d {
                    let z = v[n].conj() * v[k] * w;
                    out[2 * (n * d + k)] = z.re;
                    out[2 * (n * d + k) + 1] = z.im;
                }
            }
        });
    let matrix = CMatrix::from_fn(d, d, |n, k| {
        Complex64::new(raw[2 * (n * d + k)], raw[2 * (n * d + k) + 1])
    });
    MeasurementOperator {
        matrix,
        times_ps: vec![t],
        bin_width_ps: 0.0,
        jitter_ps: jitter.sigma_d_ps,
    }
}

/// Picks `count` equally spaced instants spanning the region where
/// `μ(t) ≥ threshold_fraction · max μ`; the bin width is the spacing.
pub fn select_time_grid(
    pulse: &PulseConfig,
    fiber: &FiberConfig,
    count: usize,
    threshold_fraction: f64,
) -> Result<TimeGrid> {
    let min_count = pulse.dim * pulse.dim;
    if count < min_count {
        return Err(Error::InvalidConfig(format!(
            "{count} operators cannot be informationally complete in dimension {} (need >= {min_count})",
            pulse.dim
        )));
    }
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must lie in (0, 1), got {threshold_fraction}"
        )));
    }
    let std = wavepacket::intensity_std_ps(pulse, fiber);
    let lo_center = pulse.center(0);
    let hi_center = pulse.center(pulse.dim - 1);
    let mu = |t: f64| weight_mu(t, pulse, fiber);

    let scan_lo = lo_center - 4.0 * std;
    let scan_hi = hi_center + 4.0 * std;
    let steps = 4000;
    let peak = (0..=steps)
        .map(|i| mu(scan_lo + (scan_hi - scan_lo) * i as f64 / steps as f64))
        .fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::EmptyRegion);
    }
    let target = threshold_fraction * peak;
    let far = 60.0 * std + pulse.tau_ps * pulse.dim as f64;
    let right =
        outer_crossing(&mu, hi_center, hi_center + far, target).ok_or(Error::EmptyRegion)?;
    let left = outer_crossing(&mu, lo_center, lo_center - far, target).ok_or(Error::EmptyRegion)?;
    if !(right > left) {
        return Err(Error::EmptyRegion);
    }
    let spacing = (right - left) / (count - 1) as f64;
    let instants = (0..count).map(|i| left + spacing * i as f64).collect();
    TimeGrid::new(instants, spacing)
}

/// Outermost point between `inner` and `outer` where `f` crosses `target`.
fn outer_crossing<F: Fn(f64) -> f64>(f: &F, inner: f64, outer: f64, target: f64) -> Option<f64> {
    if f(inner) < target {
        return None;
    }
    let steps = 20_000;
    let mut prev = outer;
    for i in 1..=steps {
        let t = outer + (inner - outer) * i as f64 / steps as f64;
        if f(t) >= target {
            // bisect between prev (below) and t (above)
            let (mut below, mut above) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (below + above);
                if f(mid) >= target {
                    above = mid;
                } else {
                    below = mid;
                }
            }
            return Some(above);
        }
        prev = t;
    }
    None
}

/// `|∫M(t)dt − 𝟙|` entrywise, by quadrature over a wide window.
pub fn completeness_defect(pulse: &PulseConfig, fiber: &FiberConfig) -> DMatrix<f64> {
    let env = PropagatedEnvelope::new(pulse, fiber);
    let centers: Vec<f64> = pulse.centers().collect();
    let d = pulse.dim;
    let half = wavepacket::quadrature_half_width(pulse, fiber) + pulse.center(d - 1);
    let panels = ((2.0 * half / 0.5).ceil() as usize).max(400);
    let raw = quadrature::default_rule().integrate_vec(-half, half, panels, 2 * d * d, |t, out| {
        let v: Vec<Complex64> = centers.iter().map(|c| env.value(t - c)).collect();
        for n in 0..d {
            for k in 0..d {
                let z = v[n].conj() * v[k];
                out[2 * (n * d + k)] = z.re;
                out[2 * (n * d + k) + 1] = z.im;
            }
        }
    });
    DMatrix::from_fn(d, d, |n, k| {
        let z = Complex64::new(raw[2 * (n * d + k)], raw[2 * (n * d + k) + 1]);
        let target = if n == k { 1.0 } else { 0.0 };
        (z - target).norm()
    })
}

/// Two-photon element `A ⊗ B`.
pub fn tensor_operator(
    a: &MeasurementOperator,
    b: &MeasurementOperator,
) -> Result<MeasurementOperator> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let mut times_ps = a.times_ps.clone();
    times_ps.extend_from_slice(&b.times_ps);
    Ok(MeasurementOperator {
        matrix: linalg::kron(&a.matrix, &b.matrix),
        times_ps,
        bin_width_ps: a.bin_width_ps * b.bin_width_ps,
        jitter_ps: a.jitter_ps.max(b.jitter_ps),
    })
}

/// One jittered element per grid instant, each carrying the grid spacing.
pub fn single_photon_povm(
    grid: &TimeGrid,
    pulse: &PulseConfig,
    fiber: &FiberConfig,
    jitter: &JitterConfig,
) -> Vec<MeasurementOperator> {
    grid.instants
        .iter()
        .map(|&t| jittered_operator(t, pulse, fiber, jitter).with_bin_width(grid.bin_width_ps))
        .collect()
}

/// All products `M_D(t_i) ⊗ M_D(t_j)` over the per-arm grid, `i` outer.
pub fn two_photon_povm(
    grid: &TimeGrid,
    pulse: &PulseConfig,
    fiber: &FiberConfig,
    jitter: &JitterConfig,
) -> Vec<MeasurementOperator> {
    let arm = single_photon_povm(grid, pulse, fiber, jitter);
    let mut out = Vec::with_capacity(arm.len() * arm.len());
    for a in &arm {
        for b in &arm {
            out.push(tensor_operator(a, b).expect("arms share a dimension"));
        }
    }
    out
}

/// Serialized form of a POVM element. `matrix` holds `[re, im]` pairs, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub time_ps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_time_ps: Option<f64>,
    pub bin_width_ps: f64,
    pub sigma_d_ps: f64,
    pub dim: usize,
    pub matrix: Vec<[f64; 2]>,
}

impl From<&MeasurementOperator> for OperatorRecord {
    fn from(op: &MeasurementOperator) -> Self {
        let d = op.dim();
        let mut matrix = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let z = op.matrix[(r, c)];
                matrix.push([z.re, z.im]);
            }
        }
        Self {
            time_ps: op.times_ps[0],
            partner_time_ps: op.times_ps.get(1).copied(),
            bin_width_ps: op.bin_width_ps,
            sigma_d_ps: op.jitter_ps,
            dim: d,
            matrix,
        }
    }
}

impl TryFrom<&OperatorRecord> for MeasurementOperator {
    type Error = Error;

    fn try_from(rec: &OperatorRecord) -> Result<Self> {
        let d = rec.dim;
        if rec.matrix.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: rec.matrix.len(),
            });
        }
        let matrix = CMatrix::from_fn(d, d, |r, c| {
            let [re, im] = rec.matrix[r * d + c];
            Complex64::new(re, im)
        });
        let mut times_ps = vec![rec.time_ps];
        times_ps.extend(rec.partner_time_ps);
        Ok(Self {
            matrix,
            times_ps,
            bin_width_ps: rec.bin_width_ps,
            jitter_ps: rec.sigma_d_ps,
        })
    }
}
