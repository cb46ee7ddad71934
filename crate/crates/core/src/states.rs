//! Density matrices, the triangular `W` parametrization, fidelity and the state
//! families used as tomography inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::povm::weight_mu;
use crate::wavepacket::{FiberConfig, PropagatedEnvelope, PulseConfig};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-10;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotDensityMatrix(format!(
                "shape {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "not Hermitian (defect {herm:.2e})"
            )));
        }
        let tr = linalg::real_trace(&matrix);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < PSD_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "negative eigenvalue {min:.2e}"
            )));
        }
        Ok(Self(matrix))
    }

    /// Projector onto the normalized `amplitudes`.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotDensityMatrix("zero state vector".into()));
        }
        let v: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        Ok(Self(linalg::hermitian_part(&linalg::outer(&v))))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0))
    }

    /// Qubit state with Bloch vector `(x, y, z)`, `|r| ≤ 1`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let half = 0.5;
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half * (1.0 + z), 0.0),
                Complex64::new(half * x, -half * y),
                Complex64::new(half * x, half * y),
                Complex64::new(half * (1.0 - z), 0.0),
            ],
        );
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.0, &self.0).re
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        check_same_dim(self, other)?;
        let diff = &self.0 - &other.0;
        Ok(0.5
            * linalg::hermitian_eigenvalues(&diff)
                .iter()
                .map(|l| l.abs())
                .sum::<f64>())
    }
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Real parameters of a lower-triangular `W` with real diagonal.
///
/// Layout: the `d` diagonal entries first, then the sub-diagonals band by band
/// (first sub-diagonal top to bottom, then the second, ...), each complex entry
/// stored as a `(re, im)` pair. For `d = 3` this is
/// `W = [[w1, 0, 0], [w4 + i w5, w2, 0], [w8 + i w9, w6 + i w7, w3]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WParams {
    pub dim: usize,
    pub values: Vec<f64>,
}

/// Positions `(row, col)` of the complex sub-diagonal entries, in parameter order.
pub fn off_diagonal_layout(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim * (dim - 1) / 2);
    for band in 1..dim {
        for row in band..dim {
            out.push((row, row - band));
        }
    }
    out
}

impl WParams {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: values.len(),
            });
        }
        Ok(Self { dim, values })
    }

    /// `W = 𝟙`, the maximally mixed state.
    pub fn identity(dim: usize) -> Self {
        let mut values = vec![0.0; dim * dim];
        values[..dim].iter_mut().for_each(|v| *v = 1.0);
        Self { dim, values }
    }

    pub fn to_matrix(&self) -> CMatrix {
        let d = self.dim;
        let mut w = CMatrix::zeros(d, d);
        for i in 0..d {
            w[(i, i)] = Complex64::new(self.values[i], 0.0);
        }
        for (slot, (r, c)) in off_diagonal_layout(d).into_iter().enumerate() {
            w[(r, c)] = Complex64::new(self.values[d + 2 * slot], self.values[d + 2 * slot + 1]);
        }
        w
    }

    /// Reads a lower-triangular matrix; the diagonal's imaginary parts and the
    /// upper triangle are ignored.
    pub fn from_matrix(w: &CMatrix) -> Self {
        let d = w.nrows();
        let mut values = vec![0.0; d * d];
        for i in 0..d {
            values[i] = w[(i, i)].re;
        }
        for (slot, (r, c)) in off_diagonal_layout(d).into_iter().enumerate() {
            values[d + 2 * slot] = w[(r, c)].re;
            values[d + 2 * slot + 1] = w[(r, c)].im;
        }
        Self { dim: d, values }
    }
}

/// `ρ = W†W / tr(W†W)`.
pub fn density_from_w(w: &WParams) -> Result<DensityMatrix> {
    let m = w.to_matrix();
    let a = m.adjoint() * &m;
    let tr = linalg::real_trace(&a);
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::ZeroW);
    }
    Ok(DensityMatrix(
        linalg::hermitian_part(&a) / Complex64::new(tr, 0.0),
    ))
}

/// Inverse of [`density_from_w`] up to scale: returns `W` with `W†W = ρ`.
///
/// Uses a Cholesky factorization of the index-reversed matrix; pivots below
/// `1e-14` are treated as zero, so rank-deficient states are handled.
pub fn w_from_density(rho: &DensityMatrix) -> WParams {
    let d = rho.dim();
    let m = rho.matrix();
    let rev = CMatrix::from_fn(d, d, |i, j| m[(d - 1 - i, d - 1 - j)]);
    let l = cholesky_semidefinite(&rev);
    // W = J L† J
    let lt = l.adjoint();
    let w = CMatrix::from_fn(d, d, |i, j| lt[(d - 1 - i, d - 1 - j)]);
    WParams::from_matrix(&w)
}

fn cholesky_semidefinite(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if diag <= 1e-14 {
            continue;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
///
/// Evaluated as the squared trace norm of `√ρ √σ`, which equals the same
/// quantity without a second square root of near-zero eigenvalues.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let product = linalg::psd_sqrt(rho.matrix()) * linalg::psd_sqrt(sigma.matrix());
    let trace_norm: f64 = product.singular_values().iter().sum();
    Ok((trace_norm * trace_norm).clamp(0.0, 1.0))
}

/// `res` points from `lo` to `hi` inclusive.
fn closed_grid(lo: f64, hi: f64, res: usize) -> impl Iterator<Item = f64> {
    (0..res).map(move |i| lo + (hi - lo) * i as f64 / (res - 1) as f64)
}

/// Qutrit pure state with amplitudes
/// `(cos(a/2), sin(a/2) cos(b/2), sin(a/2) sin(b/2) e^{iφ})`.
pub fn qutrit_pure(a: f64, b: f64, phi: f64) -> DensityMatrix {
    let (sa, ca) = (0.5 * a).sin_cos();
    let (sb, cb) = (0.5 * b).sin_cos();
    let amps = [
        Complex64::new(ca, 0.0),
        Complex64::new(sa * cb, 0.0),
        Complex64::from_polar(sa * sb, phi),
    ];
    DensityMatrix::pure(&amps).expect("unit vector")
}

/// Parametric input-state sample with `resolution³` members.
///
/// Qubits cover the Bloch ball on an `(r, θ, φ)` grid; qutrits cover the pure
/// family of [`qutrit_pure`] with both polar angles in `[0, π]`. All ranges are
/// closed and coincident points are kept, so the count is exact.
pub fn sample_state_grid(dim: usize, resolution: usize) -> Result<Vec<DensityMatrix>> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "resolution must be >= 2, got {resolution}"
        )));
    }
    let mut out = Vec::with_capacity(resolution.pow(3));
    match dim {
        2 => {
            for r in closed_grid(0.0, 1.0, resolution) {
                for theta in closed_grid(0.0, PI, resolution) {
                    for phi in closed_grid(0.0, 2.0 * PI, resolution) {
                        let (st, ct) = theta.sin_cos();
                        let (sp, cp) = phi.sin_cos();
                        let rho = DensityMatrix::from_bloch(r * st * cp, r * st * sp, r * ct)?;
                        out.push(rho);
                    }
                }
            }
        }
        3 => {
            for a in closed_grid(0.0, PI, resolution) {
                for b in closed_grid(0.0, PI, resolution) {
                    for phi in closed_grid(0.0, 2.0 * PI, resolution) {
                        out.push(qutrit_pure(a, b, phi));
                    }
                }
            }
        }
        other => return Err(Error::UnsupportedDimension(other)),
    }
    Ok(out)
}

/// `(|00⟩ + e^{iφ}|11⟩)/√2` as a 4×4 projector.
pub fn phi_plus(phi: f64) -> DensityMatrix {
    let zero = Complex64::new(0.0, 0.0);
    let amps = [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        zero,
        zero,
        Complex64::from_polar(FRAC_1_SQRT_2, phi),
    ];
    DensityMatrix::pure(&amps).expect("unit vector")
}

/// `count` states [`phi_plus`] with phases `2πk/count`, uniform on `[0, 2π)`.
pub fn phi_plus_family(count: usize) -> Vec<DensityMatrix> {
    (0..count)
        .map(|k| phi_plus(2.0 * PI * k as f64 / count as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Reduced state of a bipartite `dim_a × dim_b` system, keeping `keep`.
pub fn partial_trace(
    rho: &DensityMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<DensityMatrix> {
    if rho.dim() != dim_a * dim_b {
        return Err(Error::DimensionMismatch {
            expected: dim_a * dim_b,
            actual: rho.dim(),
        });
    }
    let m = rho.matrix();
    let out = match keep {
        Subsystem::First => CMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()
        }),
        Subsystem::Second => CMatrix::from_fn(dim_b, dim_b, |i, j| {
            (0..dim_a).map(|k| m[(k * dim_b + i, k * dim_b + j)]).sum()
        }),
    };
    DensityMatrix::new(out)
}

/// Point in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochPoint {
    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Bloch vector of a Hermitian unit-trace 2×2 matrix:
/// `(2 Re ρ₀₁, 2 Im ρ₁₀, ρ₀₀ − ρ₁₁)`.
pub fn bloch_of_matrix(m: &CMatrix) -> Result<BlochPoint> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: m.nrows(),
        });
    }
    Ok(BlochPoint {
        x: 2.0 * m[(0, 1)].re,
        y: 2.0 * m[(1, 0)].im,
        z: (m[(0, 0)] - m[(1, 1)]).re,
    })
}

pub fn bloch_coordinates(rho: &DensityMatrix) -> Result<BlochPoint> {
    bloch_of_matrix(rho.matrix())
}

/// Two Bloch-sphere points representing a qutrit measurement vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajoranaPair {
    pub t_ps: f64,
    pub mu: f64,
    pub points: [BlochPoint; 2],
    /// Roots of the Majorana polynomial; `None` marks a root at infinity.
    #[serde(skip)]
    pub roots: [Option<Complex64>; 2],
}

/// Projects `z` from the south pole: `0 ↦ (0,0,1)`, `∞ ↦ (0,0,−1)`.
pub fn stereographic(z: Option<Complex64>) -> BlochPoint {
    match z {
        None => BlochPoint {
            x: 0.0,
            y: 0.0,
            z: -1.0,
        },
        Some(z) => {
            let n2 = z.norm_sqr();
            if !n2.is_finite() {
                return BlochPoint {
                    x: 0.0,
                    y: 0.0,
                    z: -1.0,
                };
            }
            let den = 1.0 + n2;
            BlochPoint {
                x: 2.0 * z.re / den,
                y: 2.0 * z.im / den,
                z: (1.0 - n2) / den,
            }
        }
    }
}

/// Majorana pair of the qutrit measurement vector at time `t`.
///
/// Solves `e^{γ(t−τ)²} z² − √2 e^{γt²} z + e^{γ(t+τ)²} = 0` with
/// `γ = i/(4βL − 2iσ²)`. Coefficients are divided by `e^{γt²}` first.
pub fn majorana_pair(t: f64, pulse: &PulseConfig, fiber: &FiberConfig) -> Result<MajoranaPair> {
    if pulse.dim != 3 {
        return Err(Error::UnsupportedDimension(pulse.dim));
    }
    let g = PropagatedEnvelope::new(pulse, fiber).gamma;
    let tau = pulse.tau_ps;
    let a = (g * (tau * tau - 2.0 * t * tau)).exp();
    let b = Complex64::new(-2f64.sqrt(), 0.0);
    let c = (g * (tau * tau + 2.0 * t * tau)).exp();
    let roots = quadratic_roots(a, b, c);
    Ok(MajoranaPair {
        t_ps: t,
        mu: weight_mu(t, pulse, fiber),
        points: [stereographic(roots[0]), stereographic(roots[1])],
        roots,
    })
}

/// Roots of `a z² + b z + c`; a vanishing leading coefficient yields a root at infinity.
fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Option<Complex64>; 2] {
    let scale = a.norm().max(b.norm()).max(c.norm());
    if a.norm() < 1e-14 * scale {
        return [None, if b.norm() > 0.0 { Some(-c / b) } else { None }];
    }
    let disc = (b * b - a * c * 4.0).sqrt();
    let plus = b + disc;
    let minus = b - disc;
    let q = if plus.norm() >= minus.norm() {
        plus * -0.5
    } else {
        minus * -0.5
    };
    if q.norm() == 0.0 {
        return [Some(Complex64::new(0.0, 0.0)); 2];
    }
    [Some(q / a), Some(c / q)]
}
