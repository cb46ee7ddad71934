//! Least-squares and maximum-likelihood reconstruction over the `W` parametrization.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::{self, BfgsOptions};
use crate::povm::MeasurementOperator;
use crate::simulate::{self, CountRecord, Experiment};
use crate::states::{self, DensityMatrix, WParams};

/// Number of random starting points tried after the identity start.
pub const RANDOM_RESTARTS: usize = 4;
/// Seed of the restart stream; reconstruction itself is deterministic.
pub const RESTART_SEED: u64 = 0x7157_7a0e_0b5e_55ed;
/// Floor applied to model rates inside the logarithm.
pub const RATE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ls,
    Mle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::Mle => "mle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(Method::Ls),
            "mle" => Ok(Method::Mle),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub method: Method,
    pub rho_out: DensityMatrix,
    pub w_final: WParams,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the data carried no information (all counts zero).
    pub degenerate: bool,
}

/// Count model `λ_i(W) = tr(S_i W†W) / tr(W†W)` with `S_i = N·Δ_i·M_i`.
struct CountModel {
    dim: usize,
    scaled_ops: Vec<Vec<Complex64>>,
    counts: Vec<f64>,
    method: Method,
    penalty: f64,
}

impl CountModel {
    fn new(method: Method, counts: &[f64], povm: &[MeasurementOperator], photons: f64) -> Self {
        let dim = povm[0].dim();
        let scaled_ops = povm
            .iter()
            .map(|op| {
                let scale = photons * op.bin_width_ps;
                // column-major iteration of M is row-major of Mᵀ
                op.matrix.iter().map(|z| z * scale).collect()
            })
            .collect();
        let counts = counts.to_vec();
        let penalty = counts.iter().sum::<f64>().max(1.0);
        Self {
            dim,
            scaled_ops,
            counts,
            method,
            penalty,
        }
    }

    /// Objective without the scale penalty.
    fn data_term(&self, rates: &[f64]) -> f64 {
        match self.method {
            Method::Ls => self
                .counts
                .iter()
                .zip(rates)
                .map(|(n, l)| (n - l).powi(2))
                .sum(),
            Method::Mle => self
                .counts
                .iter()
                .zip(rates)
                .map(|(n, l)| {
                    let log = if *n > 0.0 {
                        n * l.max(RATE_FLOOR).ln()
                    } else {
                        0.0
                    };
                    l - log
                })
                .sum(),
        }
    }

    fn rate_derivative(&self, n: f64, rate: f64) -> f64 {
        match self.method {
            Method::Ls => -2.0 * (n - rate),
            Method::Mle => {
                if n > 0.0 && rate > RATE_FLOOR {
                    1.0 - n / rate
                } else {
                    1.0
                }
            }
        }
    }

    fn rates(&self, a: &[Complex64], trace: f64) -> Vec<f64> {
        let d = self.dim;
        self.scaled_ops
            .iter()
            .map(|s| {
                // s is stored transposed, so tr(S A) = Σ s_t[k][j] a[k][j]
                let mut t = 0.0;
                for idx in 0..d * d {
                    t += (s[idx] * a[idx]).re;
                }
                t / trace
            })
            .collect()
    }

    fn gram(&self, w: &[f64]) -> (Vec<Complex64>, Vec<Complex64>, f64) {
        let d = self.dim;
        let wm = WParams {
            dim: d,
            values: w.to_vec(),
        }
        .to_matrix();
        let mut wflat = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                wflat[r * d + c] = wm[(r, c)];
            }
        }
        // A = W† W, row-major
        let mut a = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    s += wflat[k * d + r].conj() * wflat[k * d + c];
                }
                a[r * d + c] = s;
            }
        }
        let trace = (0..d).map(|i| a[i * d + i].re).sum();
        (wflat, a, trace)
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim;
        let (wflat, a, trace) = self.gram(w);
        if !(trace > 0.0) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::INFINITY;
        }
        let rates = self.rates(&a, trace);
        let data = self.data_term(&rates);
        let pen = self.penalty * (trace - 1.0).powi(2);

        // G = Σ c_i (S_i − λ_i 𝟙), with c_i = ∂f/∂λ_i; row-major.
        let mut g = vec![Complex64::new(0.0, 0.0); d * d];
        for ((s, &n), &rate) in self.scaled_ops.iter().zip(&self.counts).zip(&rates) {
            let c = self.rate_derivative(n, rate);
            if c == 0.0 {
                continue;
            }
            for r in 0..d {
                for col in 0..d {
                    // s holds S transposed
                    g[r * d + col] += s[col * d + r] * c;
                }
                g[r * d + r] -= Complex64::new(c * rate, 0.0);
            }
        }
        // H = G W†
        let mut h = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for col in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    acc += g[r * d + k] * wflat[col * d + k].conj();
                }
                h[r * d + col] = acc;
            }
        }
        let pen_slope = 2.0 * self.penalty * (trace - 1.0);
        // ∂f/∂Re W_jk = 2 Re H_kj / tr, ∂f/∂Im W_jk = −2 Im H_kj / tr; ∂tr/∂w = 2w.
        for i in 0..d {
            grad[i] = 2.0 * h[i * d + i].re / trace + pen_slope * 2.0 * w[i];
        }
        for (slot, (r, c)) in states::off_diagonal_layout(d).into_iter().enumerate() {
            let hk = h[c * d + r];
            let (re_i, im_i) = (d + 2 * slot, d + 2 * slot + 1);
            grad[re_i] = 2.0 * hk.re / trace + pen_slope * 2.0 * w[re_i];
            grad[im_i] = -2.0 * hk.im / trace + pen_slope * 2.0 * w[im_i];
        }
        data + pen
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let (_, a, trace) = self.gram(w);
        self.data_term(&self.rates(&a, trace))
    }
}

fn check_inputs(counts: &[f64], povm: &[MeasurementOperator]) -> Result<usize> {
    if povm.is_empty() {
        return Err(Error::Empty("POVM"));
    }
    if counts.len() != povm.len() {
        return Err(Error::DimensionMismatch {
            expected: povm.len(),
            actual: counts.len(),
        });
    }
    let dim = povm[0].dim();
    if let Some(op) = povm.iter().find(|op| op.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: op.dim(),
        });
    }
    if povm.len() < dim * dim {
        return Err(Error::InvalidConfig(format!(
            "{} operators cannot determine a {dim}-dimensional state",
            povm.len()
        )));
    }
    if let Some(index) = counts.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(Error::NegativeExpectation {
            index,
            value: counts[index],
        });
    }
    Ok(dim)
}

/// Starting points: identity first, then seeded Gaussian draws.
fn starting_points(dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![WParams::identity(dim)
        .values
        .iter()
        .map(|v| v / (dim as f64).sqrt())
        .collect()];
    for k in 0..RANDOM_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(simulate::derive_seed(RESTART_SEED, k as u64));
        let w: Vec<f64> = (0..dim * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.push(w.into_iter().map(|v| v / norm).collect());
    }
    out
}

/// Reconstructs a state from counts with the chosen estimator.
pub fn reconstruct(
    method: Method,
    counts: &[u64],
    povm: &[MeasurementOperator],
    photons: f64,
) -> Result<ReconstructionResult> {
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    reconstruct_expected(method, &counts, povm, photons)
}

/// [`reconstruct`] on real-valued counts, such as noiseless expectations.
pub fn reconstruct_expected(
    method: Method,
    counts: &[f64],
    povm: &[MeasurementOperator],
    photons: f64,
) -> Result<ReconstructionResult> {
    let dim = check_inputs(counts, povm)?;
    if counts.iter().all(|&c| c == 0.0) {
        let w = WParams::identity(dim);
        return Ok(ReconstructionResult {
            method,
            rho_out: DensityMatrix::maximally_mixed(dim),
            w_final: w,
            objective_value: 0.0,
            iterations: 0,
            converged: false,
            degenerate: true,
        });
    }
    let model = CountModel::new(method, counts, povm, photons);
    let opts = BfgsOptions::default();
    let mut best: Option<optim::Minimum> = None;
    for start in starting_points(dim) {
        let m = optim::minimize(|w, g| model.value_and_gradient(w, g), &start, &opts);
        if !m.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best =
        best.ok_or_else(|| Error::InvalidConfig("objective is not finite at any start".into()))?;
    let w_final = WParams {
        dim,
        values: best.x,
    };
    let rho_out = states::density_from_w(&w_final)?;
    Ok(ReconstructionResult {
        method,
        objective_value: model.objective(&w_final.values),
        rho_out,
        w_final,
        iterations: best.iterations,
        converged: best.converged,
        degenerate: false,
    })
}

/// Least squares: minimizes `Σ (n_i − λ_i)²`.
pub fn reconstruct_ls(
    counts: &[u64],
    povm: &[MeasurementOperator],
    photons: f64,
) -> Result<ReconstructionResult> {
    reconstruct(Method::Ls, counts, povm, photons)
}

/// Maximum likelihood: maximizes the Poisson log-likelihood `Σ (n_i log λ_i − λ_i)`.
pub fn reconstruct_mle(
    counts: &[u64],
    povm: &[MeasurementOperator],
    photons: f64,
) -> Result<ReconstructionResult> {
    reconstruct(Method::Mle, counts, povm, photons)
}

/// Mean and population standard deviation of per-state fidelities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityStats {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
    pub fidelities: Vec<f64>,
    /// States whose data was degenerate; excluded from the mean.
    pub degenerate: usize,
    /// States whose optimizer stopped without meeting its tolerance; included.
    pub unconverged: usize,
}

impl FidelityStats {
    pub fn from_fidelities(fidelities: Vec<f64>) -> Self {
        let count = fidelities.len();
        let mean = fidelities.iter().sum::<f64>() / count.max(1) as f64;
        let var = fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / count.max(1) as f64;
        Self {
            mean,
            std_dev: var.sqrt(),
            count,
            fidelities,
            degenerate: 0,
            unconverged: 0,
        }
    }
}

/// One state's data and its reconstructions.
#[derive(Debug, Clone)]
pub struct StateOutcome {
    pub state_id: u64,
    pub record: CountRecord,
    pub results: Vec<(ReconstructionResult, f64)>,
}

#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub outcomes: Vec<StateOutcome>,
    pub stats: Vec<(Method, FidelityStats)>,
}

/// Reconstructs states from already simulated counts and scores them.
pub fn score_records(
    states: &[DensityMatrix],
    records: Vec<(u64, CountRecord)>,
    povm: &[MeasurementOperator],
    photons: f64,
    methods: &[Method],
) -> Result<EnsembleReport> {
    if states.len() != records.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            actual: records.len(),
        });
    }
    let outcomes: Vec<StateOutcome> = records
        .into_par_iter()
        .zip(states.par_iter())
        .map(|((state_id, record), rho)| {
            let results = methods
                .iter()
                .map(|&m| {
                    let r = reconstruct(m, &record.sampled, povm, photons)?;
                    let f = states::fidelity(rho, &r.rho_out)?;
                    Ok((r, f))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StateOutcome {
                state_id,
                record,
                results,
            })
        })
        .collect::<Result<_>>()?;

    let stats = methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let mut fids = Vec::with_capacity(outcomes.len());
            let (mut degenerate, mut unconverged) = (0, 0);
            for o in &outcomes {
                let (r, f) = &o.results[mi];
                if r.degenerate {
                    degenerate += 1;
                    continue;
                }
                if !r.converged {
                    unconverged += 1;
                }
                fids.push(*f);
            }
            let mut stats = FidelityStats::from_fidelities(fids);
            stats.degenerate = degenerate;
            stats.unconverged = unconverged;
            (m, stats)
        })
        .collect();
    Ok(EnsembleReport { outcomes, stats })
}

/// Simulates noisy counts for every state, reconstructs each one with every
/// requested method from the same data, and aggregates the fidelities.
pub fn average_fidelity(
    states: &[DensityMatrix],
    experiment: &Experiment,
    methods: &[Method],
) -> Result<EnsembleReport> {
    if methods.is_empty() {
        return Err(Error::Empty("method list"));
    }
    let records = simulate::run_ensemble(states, experiment)?;
    score_records(
        states,
        records,
        &experiment.povm,
        experiment.config.photons as f64,
        methods,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{select_time_grid, single_photon_povm, JitterConfig};
    use crate::wavepacket::{FiberConfig, PulseConfig};

    fn povm(dim: usize, length: f64) -> Vec<MeasurementOperator> {
        let p = PulseConfig::with_dim(dim).unwrap();
        let f = FiberConfig::smf28(length).unwrap();
        let g = select_time_grid(&p, &f, 26, 0.05).unwrap();
        single_photon_povm(&g, &p, &f, &JitterConfig::new(1.0).unwrap())
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let ops = povm(3, 200.0);
        let counts: Vec<f64> = (0..26).map(|i| (i * 7 % 13) as f64).collect();
        for method in [Method::Ls, Method::Mle] {
            let model = CountModel::new(method, &counts, &ops, 1000.0);
            let w: Vec<f64> = (0..9).map(|i| 0.3 + 0.1 * (i as f64).sin()).collect();
            let mut g = vec![0.0; 9];
            model.value_and_gradient(&w, &mut g);
            let mut scratch = vec![0.0; 9];
            for i in 0..9 {
                let h = 1e-6;
                let mut wp = w.clone();
                wp[i] += h;
                let fp = model.value_and_gradient(&wp, &mut scratch);
                wp[i] -= 2.0 * h;
                let fm = model.value_and_gradient(&wp, &mut scratch);
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()),
                    "{method} {i}: fd={fd} g={}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn all_zero_counts_are_degenerate() {
        let ops = povm(2, 200.0);
        let r = reconstruct_mle(&[0; 26], &ops, 1000.0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rho_out, DensityMatrix::maximally_mixed(2));
    }

    #[test]
    fn input_validation() {
        let ops = povm(2, 200.0);
        assert!(matches!(
            reconstruct_ls(&[1; 25], &ops, 1000.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(reconstruct_ls(&[1; 3], &ops[..3], 1000.0).is_err());
        assert!(reconstruct_ls(&[], &[], 1000.0).is_err());
    }

    #[test]
    fn stats_of_single_state() {
        let s = FidelityStats::from_fidelities(vec![0.93]);
        assert_eq!(s.mean, 0.93);
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.count, 1);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("LS".parse::<Method>().unwrap(), Method::Ls);
        assert_eq!("mle".parse::<Method>().unwrap(), Method::Mle);
        assert!("both".parse::<Method>().is_err());
    }
}
