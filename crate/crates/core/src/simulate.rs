//! Expected photon counts and Poisson-noised synthetic data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::povm::{self, JitterConfig, MeasurementOperator, TimeGrid};
use crate::states::DensityMatrix;
use crate::wavepacket::{FiberConfig, PulseConfig};

/// Everything needed to reproduce a synthetic data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub photons: u64,
    pub pulse: PulseConfig,
    pub fiber: FiberConfig,
    pub jitter: JitterConfig,
    /// Per-arm grid; two-photon experiments use every pair of instants.
    pub grid: TimeGrid,
    pub two_photon: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.photons < 1 {
            return Err(Error::InvalidConfig("photon number must be >= 1".into()));
        }
        self.pulse.validate()?;
        self.fiber.validate()?;
        JitterConfig::new(self.jitter.sigma_d_ps)?;
        TimeGrid::new(self.grid.instants.clone(), self.grid.bin_width_ps)?;
        Ok(())
    }

    /// Dimension of the states being measured.
    pub fn state_dim(&self) -> usize {
        if self.two_photon {
            self.pulse.dim * self.pulse.dim
        } else {
            self.pulse.dim
        }
    }

    pub fn build_povm(&self) -> Vec<MeasurementOperator> {
        if self.two_photon {
            povm::two_photon_povm(&self.grid, &self.pulse, &self.fiber, &self.jitter)
        } else {
            povm::single_photon_povm(&self.grid, &self.pulse, &self.fiber, &self.jitter)
        }
    }
}

/// A validated configuration with its POVM built once.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub povm: Vec<MeasurementOperator>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let povm = config.build_povm();
        Ok(Self { config, povm })
    }

    pub fn expected_counts(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        expected_counts(rho, &self.povm, self.config.photons as f64)
    }
}

/// Per-instant expected and sampled counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub expected: Vec<f64>,
    pub sampled: Vec<u64>,
    pub seed: u64,
}

/// `photons · bin_width · tr(M_i ρ)` for every element; tiny negatives are clamped.
pub fn expected_counts(
    rho: &DensityMatrix,
    povm: &[MeasurementOperator],
    photons: f64,
) -> Result<Vec<f64>> {
    povm.iter()
        .map(|op| {
            if op.dim() != rho.dim() {
                return Err(Error::DimensionMismatch {
                    expected: op.dim(),
                    actual: rho.dim(),
                });
            }
            let p = linalg::trace_product(&op.matrix, rho.matrix()).re;
            Ok((photons * op.bin_width_ps * p).max(0.0))
        })
        .collect()
}

/// Independent Poisson draws with the given means, reproducible from `seed`.
pub fn poisson_sample(expected: &[f64], seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expected
        .iter()
        .enumerate()
        .map(|(index, &mean)| {
            if !(mean >= 0.0) || !mean.is_finite() {
                return Err(Error::NegativeExpectation { index, value: mean });
            }
            if mean == 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(mean).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(dist.sample(&mut rng) as u64)
        })
        .collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the stream used for item `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Counts for one state from its own stream.
pub fn simulate_state(
    rho: &DensityMatrix,
    experiment: &Experiment,
    state_id: u64,
) -> Result<CountRecord> {
    let expected = experiment.expected_counts(rho)?;
    let seed = derive_seed(experiment.config.seed, state_id);
    let sampled = poisson_sample(&expected, seed)?;
    Ok(CountRecord {
        expected,
        sampled,
        seed,
    })
}

/// Simulates states tagged with stable ids; each id owns its random stream, so
/// the output for a state does not depend on its position in the list.
pub fn run_labeled_ensemble(
    states: &[(u64, DensityMatrix)],
    experiment: &Experiment,
) -> Result<Vec<(u64, CountRecord)>> {
    if states.is_empty() {
        return Err(Error::Empty("state list"));
    }
    states
        .par_iter()
        .map(|(id, rho)| simulate_state(rho, experiment, *id).map(|rec| (*id, rec)))
        .collect()
}

/// [`run_labeled_ensemble`] with ids equal to list positions.
pub fn run_ensemble(
    states: &[DensityMatrix],
    experiment: &Experiment,
) -> Result<Vec<(u64, CountRecord)>> {
    let labeled: Vec<(u64, DensityMatrix)> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (i as u64, s))
        .collect();
    run_labeled_ensemble(&labeled, experiment)
}
