//! Experiment cells: one (system, fiber length, jitter, operator count) setting
//! run over a sample of input states.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::povm::{self, JitterConfig};
use crate::simulate::{self, Experiment, ExperimentConfig};
use crate::states::{self, DensityMatrix};
use crate::tomography::{self, EnsembleReport, FidelityStats, Method};
use crate::wavepacket::{self, FiberConfig, PulseConfig};

/// Photons sent per measurement operator.
pub const DEFAULT_PHOTONS: u64 = 1000;
/// Smallest kept element weight relative to the largest.
pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Desk-scale sample sizes: 7³ grid points, 20 relative phases.
pub const DESK_RESOLUTION: usize = 7;
pub const DESK_PHASES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Qubit,
    Qutrit,
    Entangled,
}

impl SystemKind {
    /// Number of time bins per photon.
    pub fn bins(&self) -> usize {
        match self {
            SystemKind::Qubit | SystemKind::Entangled => 2,
            SystemKind::Qutrit => 3,
        }
    }

    pub fn two_photon(&self) -> bool {
        matches!(self, SystemKind::Entangled)
    }

    pub fn default_operators(&self) -> usize {
        match self {
            SystemKind::Entangled => 25,
            _ => 26,
        }
    }

    /// Input states: a `resolution³` grid for single photons, `phases` Φ⁺ states for pairs.
    pub fn states(&self, resolution: usize, phases: usize) -> Result<Vec<DensityMatrix>> {
        match self {
            SystemKind::Qubit | SystemKind::Qutrit => {
                states::sample_state_grid(self.bins(), resolution)
            }
            SystemKind::Entangled => {
                if phases == 0 {
                    return Err(Error::InvalidConfig("need at least one phase".into()));
                }
                Ok(states::phi_plus_family(phases))
            }
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::Qubit => "qubit",
            SystemKind::Qutrit => "qutrit",
            SystemKind::Entangled => "entangled",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qubit" => Ok(SystemKind::Qubit),
            "qutrit" => Ok(SystemKind::Qutrit),
            "entangled" => Ok(SystemKind::Entangled),
            other => Err(Error::InvalidConfig(format!("unknown system {other:?}"))),
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub system: SystemKind,
    pub sigma_ps: f64,
    pub tau_ps: f64,
    pub beta_ps2_per_m: f64,
    pub length_m: f64,
    pub sigma_d_ps: f64,
    /// Total operator count; for pairs a perfect square (per-arm count squared).
    pub operators: usize,
    /// Photons per operator; the experiment emits `photons * operators` in total.
    pub photons: u64,
    /// Minimum POVM element weight as a fraction of the peak weight.
    pub threshold: f64,
    pub master_seed: u64,
}

impl CellSpec {
    /// Cell with the default pulse, SMF28e+ dispersion and 10³ photons per operator.
    pub fn new(system: SystemKind, length_m: f64, sigma_d_ps: f64, master_seed: u64) -> Self {
        Self {
            system,
            sigma_ps: wavepacket::DEFAULT_SIGMA_PS,
            tau_ps: wavepacket::DEFAULT_TAU_PS,
            beta_ps2_per_m: wavepacket::beta_s2_to_ps2(wavepacket::BETA_SMF28_S2_PER_M),
            length_m,
            sigma_d_ps,
            operators: system.default_operators(),
            photons: DEFAULT_PHOTONS,
            threshold: DEFAULT_THRESHOLD,
            master_seed,
        }
    }

    pub fn with_operators(mut self, operators: usize) -> Self {
        self.operators = operators;
        self
    }

    pub fn with_photons(mut self, photons: u64) -> Self {
        self.photons = photons;
        self
    }

    /// Instants per arm.
    pub fn instants_per_arm(&self) -> Result<usize> {
        if self.system.two_photon() {
            let arm = (self.operators as f64).sqrt().round() as usize;
            if arm * arm != self.operators {
                return Err(Error::InvalidConfig(format!(
                    "two-photon operator count must be a perfect square, got {}",
                    self.operators
                )));
            }
            Ok(arm)
        } else {
            Ok(self.operators)
        }
    }

    pub fn total_photons(&self) -> u64 {
        self.photons * self.operators as u64
    }

    /// Threshold applied to μ along one arm. A pair element weighs μ(t₁)μ(t₂),
    /// so the corner elements reach `threshold` when each arm reaches its square root.
    pub fn arm_threshold(&self) -> f64 {
        if self.system.two_photon() {
            self.threshold.sqrt()
        } else {
            self.threshold
        }
    }

    /// Seed of this cell's data, derived from the master seed and the cell's
    /// physical settings so a cell reproduces regardless of which others run.
    pub fn cell_seed(&self) -> u64 {
        let mut s = self.master_seed;
        for v in [
            self.length_m.to_bits(),
            self.sigma_d_ps.to_bits(),
            self.operators as u64,
            self.photons,
        ] {
            s = simulate::derive_seed(s, v);
        }
        s
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let pulse = PulseConfig::new(self.sigma_ps, self.tau_ps, self.system.bins())?;
        let fiber = FiberConfig::new(self.beta_ps2_per_m, self.length_m)?;
        let jitter = JitterConfig::new(self.sigma_d_ps)?;
        let grid = povm::select_time_grid(
            &pulse,
            &fiber,
            self.instants_per_arm()?,
            self.arm_threshold(),
        )?;
        let config = ExperimentConfig {
            photons: self.total_photons(),
            pulse,
            fiber,
            jitter,
            grid,
            two_photon: self.system.two_photon(),
            seed: self.cell_seed(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Experiment::new(self.experiment_config()?)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: CellSpec,
    pub seed: u64,
    pub report: EnsembleReport,
}

impl CellResult {
    pub fn stats(&self, method: Method) -> Option<&FidelityStats> {
        self.report
            .stats
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, s)| s)
    }
}

/// Runs one cell: simulate, reconstruct with every method from the same data, score.
pub fn run_cell(
    spec: &CellSpec,
    states: &[DensityMatrix],
    methods: &[Method],
) -> Result<CellResult> {
    let experiment = spec.experiment()?;
    let report = tomography::average_fidelity(states, &experiment, methods)?;
    Ok(CellResult {
        spec: spec.clone(),
        seed: experiment.config.seed,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_counts() {
        let c = CellSpec::new(SystemKind::Entangled, 200.0, 0.0, 1);
        assert_eq!(c.instants_per_arm().unwrap(), 5);
        assert_eq!(c.clone().with_operators(36).instants_per_arm().unwrap(), 6);
        assert!(c.with_operators(26).instants_per_arm().is_err());
        let q = CellSpec::new(SystemKind::Qutrit, 200.0, 0.0, 1);
        assert_eq!(q.instants_per_arm().unwrap(), 26);
    }

    #[test]
    fn photon_budget_and_thresholds() {
        let q = CellSpec::new(SystemKind::Qubit, 200.0, 0.0, 1);
        assert_eq!(q.total_photons(), 26_000);
        assert_eq!(q.arm_threshold(), q.threshold);
        let e = CellSpec::new(SystemKind::Entangled, 200.0, 0.0, 1);
        assert!((e.arm_threshold() * e.arm_threshold() - e.threshold).abs() < 1e-15);
        assert_eq!(e.experiment_config().unwrap().photons, 25_000);
    }

    #[test]
    fn cell_seed_depends_on_settings() {
        let a = CellSpec::new(SystemKind::Qubit, 200.0, 0.0, 1);
        let b = CellSpec::new(SystemKind::Qubit, 500.0, 0.0, 1);
        assert_ne!(a.cell_seed(), b.cell_seed());
        assert_eq!(a.cell_seed(), a.clone().cell_seed());
    }

    #[test]
    fn system_parsing() {
        assert_eq!("Qutrit".parse::<SystemKind>().unwrap(), SystemKind::Qutrit);
        assert!("ququart".parse::<SystemKind>().is_err());
        assert_eq!(SystemKind::Entangled.states(7, 20).unwrap().len(), 20);
        assert_eq!(SystemKind::Qubit.states(7, 20).unwrap().len(), 343);
    }
}
