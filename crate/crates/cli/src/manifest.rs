use anyhow::{ensure, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use timebin::pipeline::{self, CellSpec};
use timebin::povm::TimeGrid;
use timebin::wavepacket::{self, FiberConfig, PulseConfig};
use timebin::{DensityMatrix, ExperimentConfig, JitterConfig, Method, SystemKind};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Ls,
    Mle,
    Both,
}

impl MethodChoice {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodChoice::Ls => vec![Method::Ls],
            MethodChoice::Mle => vec![Method::Mle],
            MethodChoice::Both => vec![Method::Ls, Method::Mle],
        }
    }
}

/// Full description of a run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub system: SystemKind,
    pub length_m: Vec<f64>,
    pub jitter_ps: Vec<f64>,
    pub photons_per_operator: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators: Option<usize>,
    pub resolution: usize,
    pub phases: usize,
    pub method: MethodChoice,
    pub seed: u64,
    pub threshold: f64,
    pub sigma_ps: f64,
    pub tau_ps: f64,
    pub beta_ps2_per_m: f64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub cells: Vec<CellRecord>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: String::new(),
            system: SystemKind::Qubit,
            length_m: vec![200.0, 500.0],
            jitter_ps: vec![0.0, 1.0, 4.0],
            photons_per_operator: pipeline::DEFAULT_PHOTONS,
            operators: None,
            resolution: pipeline::DESK_RESOLUTION,
            phases: pipeline::DESK_PHASES,
            method: MethodChoice::Both,
            seed: 2024,
            threshold: pipeline::DEFAULT_THRESHOLD,
            sigma_ps: wavepacket::DEFAULT_SIGMA_PS,
            tau_ps: wavepacket::DEFAULT_TAU_PS,
            beta_ps2_per_m: wavepacket::beta_s2_to_ps2(wavepacket::BETA_SMF28_S2_PER_M),
            inputs: Vec::new(),
            outputs: Vec::new(),
            cells: Vec::new(),
        }
    }
}

/// The experiment configuration of one cell. The seed is kept as 16 hex digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub length_m: f64,
    pub sigma_d_ps: f64,
    pub operators: usize,
    pub photons: u64,
    pub seed: String,
    pub two_photon: bool,
    pub bin_width_ps: f64,
    pub instants_ps: Vec<f64>,
}

impl CellRecord {
    pub fn from_config(config: &ExperimentConfig, operators: usize) -> Self {
        Self {
            length_m: config.fiber.length_m,
            sigma_d_ps: config.jitter.sigma_d_ps,
            operators,
            photons: config.photons,
            seed: format!("{:016x}", config.seed),
            two_photon: config.two_photon,
            bin_width_ps: config.grid.bin_width_ps,
            instants_ps: config.grid.instants.clone(),
        }
    }

    pub fn to_config(&self, manifest: &RunManifest) -> Result<ExperimentConfig> {
        let seed = u64::from_str_radix(&self.seed, 16)
            .with_context(|| format!("bad cell seed {:?}", self.seed))?;
        let config = ExperimentConfig {
            photons: self.photons,
            pulse: PulseConfig::new(manifest.sigma_ps, manifest.tau_ps, manifest.system.bins())?,
            fiber: FiberConfig::new(manifest.beta_ps2_per_m, self.length_m)?,
            jitter: JitterConfig::new(self.sigma_d_ps)?,
            grid: TimeGrid::new(self.instants_ps.clone(), self.bin_width_ps)?,
            two_photon: self.two_photon,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn operators(&self) -> usize {
        self.operators
            .unwrap_or_else(|| self.system.default_operators())
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.length_m.is_empty(),
            "at least one fiber length is required"
        );
        ensure!(
            !self.jitter_ps.is_empty(),
            "at least one jitter value is required"
        );
        ensure!(
            self.photons_per_operator >= 1,
            "photons per operator must be >= 1"
        );
        ensure!(self.seed <= i64::MAX as u64, "seed must be below 2^63");
        if self.system.two_photon() {
            ensure!(self.phases >= 1, "at least one phase is required");
        } else {
            ensure!(self.resolution >= 2, "resolution must be >= 2");
        }
        Ok(())
    }

    pub fn cell_spec(&self, length_m: f64, sigma_d_ps: f64) -> CellSpec {
        let mut spec = CellSpec::new(self.system, length_m, sigma_d_ps, self.seed)
            .with_operators(self.operators())
            .with_photons(self.photons_per_operator);
        spec.threshold = self.threshold;
        spec.sigma_ps = self.sigma_ps;
        spec.tau_ps = self.tau_ps;
        spec.beta_ps2_per_m = self.beta_ps2_per_m;
        spec
    }

    /// Every (length, jitter) cell, length outer, each checked to build.
    pub fn cell_specs(&self) -> Result<Vec<CellSpec>> {
        self.validate()?;
        let mut out = Vec::new();
        for &length in &self.length_m {
            for &jitter in &self.jitter_ps {
                let spec = self.cell_spec(length, jitter);
                spec.experiment_config()
                    .with_context(|| format!("cell L={length} m, sigma_D={jitter} ps"))?;
                out.push(spec);
            }
        }
        Ok(out)
    }

    /// Records the configuration of each cell.
    pub fn record_cells(&mut self, specs: &[CellSpec]) -> Result<()> {
        self.cells = specs
            .iter()
            .map(|s| {
                Ok(CellRecord::from_config(
                    &s.experiment_config()?,
                    s.operators,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn states(&self) -> Result<Vec<DensityMatrix>> {
        Ok(self.system.states(self.resolution, self.phases)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut m = RunManifest {
            command: "table".into(),
            seed: 42,
            ..Default::default()
        };
        let specs = m.cell_specs().unwrap();
        m.record_cells(&specs).unwrap();
        m.outputs = vec!["summary.json".into()];
        let text = m.to_toml().unwrap();
        let back: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.cells.len(), 6);
        let config = back.cells[3].to_config(&back).unwrap();
        assert_eq!(config, specs[3].experiment_config().unwrap());
    }

    #[test]
    fn partial_files_take_defaults() {
        let m: RunManifest = toml::from_str("system = \"qutrit\"\nlength_m = [500.0]\n").unwrap();
        assert_eq!(m.system, SystemKind::Qutrit);
        assert_eq!(m.operators(), 26);
        assert_eq!(m.jitter_ps, vec![0.0, 1.0, 4.0]);
        assert!(toml::from_str::<RunManifest>("length = [1.0]").is_err());
    }

    #[test]
    fn rejects_bad_settings() {
        let m = RunManifest {
            seed: u64::MAX,
            ..Default::default()
        };
        assert!(m.validate().is_err());
        let m = RunManifest {
            system: SystemKind::Entangled,
            operators: Some(26),
            ..Default::default()
        };
        assert!(m.cell_specs().is_err());
        let m = RunManifest {
            length_m: vec![],
            ..Default::default()
        };
        assert!(m.cell_specs().is_err());
    }
}
