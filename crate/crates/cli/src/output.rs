use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

use timebin::tomography::EnsembleReport;
use timebin::{CellSpec, MeasurementOperator, Method, SystemKind};

pub const SUMMARY_FILE: &str = "summary.json";
pub const CELL_DIR: &str = "cells";

/// File-name stem of a cell, e.g. `qubit_L200_sd1_ops26`.
pub fn cell_tag(system: SystemKind, length_m: f64, sigma_d_ps: f64, operators: usize) -> String {
    format!("{system}_L{length_m}_sd{sigma_d_ps}_ops{operators}")
}

/// One row of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub system: SystemKind,
    #[serde(rename = "L")]
    pub length_m: f64,
    #[serde(rename = "sigma_d")]
    pub sigma_d_ps: f64,
    pub operators: usize,
    pub method: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_states: usize,
    pub seed: u64,
    pub degenerate: usize,
    pub unconverged: usize,
    pub status: String,
}

pub struct CellKey {
    pub system: SystemKind,
    pub length_m: f64,
    pub sigma_d_ps: f64,
    pub operators: usize,
    pub seed: u64,
}

impl CellKey {
    pub fn from_spec(spec: &CellSpec) -> Self {
        Self {
            system: spec.system,
            length_m: spec.length_m,
            sigma_d_ps: spec.sigma_d_ps,
            operators: spec.operators,
            seed: spec.cell_seed(),
        }
    }

    pub fn tag(&self) -> String {
        cell_tag(self.system, self.length_m, self.sigma_d_ps, self.operators)
    }

    fn row(&self, method: Method) -> SummaryRow {
        SummaryRow {
            system: self.system,
            length_m: self.length_m,
            sigma_d_ps: self.sigma_d_ps,
            operators: self.operators,
            method: method.to_string(),
            mean: None,
            std: None,
            n_states: 0,
            seed: self.seed,
            degenerate: 0,
            unconverged: 0,
            status: String::new(),
        }
    }

    pub fn summary_rows(&self, report: &EnsembleReport) -> Vec<SummaryRow> {
        report
            .stats
            .iter()
            .map(|(m, s)| SummaryRow {
                mean: Some(s.mean),
                std: Some(s.std_dev),
                n_states: s.count,
                degenerate: s.degenerate,
                unconverged: s.unconverged,
                status: "ok".into(),
                ..self.row(*m)
            })
            .collect()
    }

    pub fn failed_rows(&self, methods: &[Method], error: &str) -> Vec<SummaryRow> {
        methods
            .iter()
            .map(|&m| SummaryRow {
                status: format!("failed: {error}"),
                ..self.row(m)
            })
            .collect()
    }
}

/// Per-state results: `state_id, method, fidelity, objective, iterations, converged`.
pub fn write_results_csv(path: &Path, report: &EnsembleReport) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "state_id",
        "method",
        "fidelity",
        "objective",
        "iterations",
        "converged",
    ])?;
    for outcome in &report.outcomes {
        for (result, fidelity) in &outcome.results {
            w.write_record([
                outcome.state_id.to_string(),
                result.method.to_string(),
                fidelity.to_string(),
                result.objective_value.to_string(),
                result.iterations.to_string(),
                result.converged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes through a temporary file so readers never see a partial document.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// SHA-256 over every element's instants, bin width, jitter and matrix entries.
pub fn povm_digest(povm: &[MeasurementOperator]) -> String {
    let mut h = Sha256::new();
    for op in povm {
        h.update((op.times_ps.len() as u64).to_le_bytes());
        for t in &op.times_ps {
            h.update(t.to_le_bytes());
        }
        h.update(op.bin_width_ps.to_le_bytes());
        h.update(op.jitter_ps.to_le_bytes());
        let d = op.dim();
        h.update((d as u64).to_le_bytes());
        for r in 0..d {
            for c in 0..d {
                let z = op.matrix[(r, c)];
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
