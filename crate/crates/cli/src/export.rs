use anyhow::{Context, Result};
use std::fs;
use std::path::Path;

use timebin::povm::OperatorRecord;
use timebin::states::{bloch_of_matrix, majorana_pair};
use timebin::SystemKind;

use crate::manifest::RunManifest;
use crate::output::{self, CellKey};
use crate::Outcome;

/// Writes each cell's POVM as JSON, plus Bloch points for qubits and
/// Majorana pairs for qutrits.
pub fn run(mut manifest: RunManifest, out: &Path) -> Result<Outcome> {
    let specs = manifest.cell_specs()?;
    fs::create_dir_all(out)?;
    manifest.command = "export-povm".into();
    manifest.record_cells(&specs)?;
    manifest.outputs.clear();

    for spec in &specs {
        let tag = CellKey::from_spec(spec).tag();
        let experiment = spec.experiment()?;
        let config = &experiment.config;

        let records: Vec<OperatorRecord> =
            experiment.povm.iter().map(OperatorRecord::from).collect();
        let name = format!("povm_{tag}.json");
        output::write_json(&out.join(&name), &records)?;
        manifest.outputs.push(name);

        match spec.system {
            SystemKind::Qubit => {
                let name = format!("bloch_{tag}.csv");
                let mut w =
                    csv::Writer::from_path(out.join(&name)).with_context(|| name.clone())?;
                w.write_record(["t_ps", "mu", "x", "y", "z"])?;
                for op in &experiment.povm {
                    let p = bloch_of_matrix(&op.normalized_state())?;
                    w.write_record(
                        [op.time_ps(), op.trace(), p.x, p.y, p.z].map(|v| v.to_string()),
                    )?;
                }
                w.flush()?;
                manifest.outputs.push(name);
            }
            SystemKind::Qutrit => {
                let name = format!("majorana_{tag}.csv");
                let mut w =
                    csv::Writer::from_path(out.join(&name)).with_context(|| name.clone())?;
                w.write_record(["t_ps", "root", "mu", "x", "y", "z"])?;
                for &t in &config.grid.instants {
                    let pair = majorana_pair(t, &config.pulse, &config.fiber)?;
                    for (root, p) in pair.points.iter().enumerate() {
                        w.write_record([
                            t.to_string(),
                            root.to_string(),
                            pair.mu.to_string(),
                            p.x.to_string(),
                            p.y.to_string(),
                            p.z.to_string(),
                        ])?;
                    }
                }
                w.flush()?;
                manifest.outputs.push(name);
            }
            SystemKind::Entangled => {}
        }
    }
    manifest.save(out)?;
    Ok(Outcome::Complete)
}
