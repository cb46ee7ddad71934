use anyhow::Result;
use std::fs;
use std::path::Path;

use timebin::pipeline::run_cell;

use crate::manifest::RunManifest;
use crate::output::{self, CellKey, CELL_DIR, SUMMARY_FILE};
use crate::Outcome;

/// Runs every cell, writing its results as soon as it finishes.
pub fn run(mut manifest: RunManifest, out: &Path) -> Result<Outcome> {
    let specs = manifest.cell_specs()?;
    let states = manifest.states()?;
    let methods = manifest.method.methods();
    fs::create_dir_all(out.join(CELL_DIR))?;

    manifest.command = "table".into();
    manifest.record_cells(&specs)?;
    manifest.outputs = std::iter::once(SUMMARY_FILE.to_string())
        .chain(
            specs
                .iter()
                .map(|s| format!("{CELL_DIR}/{}.csv", CellKey::from_spec(s).tag())),
        )
        .collect();
    manifest.save(out)?;

    let mut rows = Vec::new();
    let mut failed = 0;
    for spec in &specs {
        let key = CellKey::from_spec(spec);
        log::info!("cell {} ({} states)", key.tag(), states.len());
        match run_cell(spec, &states, &methods) {
            Ok(cell) => {
                output::write_results_csv(
                    &out.join(CELL_DIR).join(format!("{}.csv", key.tag())),
                    &cell.report,
                )?;
                for row in key.summary_rows(&cell.report) {
                    log::info!(
                        "  {} mean {:.4} std {:.4}",
                        row.method,
                        row.mean.unwrap_or(f64::NAN),
                        row.std.unwrap_or(f64::NAN)
                    );
                    rows.push(row);
                }
            }
            Err(e) => {
                log::error!("cell {} failed: {e}", key.tag());
                failed += 1;
                rows.extend(key.failed_rows(&methods, &e.to_string()));
            }
        }
        output::write_json(&out.join(SUMMARY_FILE), &rows)?;
    }
    Ok(if failed == 0 {
        Outcome::Complete
    } else {
        Outcome::Partial(failed)
    })
}
