//! Split pipeline: `simulate` writes count data with a JSON header, and
//! `reconstruct` replays it into the same outputs `table` produces.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use timebin::simulate::{derive_seed, run_ensemble};
use timebin::tomography::score_records;
use timebin::{CountRecord, Experiment, ExperimentConfig};

use crate::manifest::{MethodChoice, RunManifest};
use crate::output::{self, CellKey, CELL_DIR, SUMMARY_FILE};
use crate::Outcome;

/// Metadata stored beside each data CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataHeader {
    pub tool_version: String,
    pub manifest: RunManifest,
    pub config: ExperimentConfig,
    pub povm_sha256: String,
    pub n_states: usize,
    pub n_operators: usize,
    pub data_file: String,
    pub data_sha256: String,
}

pub fn header_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

pub fn simulate(mut manifest: RunManifest, out: &Path) -> Result<Outcome> {
    let specs = manifest.cell_specs()?;
    let states = manifest.states()?;
    fs::create_dir_all(out)?;
    manifest.command = "simulate".into();
    manifest.record_cells(&specs)?;
    manifest.outputs.clear();

    for (spec, cell) in specs.iter().zip(manifest.cells.clone()) {
        let tag = CellKey::from_spec(spec).tag();
        let experiment = spec.experiment()?;
        let records = run_ensemble(&states, &experiment)?;
        let data_file = format!("data_{tag}.csv");
        write_data(&out.join(&data_file), &experiment, &records)?;
        let header = DataHeader {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            manifest: RunManifest {
                cells: vec![cell],
                outputs: Vec::new(),
                ..manifest.clone()
            },
            config: experiment.config.clone(),
            povm_sha256: output::povm_digest(&experiment.povm),
            n_states: states.len(),
            n_operators: experiment.povm.len(),
            data_file: data_file.clone(),
            data_sha256: output::file_digest(&out.join(&data_file))?,
        };
        output::write_json(&header_path(&out.join(&data_file)), &header)?;
        log::info!("wrote {data_file}");
        manifest.outputs.push(data_file.clone());
        manifest
            .outputs
            .push(header_path(Path::new(&data_file)).display().to_string());
    }
    manifest.save(out)?;
    Ok(Outcome::Complete)
}

fn write_data(path: &Path, experiment: &Experiment, records: &[(u64, CountRecord)]) -> Result<()> {
    let pairs = experiment.config.two_photon;
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if pairs {
        w.write_record(["state_id", "t_ps", "t2_ps", "expected", "sampled"])?;
    } else {
        w.write_record(["state_id", "t_ps", "expected", "sampled"])?;
    }
    for (id, rec) in records {
        for (i, op) in experiment.povm.iter().enumerate() {
            let mut row = vec![id.to_string(), op.times_ps[0].to_string()];
            if pairs {
                row.push(op.times_ps[1].to_string());
            }
            row.push(rec.expected[i].to_string());
            row.push(rec.sampled[i].to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct DataRow {
    state_id: u64,
    t_ps: f64,
    #[serde(default)]
    t2_ps: Option<f64>,
    expected: f64,
    sampled: u64,
}

/// Reads a data file back, checking it against the POVM rebuilt from its header.
type Labeled = Vec<(u64, CountRecord)>;

fn read_data(path: &Path) -> Result<(DataHeader, Experiment, Labeled)> {
    let hpath = header_path(path);
    let text = fs::read_to_string(&hpath)
        .with_context(|| format!("reading header {}", hpath.display()))?;
    let header: DataHeader =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", hpath.display()))?;
    let [cell] = header.manifest.cells.as_slice() else {
        bail!("{}: header must describe exactly one cell", hpath.display());
    };
    ensure!(
        cell.to_config(&header.manifest)? == header.config,
        "{}: cell record disagrees with the experiment configuration",
        hpath.display()
    );
    let experiment = Experiment::new(header.config.clone())?;
    let digest = output::povm_digest(&experiment.povm);
    ensure!(
        digest == header.povm_sha256,
        "POVM hash mismatch: header {} vs rebuilt {digest}",
        header.povm_sha256
    );
    ensure!(
        experiment.povm.len() == header.n_operators,
        "header operator count does not match its grid"
    );

    let bytes = output::file_digest(path)?;
    ensure!(
        bytes == header.data_sha256,
        "{}: contents do not match the header checksum",
        path.display()
    );

    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let n_ops = header.n_operators;
    let mut records: Labeled = Vec::with_capacity(header.n_states);
    for (line, row) in reader.deserialize::<DataRow>().enumerate() {
        let row = row.with_context(|| format!("{}: malformed row {}", path.display(), line + 2))?;
        let (state, op) = (line / n_ops, line % n_ops);
        ensure!(
            state < header.n_states,
            "{}: more rows than the header declares",
            path.display()
        );
        let times = &experiment.povm[op].times_ps;
        let t2_ok = match (row.t2_ps, times.get(1)) {
            (Some(a), Some(b)) => a == *b,
            (None, None) => true,
            _ => false,
        };
        ensure!(
            row.t_ps == times[0] && t2_ok,
            "{}: row {} does not lie on the configured grid",
            path.display(),
            line + 2
        );
        if op == 0 {
            let seed = derive_seed(header.config.seed, row.state_id);
            records.push((
                row.state_id,
                CountRecord {
                    expected: Vec::with_capacity(n_ops),
                    sampled: Vec::with_capacity(n_ops),
                    seed,
                },
            ));
        }
        let (id, rec) = records.last_mut().expect("pushed above");
        ensure!(
            *id == row.state_id,
            "{}: state id changes inside a block at row {}",
            path.display(),
            line + 2
        );
        rec.expected.push(row.expected);
        rec.sampled.push(row.sampled);
    }
    let complete = records.len() == header.n_states
        && records
            .last()
            .is_some_and(|(_, r)| r.sampled.len() == n_ops);
    if !complete {
        let rows: usize = records.iter().map(|(_, r)| r.sampled.len()).sum();
        bail!(
            "{}: truncated, {rows} of {} rows present",
            path.display(),
            header.n_states * n_ops
        );
    }
    Ok((header, experiment, records))
}

pub fn reconstruct(data: &[PathBuf], method: Option<MethodChoice>, out: &Path) -> Result<Outcome> {
    ensure!(!data.is_empty(), "no data files given");
    let mut loaded = Vec::with_capacity(data.len());
    for path in data {
        loaded.push(read_data(path)?);
    }
    fs::create_dir_all(out.join(CELL_DIR))?;

    let mut manifest = loaded[0].0.manifest.clone();
    manifest.command = "reconstruct".into();
    if let Some(m) = method {
        manifest.method = m;
    }
    manifest.inputs = data.iter().map(|p| p.display().to_string()).collect();
    manifest.cells = loaded
        .iter()
        .map(|(h, e, _)| crate::manifest::CellRecord::from_config(&h.config, e.povm.len()))
        .collect();
    manifest.outputs = vec![SUMMARY_FILE.into()];
    let methods = manifest.method.methods();

    let mut rows = Vec::new();
    for (header, experiment, records) in loaded {
        let m = &header.manifest;
        let states = m.states()?;
        ensure!(
            states.len() == header.n_states,
            "header state count does not match its manifest"
        );
        let key = CellKey {
            system: m.system,
            length_m: header.config.fiber.length_m,
            sigma_d_ps: header.config.jitter.sigma_d_ps,
            operators: experiment.povm.len(),
            seed: header.config.seed,
        };
        let report = score_records(
            &states,
            records,
            &experiment.povm,
            header.config.photons as f64,
            &methods,
        )?;
        let name = format!("{CELL_DIR}/{}.csv", key.tag());
        output::write_results_csv(&out.join(&name), &report)?;
        manifest.outputs.push(name);
        rows.extend(key.summary_rows(&report));
    }
    output::write_json(&out.join(SUMMARY_FILE), &rows)?;
    manifest.save(out)?;
    Ok(Outcome::Complete)
}
