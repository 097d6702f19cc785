//! CSV output of snapshots and diagnostics.
//!
//! Numbers are written as `{:.16e}`, i.e. 17 significant digits, which
//! round-trips every `f64`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::integrate::{RunOutput, Snapshot};
use crate::spatial::Grid;
use crate::state::StateField;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `z,c_1..c_N,w_1..w_N`, one row per cell.
pub fn write_snapshot_csv(out: &mut impl Write, grid: &Grid, state: &StateField) -> io::Result<()> {
    let n = state.n_components();
    let mut header = vec!["z".to_string()];
    header.extend((1..=n).map(|i| format!("c_{i}")));
    header.extend((1..=n).map(|i| format!("w_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..state.n_cells() {
        let mut row = vec![num(grid.center(k))];
        row.extend(state.c().cell(k).iter().map(|&v| num(v)));
        row.extend(state.w().cell(k).iter().map(|&v| num(v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `time,mass_1..mass_N,oscillation_index,front_position`; a flat profile
/// has front position `nan`.
pub fn write_diagnostics_csv(out: &mut impl Write, records: &[DiagnosticsRecord]) -> io::Result<()> {
    let n = records.first().map_or(0, |r| r.total_mass.len());
    let mut header = vec!["time".to_string()];
    header.extend((1..=n).map(|i| format!("mass_{i}")));
    header.push("oscillation_index".into());
    header.push("front_position".into());
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![num(r.time)];
        row.extend(r.total_mass.iter().map(|&v| num(v)));
        row.push(num(r.oscillation_index));
        row.push(r.front_position.map_or_else(|| "nan".to_string(), num));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `<run>_t<time>.csv`, with the time in its shortest exact decimal form.
pub fn snapshot_file_name(run: &str, time: f64) -> String {
    format!("{run}_t{time}.csv")
}

pub fn diagnostics_file_name(run: &str) -> String {
    format!("{run}_diagnostics.csv")
}

/// Writes every snapshot and the diagnostics table into `dir` (created if
/// missing). Returns the paths written, diagnostics last.
pub fn write_run(dir: &Path, run: &str, grid: &Grid, output: &RunOutput) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(output.snapshots.len() + 1);
    for Snapshot { time, state, .. } in &output.snapshots {
        let path = dir.join(snapshot_file_name(run, *time));
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        write_snapshot_csv(&mut f, grid, state)?;
        f.flush()?;
        written.push(path);
    }
    let path = dir.join(diagnostics_file_name(run));
    let records: Vec<DiagnosticsRecord> = output
        .snapshots
        .iter()
        .map(|s| s.diagnostics.clone())
        .collect();
    let mut f = io::BufWriter::new(fs::File::create(&path)?);
    write_diagnostics_csv(&mut f, &records)?;
    f.flush()?;
    written.push(path);
    Ok(written)
}
