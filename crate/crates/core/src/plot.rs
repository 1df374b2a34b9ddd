//! CSV tables for external plotting.

use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{helix_to_trajectory, HelixSpec};
use crate::gyrotropic::{sweep_csv, SweepCell};
use crate::io::{csv_bytes, write_atomic};
use crate::phase::{mode_resolved_phases, phase_kernel};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    /// File stem; written as `<name>.csv`.
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Phase kernel and vacuum phases of one-turn helices with tilt swept over `[from, to]`.
pub fn theta_sweep(from: f64, to: f64, points: usize, samples_per_turn: usize) -> Result<PlotTable> {
    if points < 2 {
        return Err(Error::config("theta sweep needs at least 2 points"));
    }
    if !(from > 0.0 && to >= from && to <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::config(format!(
            "theta sweep range must lie in (0, π/2], got [{from}, {to}]"
        )));
    }
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let theta = from + (to - from) * i as f64 / (points - 1) as f64;
        let spec = HelixSpec::with_tilt(1.0, theta, 1.0, samples_per_turn);
        let kernel = phase_kernel(&helix_to_trajectory(&spec, 1.0)?)?;
        let report = mode_resolved_phases(kernel, 0, 0)?;
        rows.push([
            theta.to_string(),
            kernel.value.to_string(),
            report.per_mode[0].phase_vacuum.to_string(),
            report.per_mode[1].phase_vacuum.to_string(),
        ]);
    }
    Ok(PlotTable {
        name: "phase_vs_theta".into(),
        bytes: csv_bytes(&["theta", "kernel", "vacuum_r", "vacuum_l"], rows)?,
    })
}

/// Kernel accumulated after each whole turn of `spec`, up to `spec.turns`.
pub fn turns_accumulation(spec: &HelixSpec) -> Result<PlotTable> {
    spec.validate()?;
    let whole = spec.turns.floor() as usize;
    if whole == 0 {
        return Err(Error::config("turn accumulation needs at least one full turn"));
    }
    let traj = helix_to_trajectory(spec, whole as f64)?;
    let per_turn = (traj.len() - 1) / whole;
    let running = crate::phase::cumulative_kernel(&traj);
    let rows = (1..=whole).map(|k| [k.to_string(), running[k * per_turn].to_string()]);
    Ok(PlotTable {
        name: "phase_vs_turns".into(),
        bytes: csv_bytes(&["turns", "kernel"], rows)?,
    })
}

pub fn regime_map(cells: &[SweepCell]) -> Result<PlotTable> {
    Ok(PlotTable {
        name: "regime_map".into(),
        bytes: sweep_csv(cells)?,
    })
}

/// Writes each table to `dir/<name>.csv`; an empty set writes nothing.
pub fn emit_plot_data(tables: &[PlotTable], dir: &Path) -> Result<Vec<PathBuf>> {
    if tables.is_empty() {
        warn!("no plot data to write");
        return Ok(Vec::new());
    }
    tables
        .iter()
        .map(|t| {
            let p = dir.join(format!("{}.csv", t.name));
            write_atomic(&p, &t.bytes).map(|_| p)
        })
        .collect()
}
