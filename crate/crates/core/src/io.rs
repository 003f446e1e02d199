//! CSV and JSON exports. Floats are written with 17 significant digits so
//! that values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::RateReport;
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::grid::{PeriodicGrid, PeriodicGridFunction};

#[inline]
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn profile_csv_string(u: &PeriodicGridFunction) -> String {
    let mut out = String::from("theta,value\n");
    for (t, v) in u.grid().nodes().into_iter().zip(u.values()) {
        let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(*v));
    }
    out
}

/// Grid CSV with columns `theta,value`.
pub fn write_profile_csv(path: &Path, u: &PeriodicGridFunction) -> Result<()> {
    fs::write(path, profile_csv_string(u))?;
    Ok(())
}

/// Reads a grid CSV written by [`write_profile_csv`]. The `theta` column must
/// match the nodes of a periodic grid of the same length.
pub fn read_profile_csv(path: &Path) -> Result<PeriodicGridFunction> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "theta,value" => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: expected header 'theta,value', got {other:?}",
                path.display()
            )))
        }
    }
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        let mut next = || -> Result<f64> {
            let c = cells.next().ok_or_else(|| {
                Error::Parse(format!("{}: row {} is short", path.display(), i + 1))
            })?;
            c.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{}: row {}: {e}", path.display(), i + 1)))
        };
        thetas.push(next()?);
        values.push(next()?);
    }
    let grid = PeriodicGrid::new(values.len())?;
    for (j, t) in thetas.iter().enumerate() {
        if (t - grid.node(j)).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "{}: theta {t} at row {} is not grid node {}",
                path.display(),
                j + 1,
                grid.node(j)
            )));
        }
    }
    PeriodicGridFunction::new(grid, values)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// `series.csv`: one row per accepted step (and the initial state, with dt 0).
pub fn write_series_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = (0..traj.times.len()).map(|i| {
        let dt = if i == 0 { 0.0 } else { traj.step_log[i - 1].dt };
        vec![
            traj.times[i],
            traj.energies[i],
            traj.entropies[i],
            traj.masses[i],
            dt,
        ]
    });
    write_rows(path, "t,energy,entropy,mass,dt", rows)
}

/// `snapshot_<k>.csv` for every recorded snapshot.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<()> {
    for (k, u) in traj.snapshots.iter().enumerate() {
        write_profile_csv(&dir.join(format!("snapshot_{k}.csv")), u)?;
    }
    Ok(())
}

/// `rates.csv` with columns `t,distance_l2,distance_h1,bound`.
pub fn write_rates_csv(path: &Path, report: &RateReport) -> Result<()> {
    let rows = (0..report.times.len()).map(|i| {
        vec![
            report.times[i],
            report.distances_l2[i],
            report.distances_h1[i],
            report.bound_curve[i],
        ]
    });
    write_rows(path, "t,distance_l2,distance_h1,bound", rows)
}

/// Mass–τ curve with columns `tau,mass`.
pub fn write_mass_tau_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    write_rows(path, "tau,mass", curve.iter().map(|&(t, m)| vec![t, m]))
}
