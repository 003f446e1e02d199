use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use thinfilm::analysis::{self, RateReport};
use thinfilm::evolution::{self, EvolutionConfig, Trajectory};
use thinfilm::functionals::{self, EnergyBreakdown};
use thinfilm::grid::{self, PeriodicGrid, PeriodicGridFunction};
use thinfilm::io;
use thinfilm::steady_state::{self, ModelParams, SteadyState};

use crate::config::{ensure_dir, InitialProfile, RunConfig};

#[derive(Debug, Serialize)]
pub struct SteadyReport {
    pub state: SteadyState,
    pub grid_points: usize,
    pub euler_lagrange_residual: f64,
    pub contact_slope: f64,
    pub grid_mass: f64,
    pub min_value: f64,
    pub energy: EnergyBreakdown,
    pub energy_lower_bound: f64,
}

pub fn steady_report(
    params: &ModelParams,
    grid_points: usize,
) -> Result<(SteadyReport, PeriodicGridFunction)> {
    let state = steady_state::minimizer(params)?;
    let g = PeriodicGrid::new(grid_points)?;
    let u = state.evaluate_on_grid(&g);
    let report = SteadyReport {
        state,
        grid_points,
        euler_lagrange_residual: steady_state::euler_lagrange_residual(&state, &g),
        contact_slope: state.contact_slope(),
        grid_mass: grid::quadrature(&u),
        min_value: state.min_value(),
        energy: functionals::energy(&u, params.alpha),
        energy_lower_bound: functionals::energy_lower_bound(params.mass, params.alpha),
    };
    Ok((report, u))
}

fn write_steady(dir: &Path, params: &ModelParams, grid_points: usize) -> Result<SteadyReport> {
    ensure_dir(dir)?;
    let (report, u) = steady_report(params, grid_points)?;
    io::write_profile_csv(&dir.join("profile.csv"), &u)?;
    io::write_json(&dir.join("steady_state.json"), &report)?;
    Ok(report)
}

pub fn run_steady(cfg: &RunConfig) -> Result<bool> {
    let r = write_steady(&cfg.output_dir, &cfg.model, cfg.grid_points)?;
    println!(
        "{:?} alpha={} mass={} tau={:.12} lambda={:.12} residual={:.3e} contact_slope={:.3e}",
        r.state.regime,
        r.state.alpha,
        r.state.mass,
        r.state.tau,
        r.state.lagrange,
        r.euler_lagrange_residual,
        r.contact_slope
    );
    Ok(true)
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    u0: &'a InitialProfile,
    grid_points: usize,
    evolution: &'a EvolutionConfig,
    accepted_steps: usize,
    rejected_steps: usize,
    final_time: f64,
    failed: bool,
    failure: Option<String>,
    max_clip_fraction: f64,
    mass_drift: f64,
    energy_increases: usize,
    snapshot_times: &'a [f64],
    rate_report: Option<&'static str>,
    rate_report_error: Option<String>,
}

fn initial_profile(
    spec: &InitialProfile,
    params: &ModelParams,
    grid_points: usize,
) -> Result<PeriodicGridFunction> {
    let g = PeriodicGrid::new(grid_points)?;
    Ok(match spec {
        InitialProfile::Const { value } => g.constant(*value),
        InitialProfile::Steady => steady_state::minimizer(params)?.evaluate_on_grid(&g),
        InitialProfile::SteadyPerturb { amplitude } => {
            steady_state::perturbed_profile(&steady_state::minimizer(params)?, &g, *amplitude)
        }
        InitialProfile::File { path } => io::read_profile_csv(path)
            .with_context(|| format!("reading initial profile {}", path.display()))?,
    })
}

fn write_trajectory(
    dir: &Path,
    spec: &InitialProfile,
    evo: &EvolutionConfig,
    u0: &PeriodicGridFunction,
) -> Result<(Trajectory, Option<RateReport>)> {
    ensure_dir(dir)?;
    let traj = evolution::evolve(u0, evo)?;
    io::write_series_csv(&dir.join("series.csv"), &traj)?;
    io::write_snapshots(dir, &traj)?;
    let (report, report_error) = match steady_state::minimizer(&evo.params)
        .map_err(anyhow::Error::from)
        .and_then(|s| Ok(analysis::rate_report(&traj, &s, &evo.params)?))
    {
        Ok(r) => {
            io::write_rates_csv(&dir.join("rates.csv"), &r)?;
            io::write_json(&dir.join("rate_report.json"), &r)?;
            (Some(r), None)
        }
        Err(e) => {
            log::warn!("no rate report: {e}");
            (None, Some(e.to_string()))
        }
    };
    let m0 = traj.masses[0];
    let summary = RunSummary {
        u0: spec,
        grid_points: u0.len(),
        evolution: evo,
        accepted_steps: traj.step_log.len(),
        rejected_steps: traj.rejected_steps,
        final_time: traj.final_time(),
        failed: traj.failed,
        failure: traj.failure.clone(),
        max_clip_fraction: traj.max_clip_fraction,
        mass_drift: traj
            .masses
            .iter()
            .map(|m| (m - m0).abs() / m0)
            .fold(0.0, f64::max),
        energy_increases: traj.energies.windows(2).filter(|w| w[1] > w[0]).count(),
        snapshot_times: &traj.snapshot_times,
        rate_report: report.as_ref().map(|_| "rate_report.json"),
        rate_report_error: report_error,
    };
    io::write_json(&dir.join("run.json"), &summary)?;
    Ok((traj, report))
}

pub fn run_evolve(cfg: &RunConfig) -> Result<bool> {
    let mut evo = cfg
        .evolution
        .clone()
        .context("evolve needs an evolution configuration")?;
    let spec = cfg.u0.clone().unwrap_or(InitialProfile::Const {
        value: cfg.model.mass / (2.0 * PI),
    });
    let u0 = initial_profile(&spec, &cfg.model, cfg.grid_points)?;
    if let InitialProfile::File { .. } = spec {
        let mass = grid::quadrature(&u0);
        if (mass - evo.params.mass).abs() > 1e-9 * mass {
            log::info!("using mass {mass} of the initial profile file");
        }
        evo.params.mass = mass;
    }
    let (traj, report) = write_trajectory(&cfg.output_dir, &spec, &evo, &u0)?;
    println!(
        "t={} steps={} rejected={} energy {:.12} -> {:.12} mass {:.12}{}",
        traj.final_time(),
        traj.step_log.len(),
        traj.rejected_steps,
        traj.energies[0],
        traj.energies.last().unwrap(),
        traj.masses.last().unwrap(),
        report
            .map(|r| format!(
                " {:?} fitted_exponent={:.4} fitted_rate={:.4}",
                r.bound_kind, r.fitted_exponent, r.fitted_rate
            ))
            .unwrap_or_default()
    );
    if traj.failed {
        eprintln!(
            "error: solver aborted: {}",
            traj.failure.unwrap_or_default()
        );
        return Ok(false);
    }
    Ok(true)
}

#[derive(Debug, Serialize)]
struct CellResult {
    alpha: f64,
    mass: f64,
    dir: String,
    ok: bool,
    error: Option<String>,
    regime: Option<steady_state::Regime>,
    tau: Option<f64>,
    euler_lagrange_residual: Option<f64>,
    evolution_failed: Option<bool>,
}

fn sweep_cell(cfg: &RunConfig, alpha: f64, mass: f64) -> CellResult {
    let name = format!("alpha_{alpha}_mass_{mass}");
    let dir = cfg.output_dir.join(&name);
    let mut cell = CellResult {
        alpha,
        mass,
        dir: name,
        ok: false,
        error: None,
        regime: None,
        tau: None,
        euler_lagrange_residual: None,
        evolution_failed: None,
    };
    let run = |cell: &mut CellResult| -> Result<()> {
        let params = ModelParams::new(alpha, cfg.model.n, cfg.model.omega, mass)?;
        let r = write_steady(&dir, &params, cfg.grid_points)?;
        cell.regime = Some(r.state.regime);
        cell.tau = Some(r.state.tau);
        cell.euler_lagrange_residual = Some(r.euler_lagrange_residual);
        if let Some(evo) = &cfg.evolution {
            let mut evo = evo.clone();
            evo.params = params;
            let spec = InitialProfile::Const {
                value: mass / (2.0 * PI),
            };
            let u0 = initial_profile(&spec, &params, cfg.grid_points)?;
            let (traj, _) = write_trajectory(&dir.join("evolution"), &spec, &evo, &u0)?;
            cell.evolution_failed = Some(traj.failed);
            if traj.failed {
                bail!("solver aborted: {}", traj.failure.unwrap_or_default());
            }
        }
        Ok(())
    };
    match run(&mut cell) {
        Ok(()) => cell.ok = true,
        Err(e) => {
            log::error!("cell alpha={alpha} mass={mass}: {e:#}");
            cell.error = Some(format!("{e:#}"));
        }
    }
    cell
}

pub fn run_sweep(cfg: &RunConfig) -> Result<bool> {
    if cfg.alphas.is_empty() || cfg.masses.is_empty() {
        log::warn!("empty alpha or mass list, nothing to do");
        return Ok(true);
    }
    ensure_dir(&cfg.output_dir)?;
    let cells: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.masses.iter().map(move |&m| (a, m)))
        .collect();
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(a, m)| sweep_cell(cfg, a, m))
        .collect();
    mass_tau_files(&cfg.output_dir, &cfg.alphas, cfg.samples)?;
    io::write_json(&cfg.output_dir.join("sweep.json"), &results)?;
    let failed = results.iter().filter(|c| !c.ok).count();
    println!("sweep: {} cells, {failed} failed", results.len());
    Ok(failed == 0)
}

fn mass_tau_files(dir: &Path, alphas: &[f64], samples: usize) -> Result<()> {
    for &alpha in alphas {
        let curve = analysis::mass_tau_curve(alpha, samples)?;
        io::write_mass_tau_csv(&dir.join(format!("mass_tau_alpha_{alpha}.csv")), &curve)?;
    }
    Ok(())
}

pub fn run_mass_tau(cfg: &RunConfig) -> Result<bool> {
    if cfg.alphas.is_empty() {
        log::warn!("empty alpha list, nothing to do");
        return Ok(true);
    }
    ensure_dir(&cfg.output_dir)?;
    mass_tau_files(&cfg.output_dir, &cfg.alphas, cfg.samples)?;
    println!(
        "mass-tau: wrote {} curves with {} samples",
        cfg.alphas.len(),
        cfg.samples
    );
    Ok(true)
}
