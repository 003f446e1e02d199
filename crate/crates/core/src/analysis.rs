//! Convergence bounds toward the energy minimizer and the diagnostics that
//! compare trajectories against them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::functionals::{entropy_growth_constant, EntropyParams};
use crate::grid::{h1_norm, l2_norm, PeriodicGrid};
use crate::integrate::{golden_section_max, linear_fit};
use crate::steady_state::{mass_of_tau, tau_upper, ModelParams, Regime, SteadyState};

/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 8;
/// Relative mass mismatch tolerated between trajectory and steady state.
pub const MASS_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// `‖u − u*‖_{H¹} ≤ K₁ e^{−μt}`
    ExponentialUpper,
    /// `‖u − u*‖₂ ≥ L^{1+β/2} (S₀ + K₀t)^{−1/β}`
    PowerLawLower,
    /// `‖u − u*‖₂ ≥ (K₂ + K₃t)^{−3/(2(β−1))}`
    TouchdownPowerLower,
}

/// Constants entering the applicable bound. Fields that do not apply to the
/// bound kind are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundConstants {
    pub mu: Option<f64>,
    pub eps0: Option<f64>,
    /// Prefactor fitted to the H¹ distances over the fit window.
    pub k1: Option<f64>,
    pub length_l: Option<f64>,
    pub s0: Option<f64>,
    pub k0: Option<f64>,
    pub beta: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub times: Vec<f64>,
    pub distances_l2: Vec<f64>,
    pub distances_h1: Vec<f64>,
    pub bound_curve: Vec<f64>,
    pub bound_kind: BoundKind,
    /// Log-log slope of the fitted distance over the fit window.
    pub fitted_exponent: f64,
    /// Semilog slope of the fitted distance over the fit window.
    pub fitted_rate: f64,
    /// Half-open index range `[start, end)` of the fit window.
    pub fit_window: (usize, usize),
    pub constants: BoundConstants,
}

/// `μ = (1−α²)(min u*)ⁿ` and `ε₀ = ((1−α²)π/2)(min u*)²` for a strictly
/// positive minimizer.
pub fn exponential_rate(state: &SteadyState, n: f64) -> Result<(f64, f64)> {
    if state.regime != Regime::Positive {
        return Err(Error::Regime(format!(
            "exponential rate needs a positive minimizer, got {:?}",
            state.regime
        )));
    }
    let gap = 1.0 - state.alpha * state.alpha;
    let m = state.min_value();
    Ok((gap * m.powf(n), 0.5 * gap * PI * m * m))
}

/// `L^{1+β/2} (S₀ + K₀t)^{−1/β}` at each time.
pub fn power_law_lower_bound(
    length_l: f64,
    s0: f64,
    k0: f64,
    beta: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if !(length_l > 0.0 && beta > 0.0 && s0 > 0.0 && k0 >= 0.0) {
        return Err(Error::Parameter(format!(
            "power-law bound needs L > 0, beta > 0, S0 > 0, K0 >= 0 (got {length_l}, {beta}, {s0}, {k0})"
        )));
    }
    let pre = length_l.powf(1.0 + 0.5 * beta);
    Ok(times
        .iter()
        .map(|&t| pre * (s0 + k0 * t).powf(-1.0 / beta))
        .collect())
}

/// Coefficient `c` in `‖u* 1_I‖₂ ≤ c L^{3/2}` for an interval `I` of length
/// `L ≤ 2π` centered at a quadratic touchdown with `u*'' = q`:
/// `‖u* 1_I‖₂ ≤ q L^{5/2}/√320 ≤ (2π q/√320) L^{3/2}`.
pub fn touchdown_constant(quad_coeff: f64) -> f64 {
    2.0 * PI * quad_coeff / 320f64.sqrt()
}

/// Lower bound near a quadratic touchdown,
/// `max_ε [L^{1/β+1/2} S^{−1/β} − c L^{3/2}]` with `L = ε S^{−1/(β−1)}`,
/// `S = S₀ + K₀t` and `L ≤ 2π`, maximized by golden-section search.
pub fn touchdown_lower_bound(
    s0: f64,
    k0: f64,
    beta: f64,
    quad_coeff: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if !(beta > 1.0) {
        return Err(Error::Parameter(format!(
            "touchdown bound needs beta > 1 (n > 5/2), got {beta}"
        )));
    }
    if !(s0 > 0.0 && k0 >= 0.0 && quad_coeff > 0.0) {
        return Err(Error::Parameter(format!(
            "touchdown bound needs S0 > 0, K0 >= 0, q > 0 (got {s0}, {k0}, {quad_coeff})"
        )));
    }
    let c = touchdown_constant(quad_coeff);
    let a = 1.0 / beta + 0.5;
    Ok(times
        .iter()
        .map(|&t| {
            let s = s0 + k0 * t;
            let scale = s.powf(-1.0 / (beta - 1.0));
            let value = |eps: f64| {
                let l = eps * scale;
                l.powf(a) * s.powf(-1.0 / beta) - c * l.powf(1.5)
            };
            let eps_max = 2.0 * PI / scale;
            golden_section_max(value, 0.0, eps_max, 1e-6).1.max(0.0)
        })
        .collect())
}

/// Least-squares slopes of `ln d` against `ln t` and against `t` over the
/// samples with `t > 0` and `d > 0`.
fn fit_slopes(times: &[f64], d: &[f64]) -> (f64, f64) {
    let (mut lt, mut tt, mut ld) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, &v) in times.iter().zip(d) {
        if t > 0.0 && v > 0.0 && v.is_finite() {
            lt.push(t.ln());
            tt.push(t);
            ld.push(v.ln());
        }
    }
    let exp = linear_fit(&lt, &ld).map_or(f64::NAN, |f| f.0);
    let rate = linear_fit(&tt, &ld).map_or(f64::NAN, |f| f.0);
    (exp, rate)
}

/// Distances of the trajectory snapshots from `state`, the applicable
/// bound, and fitted decay over the last half of the snapshots.
pub fn rate_report(
    traj: &Trajectory,
    state: &SteadyState,
    params: &ModelParams,
) -> Result<RateReport> {
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| Error::Analysis("trajectory has no snapshots".into()))?;
    let m0 = traj.masses[0];
    if (m0 - state.mass).abs() > MASS_MATCH_TOL * state.mass {
        return Err(Error::Analysis(format!(
            "trajectory mass {m0} does not match steady-state mass {}",
            state.mass
        )));
    }
    let grid: PeriodicGrid = *first.grid();
    let u_star = state.evaluate_on_grid(&grid);
    let mut distances_l2 = Vec::with_capacity(traj.snapshots.len());
    let mut distances_h1 = Vec::with_capacity(traj.snapshots.len());
    for u in &traj.snapshots {
        let w = u.sub(&u_star)?;
        distances_l2.push(l2_norm(&w));
        distances_h1.push(h1_norm(&w));
    }
    let times = traj.snapshot_times.clone();
    let len = times.len();
    let fit_window = (len / 2, len);
    if fit_window.1 - fit_window.0 < MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "fit window holds {} samples, need at least {MIN_FIT_SAMPLES}",
            fit_window.1 - fit_window.0
        )));
    }
    let window = fit_window.0..fit_window.1;

    let e0 = traj.energies[0];
    let s0 = traj.entropies[0];
    let mut constants = BoundConstants::default();
    let (bound_kind, bound_curve, fit_source) = match state.regime {
        Regime::Positive => {
            let (mu, eps0) = exponential_rate(state, params.n)?;
            let logs: Vec<f64> = window
                .clone()
                .filter(|&i| distances_h1[i] > 0.0)
                .map(|i| distances_h1[i].ln() + mu * times[i])
                .collect();
            let k1 = if logs.is_empty() {
                f64::NAN
            } else {
                (logs.iter().sum::<f64>() / logs.len() as f64).exp()
            };
            constants.mu = Some(mu);
            constants.eps0 = Some(eps0);
            constants.k1 = Some(k1);
            let curve = times.iter().map(|t| k1 * (-mu * t).exp()).collect();
            (BoundKind::ExponentialUpper, curve, &distances_h1)
        }
        Regime::CompactSupport => {
            let ep = EntropyParams::new(params.n).map_err(|_| {
                Error::Analysis(format!("no applicable bound for n = {} <= 3/2", params.n))
            })?;
            let length_l = state.dry_length();
            if !(length_l > 0.0) {
                return Err(Error::Analysis("minimizer has no dry interval".into()));
            }
            let k0 = entropy_growth_constant(state.mass, state.alpha, &ep, e0)?;
            constants.length_l = Some(length_l);
            constants.s0 = Some(s0);
            constants.k0 = Some(k0);
            constants.beta = Some(ep.beta);
            let curve = if s0.is_finite() {
                power_law_lower_bound(length_l, s0, k0, ep.beta, &times)?
            } else {
                vec![0.0; len]
            };
            (BoundKind::PowerLawLower, curve, &distances_l2)
        }
        Regime::Critical => {
            let ep = EntropyParams::new(params.n)
                .ok()
                .filter(|p| p.beta > 1.0)
                .ok_or_else(|| {
                    Error::Analysis(format!(
                        "no applicable bound for n = {} <= 5/2 at critical mass",
                        params.n
                    ))
                })?;
            let k0 = entropy_growth_constant(state.mass, state.alpha, &ep, e0)?;
            let q = state.second_derivative(PI);
            constants.s0 = Some(s0);
            constants.k0 = Some(k0);
            constants.beta = Some(ep.beta);
            let curve = if s0.is_finite() {
                let kappa = touchdown_lower_bound(1.0, 0.0, ep.beta, q, &[0.0])?[0];
                // κ S^{−3/(2(β−1))} = (K₂ + K₃ t)^{−3/(2(β−1))}
                let w = kappa.powf(-2.0 * (ep.beta - 1.0) / 3.0);
                constants.k2 = Some(w * s0);
                constants.k3 = Some(w * k0);
                touchdown_lower_bound(s0, k0, ep.beta, q, &times)?
            } else {
                vec![0.0; len]
            };
            (BoundKind::TouchdownPowerLower, curve, &distances_l2)
        }
    };
    let (fitted_exponent, fitted_rate) = fit_slopes(&times[window.clone()], &fit_source[window]);
    Ok(RateReport {
        times,
        distances_l2,
        distances_h1,
        bound_curve,
        bound_kind,
        fitted_exponent,
        fitted_rate,
        fit_window,
        constants,
    })
}

/// Samples `τ ↦ M(τ)` on `τ_i = τ_max (i+1)/samples`, with the last point
/// pulled in to `τ_max (1 − 1e−9)`.
pub fn mass_tau_curve(alpha: f64, tau_samples: usize) -> Result<Vec<(f64, f64)>> {
    if tau_samples < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 samples, got {tau_samples}"
        )));
    }
    let top = tau_upper(alpha);
    (0..tau_samples)
        .map(|i| {
            let tau = if i + 1 == tau_samples {
                top * (1.0 - 1e-9)
            } else {
                top * (i + 1) as f64 / tau_samples as f64
            };
            Ok((tau, mass_of_tau(tau, alpha)?))
        })
        .collect()
}

/// Checks `p²(p²−α²)² ≥ (1−α²)(p²−α²)` exactly for `α = num/den` by
/// clearing denominators in integer arithmetic.
pub fn multiplier_inequality_holds(p: i64, num: i64, den: i64) -> bool {
    let (p, a, b) = (p as i128, num as i128, den as i128);
    let q = p * p * b * b - a * a;
    p * p * q * q >= (b * b - a * a) * q
}
