//! Implicit time stepping of the (regularized) thin-film equation.
//!
//! Space is discretized in flux form. With pressure `p = δE/δu` at the nodes,
//! the flux lives on faces,
//!
//! ```text
//! J_{j+½} = −m_{j+½} (p_{j+1} − p_j)/h + ω (u_j + u_{j+1})/2,
//! u_t,j   = −(J_{j+½} − J_{j−½})/h,
//! ```
//!
//! with `m_{j+½}` the mean of the node mobilities. Because `p` is the exact
//! gradient of the discrete energy, the semi-discrete system dissipates that
//! energy at the rate `h Σ m (Δp/h)²` when ω = 0, and the mass `h Σ u_j` is
//! conserved exactly.
//!
//! Each time step is backward Euler with the mobility frozen at the previous
//! Picard iterate, which leaves one cyclic pentadiagonal solve per iteration.

use serde::{Deserialize, Serialize};

use crate::banded::CyclicBandMatrix;
use crate::error::{Error, Result};
use crate::functionals::{energy, entropy, variational_derivative, EntropyParams};
use crate::grid::{quadrature, PeriodicGridFunction};
use crate::steady_state::ModelParams;

/// Successful steps before the time step grows.
pub const GROW_AFTER: usize = 5;
pub const GROW_FACTOR: f64 = 1.2;
/// Relative energy increase tolerated in one step.
pub const ENERGY_TOL: f64 = 1e-9;
/// Clipped mass fraction above which a step logs a warning.
pub const CLIP_WARN_FRACTION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub params: ModelParams,
    /// Regularization ε of the mobility `|z|^{n+1}/(|z| + ε)`.
    pub eps: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl EvolutionConfig {
    /// Defaults: ε = 1e−8, adaptive dt in [1e−12, 1] starting at 1e−4,
    /// snapshots at the two ends.
    pub fn new(params: ModelParams, t_final: f64) -> Self {
        Self {
            params,
            eps: 1e-8,
            dt_initial: 1e-4,
            dt_min: 1e-12,
            dt_max: 1.0,
            t_final,
            snapshot_times: if t_final > 0.0 {
                vec![0.0, t_final]
            } else {
                vec![0.0]
            },
            newton_tol: 1e-10,
            max_newton_iters: 50,
        }
    }

    /// Pins the time step to `dt`.
    pub fn with_fixed_dt(mut self, dt: f64) -> Self {
        self.dt_initial = dt;
        self.dt_min = dt;
        self.dt_max = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be >= 0, got {}", self.eps));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_initial && self.dt_initial <= self.dt_max)
            || !self.dt_max.is_finite()
        {
            return bad(format!(
                "need 0 < dt_min <= dt_initial <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_initial, self.dt_max
            ));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iters == 0 {
            return bad("newton_tol must be > 0 and max_newton_iters >= 1".into());
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("snapshot_times must be sorted".into());
        }
        if self
            .snapshot_times
            .iter()
            .any(|&s| !(s >= 0.0 && s <= self.t_final))
        {
            return bad(format!("snapshot_times must lie in [0, {}]", self.t_final));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
}

/// Diagnostics at every accepted step, plus profiles at the requested
/// snapshot times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `∫u^{−β}`, `+∞` once the profile touches zero, NaN when n ≤ 3/2.
    pub entropies: Vec<f64>,
    pub masses: Vec<f64>,
    pub step_log: Vec<StepRecord>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<PeriodicGridFunction>,
    pub rejected_steps: usize,
    pub max_clip_fraction: f64,
    pub failed: bool,
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub profile: PeriodicGridFunction,
    pub newton_iters: usize,
    /// Mass fraction removed by clipping negative values.
    pub clip_fraction: f64,
}

/// `f_ε(z) = |z|^{n+1}/(|z| + ε)`, which is `|z|ⁿ` at ε = 0.
pub fn mobility(z: f64, n: f64, eps: f64) -> f64 {
    let a = z.abs();
    if a == 0.0 {
        0.0
    } else if eps == 0.0 {
        a.powf(n)
    } else {
        a.powf(n) * (a / (a + eps))
    }
}

/// Mobility at face `j+½`, stored at index `j`.
pub fn face_mobility(u: &PeriodicGridFunction, n: f64, eps: f64) -> Vec<f64> {
    let v = u.values();
    let len = v.len();
    let node: Vec<f64> = v.iter().map(|&z| mobility(z, n, eps)).collect();
    (0..len)
        .map(|j| 0.5 * (node[j] + node[(j + 1) % len]))
        .collect()
}

/// Face flux `J_{j+½}`, stored at index `j`.
pub fn flux(u: &PeriodicGridFunction, cfg: &EvolutionConfig) -> PeriodicGridFunction {
    let m = face_mobility(u, cfg.params.n, cfg.eps);
    PeriodicGridFunction::new(*u.grid(), flux_with(u, &m, cfg)).expect("same grid")
}

fn flux_with(u: &PeriodicGridFunction, m: &[f64], cfg: &EvolutionConfig) -> Vec<f64> {
    let p = variational_derivative(u, cfg.params.alpha);
    let (pv, uv) = (p.values(), u.values());
    let n = uv.len();
    let h = u.grid().spacing();
    let omega = cfg.params.omega;
    (0..n)
        .map(|j| {
            let k = (j + 1) % n;
            -m[j] * (pv[k] - pv[j]) / h + omega * 0.5 * (uv[j] + uv[k])
        })
        .collect()
}

fn divergence(jv: &[f64], h: f64) -> Vec<f64> {
    let n = jv.len();
    (0..n).map(|i| (jv[i] - jv[(i + n - 1) % n]) / h).collect()
}

/// `u_t = −(J_{j+½} − J_{j−½})/h`.
pub fn time_derivative(u: &PeriodicGridFunction, cfg: &EvolutionConfig) -> PeriodicGridFunction {
    let j = flux(u, cfg);
    let values = divergence(j.values(), u.grid().spacing())
        .into_iter()
        .map(|d| -d)
        .collect();
    PeriodicGridFunction::new(*u.grid(), values).expect("same grid")
}

/// `h Σ m_{j+½} ((p_{j+1} − p_j)/h)²`, the energy dissipation rate of the
/// semi-discrete system at ω = 0.
pub fn dissipation_rate(u: &PeriodicGridFunction, cfg: &EvolutionConfig) -> f64 {
    let p = variational_derivative(u, cfg.params.alpha);
    let m = face_mobility(u, cfg.params.n, cfg.eps);
    let pv = p.values();
    let n = pv.len();
    let h = u.grid().spacing();
    (0..n)
        .map(|j| {
            let g = (pv[(j + 1) % n] - pv[j]) / h;
            m[j] * g * g
        })
        .sum::<f64>()
        * h
}

/// Assembles `I + dt·L_m(D² + α²) + dt·ω·D₀`, where `L_m x = D₋(m D₊ x)`.
/// This is the Jacobian of the backward Euler residual in the increment
/// `u⁺ − u` for frozen face mobilities `m`.
fn assemble(
    n: usize,
    h: f64,
    m: &[f64],
    dt: f64,
    cfg: &EvolutionConfig,
) -> Result<CyclicBandMatrix> {
    let h2 = h * h;
    let a2 = cfg.params.alpha * cfg.params.alpha;
    // D² + α² stencil at offsets −1, 0, 1
    let k = [1.0 / h2, -2.0 / h2 + a2, 1.0 / h2];
    let mut mat = CyclicBandMatrix::new(n, 2)?;
    for j in 0..n {
        let (ml, mr) = (m[(j + n - 1) % n], m[j]);
        let l = [ml / h2, -(ml + mr) / h2, mr / h2];
        for (ai, la) in l.iter().enumerate() {
            for (bi, kb) in k.iter().enumerate() {
                mat.add(j, ai as isize + bi as isize - 2, dt * la * kb);
            }
        }
        mat.add(j, 0, 1.0);
        if cfg.params.omega != 0.0 {
            let w = dt * cfg.params.omega / (2.0 * h);
            mat.add(j, 1, w);
            mat.add(j, -1, -w);
        }
    }
    Ok(mat)
}

/// One backward Euler step of size `dt` with Picard iteration on the
/// mobility, followed by clipping of negative values and a uniform
/// mass-restoring rescale.
pub fn step(u: &PeriodicGridFunction, dt: f64, cfg: &EvolutionConfig) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
    }
    let (n_exp, eps) = (cfg.params.n, cfg.eps);
    let (n, h) = (u.len(), u.grid().spacing());
    let size = 1.0 + u.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // Solving for the increment keeps the linear-solve round-off
    // proportional to the update rather than to u itself.
    let mut iterate = u.clone();
    let mut converged = None;
    for it in 1..=cfg.max_newton_iters {
        let m = face_mobility(&iterate, n_exp, eps);
        let mat = assemble(n, h, &m, dt, cfg)?;
        let rhs: Vec<f64> = divergence(&flux_with(u, &m, cfg), h)
            .iter()
            .map(|d| -dt * d)
            .collect();
        let delta = mat.solve(&rhs)?;
        let mut change = 0.0f64;
        for ((x, d), u0) in iterate.values_mut().iter_mut().zip(&delta).zip(u.values()) {
            let next = u0 + d;
            change = change.max((next - *x).abs());
            *x = next;
        }
        if !change.is_finite() {
            break;
        }
        if change <= cfg.newton_tol * size {
            converged = Some(it);
            break;
        }
    }
    let newton_iters = converged.ok_or_else(|| {
        Error::Numerical(format!(
            "Picard iteration did not converge in {} iterations (dt = {dt:e})",
            cfg.max_newton_iters
        ))
    })?;

    let mass = quadrature(u);
    let h = u.grid().spacing();
    let negative: f64 = iterate
        .values()
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| -v)
        .sum::<f64>()
        * h;
    let mut clip_fraction = 0.0;
    if negative > 0.0 {
        for v in iterate.values_mut() {
            *v = v.max(0.0);
        }
        let positive = quadrature(&iterate);
        if positive > 0.0 {
            let s = mass / positive;
            for v in iterate.values_mut() {
                *v *= s;
            }
        }
        clip_fraction = negative / mass;
        if clip_fraction > CLIP_WARN_FRACTION {
            log::warn!(
                "clipping removed a mass fraction {clip_fraction:e} in one step (dt = {dt:e})"
            );
        }
    }
    Ok(StepOutcome {
        profile: iterate,
        newton_iters,
        clip_fraction,
    })
}

fn lerp(a: &PeriodicGridFunction, b: &PeriodicGridFunction, w: f64) -> PeriodicGridFunction {
    a.zip_with(b, |x, y| x + w * (y - x)).expect("same grid")
}

/// Runs the adaptive time stepper from `u0` to `cfg.t_final`.
///
/// A step is rejected and dt halved when the Picard iteration fails or, for
/// ω = 0, when the energy grows by more than `1e−9·(1 + |E|)`. After
/// [`GROW_AFTER`] consecutive accepted steps dt grows by [`GROW_FACTOR`].
/// If dt would drop below `dt_min` the run stops and the partial trajectory
/// is returned with `failed` set.
pub fn evolve(u0: &PeriodicGridFunction, cfg: &EvolutionConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(
            "initial profile must be finite and nonnegative".into(),
        ));
    }
    let mass0 = quadrature(u0);
    if !(mass0 > 0.0) {
        return Err(Error::Domain(
            "initial profile must have positive mass".into(),
        ));
    }
    let alpha = cfg.params.alpha;
    let entropy_params = EntropyParams::new(cfg.params.n).ok();
    let entropy_of = |u: &PeriodicGridFunction| entropy_params.map_or(f64::NAN, |p| entropy(u, &p));

    let mut traj = Trajectory {
        times: vec![0.0],
        energies: vec![energy(u0, alpha).total],
        entropies: vec![entropy_of(u0)],
        masses: vec![mass0],
        step_log: Vec::new(),
        snapshot_times: Vec::new(),
        snapshots: Vec::new(),
        rejected_steps: 0,
        max_clip_fraction: 0.0,
        failed: false,
        failure: None,
    };
    let mut pending = cfg.snapshot_times.iter().copied().peekable();
    while let Some(&s) = pending.peek() {
        if s > 0.0 {
            break;
        }
        traj.snapshot_times.push(s);
        traj.snapshots.push(u0.clone());
        pending.next();
    }

    let mut u = u0.clone();
    let mut t = 0.0;
    let mut e = traj.energies[0];
    let mut dt = cfg.dt_initial;
    let mut streak = 0usize;
    let t_end = cfg.t_final;
    while t < t_end {
        let last = t + dt >= t_end * (1.0 - 1e-12);
        let dt_try = if last { t_end - t } else { dt };
        let attempt = step(&u, dt_try, cfg).and_then(|out| {
            let e_new = energy(&out.profile, alpha).total;
            if cfg.params.omega == 0.0 && e_new > e + ENERGY_TOL * (1.0 + e.abs()) {
                Err(Error::Numerical(format!(
                    "energy increased from {e} to {e_new} (dt = {dt_try:e})"
                )))
            } else {
                Ok((out, e_new))
            }
        });
        let (out, e_new) = match attempt {
            Ok(v) => v,
            Err(err) => {
                traj.rejected_steps += 1;
                streak = 0;
                dt = 0.5 * dt_try;
                log::debug!("step rejected at t = {t}: {err}");
                if dt < cfg.dt_min {
                    traj.failed = true;
                    traj.failure = Some(format!("time step fell below dt_min at t = {t}: {err}"));
                    log::warn!("evolution aborted at t = {t}: {err}");
                    break;
                }
                continue;
            }
        };
        let t_new = if last { t_end } else { t + dt_try };
        while let Some(&s) = pending.peek() {
            if s > t_new {
                break;
            }
            traj.snapshot_times.push(s);
            traj.snapshots
                .push(lerp(&u, &out.profile, (s - t) / dt_try));
            pending.next();
        }
        u = out.profile;
        t = t_new;
        e = e_new;
        traj.times.push(t);
        traj.energies.push(e);
        traj.entropies.push(entropy_of(&u));
        traj.masses.push(quadrature(&u));
        traj.step_log.push(StepRecord {
            t,
            dt: dt_try,
            newton_iters: out.newton_iters,
        });
        traj.max_clip_fraction = traj.max_clip_fraction.max(out.clip_fraction);
        streak += 1;
        if streak >= GROW_AFTER {
            dt = (dt * GROW_FACTOR).min(cfg.dt_max);
            streak = 0;
        }
        dt = dt.clamp(cfg.dt_min, cfg.dt_max);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::entropy_growth_constant;
    use crate::grid::{linf_norm, PeriodicGrid};
    use crate::steady_state::minimizer;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params(alpha: f64, mass: f64) -> ModelParams {
        ModelParams::new(alpha, 3.0, 0.0, mass).unwrap()
    }

    #[test]
    fn mobility_examples() {
        assert_eq!(mobility(2.0, 3.0, 0.0), 8.0);
        assert_abs_diff_eq!(mobility(1.0, 3.0, 1.0), 0.5, epsilon = 1e-15);
        for &n in &[1.5, 2.0, 3.0] {
            for &e in &[0.0, 1e-8, 1.0] {
                assert_eq!(mobility(0.0, n, e), 0.0);
            }
        }
        assert_eq!(mobility(-2.0, 3.0, 0.0), 8.0);
        for &z in &[1e-6, 0.1, 1.0, 5.0] {
            assert!(mobility(z, 3.0, 0.3) <= z.powi(3));
            // f_ε(z) = z⁴/(z + ε) for n = 3
            assert_abs_diff_eq!(
                mobility(z, 3.0, 0.3),
                z.powi(4) / (z + 0.3),
                epsilon = 1e-15 * z.powi(3)
            );
        }
    }

    #[test]
    fn flux_of_constant_profile() {
        let g = PeriodicGrid::new(512).unwrap();
        let cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
        let c = 1.3;
        let fc = mobility(c, 3.0, cfg.eps);
        let j = flux(&g.constant(c), &cfg);
        let h = g.spacing();
        for (i, v) in j.values().iter().enumerate() {
            let face = g.node(i) + 0.5 * h;
            // the face difference of cos θ is exactly −sin(θ_{j+½}) sinc(h/2)
            let exact = -fc * face.sin() * (0.5 * h).sin() / (0.5 * h);
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-12);
            assert_abs_diff_eq!(*v, -fc * face.sin(), epsilon = 3e-5);
        }
        let ut = time_derivative(&g.constant(c), &cfg);
        for (v, t) in ut.values().iter().zip(g.nodes()) {
            assert_abs_diff_eq!(*v, fc * t.cos(), epsilon = 1e-4);
        }
    }

    #[test]
    fn flux_is_conservative_and_dissipative() {
        let g = PeriodicGrid::new(128).unwrap();
        let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
        let u = g.sample(|t| 1.0 + 0.5 * (t + 0.3).sin() + 0.2 * (3.0 * t).cos());
        let ut = time_derivative(&u, &cfg);
        assert!(quadrature(&ut).abs() < 1e-12);
        // dE/dt = h Σ p u_t = −dissipation_rate
        let p = variational_derivative(&u, 1.0);
        let de = quadrature(&p.zip_with(&ut, |a, b| a * b).unwrap());
        assert_abs_diff_eq!(de, -dissipation_rate(&u, &cfg), epsilon = 1e-10);
        cfg.params.omega = 2.0;
        assert!(quadrature(&time_derivative(&u, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn flux_vanishes_at_minimizer_up_to_discretization() {
        let cfg = EvolutionConfig::new(params(0.5, 20.0), 1.0);
        let s = minimizer(&cfg.params).unwrap();
        let mut prev = f64::INFINITY;
        for n in [128, 256, 512] {
            let g = PeriodicGrid::new(n).unwrap();
            let r = linf_norm(&flux(&s.evaluate_on_grid(&g), &cfg));
            assert!(r < 0.5 * prev, "N={n}: {r}");
            prev = r;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn step_preserves_minimizer() {
        let g = PeriodicGrid::new(512).unwrap();
        for &(a, m) in &[(0.5, 20.0), (1.0, 2.0 * PI)] {
            let cfg = EvolutionConfig::new(params(a, m), 1.0);
            let s = minimizer(&cfg.params).unwrap();
            let u = s.evaluate_on_grid(&g);
            let dt = 1e-3;
            let out = step(&u, dt, &cfg).unwrap();
            let change = linf_norm(&out.profile.sub(&u).unwrap());
            let rate = linf_norm(&time_derivative(&u, &cfg));
            assert!(
                change <= 1.01 * dt * rate + 1e-14,
                "alpha {a}: {change} vs {}",
                dt * rate
            );
            // the sampled closed form is a steady state only up to O(h²)
            assert!(change < 2e-3 * dt, "alpha {a}: {}", change / dt);
        }
    }

    #[test]
    fn step_conserves_mass() {
        let g = PeriodicGrid::new(128).unwrap();
        let cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
        let u = g.sample(|t| 1.0 + 0.9 * t.cos());
        let out = step(&u, 1e-2, &cfg).unwrap();
        let (m0, m1) = (quadrature(&u), quadrature(&out.profile));
        assert!((m1 - m0).abs() <= 1e-12 * m0);
        assert!(energy(&out.profile, 1.0).total <= energy(&u, 1.0).total);
        assert!(step(&u, 0.0, &cfg).is_err());
    }

    #[test]
    fn step_reports_picard_failure() {
        let g = PeriodicGrid::new(64).unwrap();
        let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
        cfg.max_newton_iters = 1;
        let u = g.sample(|t| 1.0 + 0.9 * t.cos());
        assert!(matches!(step(&u, 1.0, &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn config_validation() {
        let p = params(1.0, 1.0);
        assert!(EvolutionConfig::new(p, 1.0).validate().is_ok());
        let mut c = EvolutionConfig::new(p, 1.0);
        c.dt_min = 1.0;
        assert!(c.validate().is_err());
        let mut c = EvolutionConfig::new(p, 1.0);
        c.snapshot_times = vec![0.5, 0.2];
        assert!(c.validate().is_err());
        let mut c = EvolutionConfig::new(p, 1.0);
        c.snapshot_times = vec![2.0];
        assert!(c.validate().is_err());
        let mut c = EvolutionConfig::new(p, 1.0);
        c.eps = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let g = PeriodicGrid::new(64).unwrap();
        let cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 0.0);
        let u0 = g.constant(1.0);
        let tr = evolve(&u0, &cfg).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0], u0);
        assert!(!tr.failed);
    }

    #[test]
    fn evolve_rejects_bad_initial_data() {
        let g = PeriodicGrid::new(64).unwrap();
        let cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
        assert!(evolve(&g.constant(0.0), &cfg).is_err());
        let mut u = g.constant(1.0);
        u.values_mut()[3] = -1.0;
        assert!(evolve(&u, &cfg).is_err());
    }

    #[test]
    fn constant_initial_data_dissipates_energy() {
        let g = PeriodicGrid::new(128).unwrap();
        let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 5.0);
        cfg.snapshot_times = vec![0.0, 0.5, 1.0, 2.5, 5.0];
        let tr = evolve(&g.constant(1.0), &cfg).unwrap();
        assert!(!tr.failed);
        assert_eq!(tr.final_time(), 5.0);
        assert_eq!(tr.snapshot_times, cfg.snapshot_times);
        assert!(tr.energies.windows(2).all(|w| w[1] < w[0]));
        for m in &tr.masses {
            assert!((m - 2.0 * PI).abs() <= 1e-8 * 2.0 * PI);
        }
        // entropy stays below the linear growth bound
        let p = EntropyParams::new(3.0).unwrap();
        let k0 = entropy_growth_constant(2.0 * PI, 1.0, &p, tr.energies[0]).unwrap();
        for (s, t) in tr.entropies.iter().zip(&tr.times) {
            assert!(*s <= tr.entropies[0] + k0 * t * 1.05 + 1e-9);
        }
    }

    #[test]
    fn minimizer_persists() {
        let g = PeriodicGrid::new(512).unwrap();
        let cfg = EvolutionConfig::new(params(0.5, 20.0), 10.0);
        let s = minimizer(&cfg.params).unwrap();
        let u0 = s.evaluate_on_grid(&g);
        let tr = evolve(&u0, &cfg).unwrap();
        assert!(!tr.failed);
        let last = tr.snapshots.last().unwrap();
        assert!(linf_norm(&last.sub(&u0).unwrap()) < 1e-4);
    }

    #[test]
    fn fixed_dt_failure_sets_flag() {
        let g = PeriodicGrid::new(64).unwrap();
        let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0).with_fixed_dt(0.5);
        cfg.max_newton_iters = 1;
        let tr = evolve(&g.sample(|t| 1.0 + 0.9 * t.cos()), &cfg).unwrap();
        assert!(tr.failed);
        assert!(tr.failure.is_some());
        assert_eq!(tr.times, vec![0.0]);
    }

    #[test]
    fn snapshots_interpolate_linearly() {
        let g = PeriodicGrid::new(64).unwrap();
        let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 0.1).with_fixed_dt(0.02);
        cfg.snapshot_times = vec![0.0, 0.01, 0.02, 0.1];
        let tr = evolve(&g.constant(1.0), &cfg).unwrap();
        assert_eq!(tr.snapshots.len(), 4);
        let mid = lerp(&tr.snapshots[0], &tr.snapshots[2], 0.5);
        assert!(linf_norm(&mid.sub(&tr.snapshots[1]).unwrap()) < 1e-14);
    }

    #[test]
    fn dissipation_identity_between_snapshots() {
        let g = PeriodicGrid::new(128).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| 0.01 * i as f64).collect();
        let mut cfg = EvolutionConfig::new(params(0.5, 2.0 * PI), 0.2).with_fixed_dt(1e-4);
        cfg.eps = 0.0;
        cfg.snapshot_times = times.clone();
        let u0 = g.sample(|t| 1.0 + 0.2 * t.sin() + 0.1 * (2.0 * t).cos());
        let tr = evolve(&u0, &cfg).unwrap();
        for k in 1..tr.snapshots.len() - 1 {
            let dt = times[k + 1] - times[k - 1];
            let de = (energy(&tr.snapshots[k + 1], 0.5).total
                - energy(&tr.snapshots[k - 1], 0.5).total)
                / dt;
            let rate = dissipation_rate(&tr.snapshots[k], &cfg);
            assert!((de + rate).abs() <= 0.1 * rate, "k={k}: {de} vs {}", -rate);
        }
    }

    #[test]
    fn regularization_differences_shrink_with_eps() {
        let g = PeriodicGrid::new(64).unwrap();
        let u0 = g.sample(|t| 1.0 + 0.5 * t.cos());
        let run = |eps: f64| {
            let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0).with_fixed_dt(1e-3);
            cfg.eps = eps;
            evolve(&u0, &cfg).unwrap().snapshots.pop().unwrap()
        };
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let d = linf_norm(&run(eps).sub(&run(eps / 2.0)).unwrap());
            assert!(d < prev, "eps {eps}: {d}");
            prev = d;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn steps_conserve_mass(
            coeffs in proptest::array::uniform4(-0.4f64..0.4),
            eps in 0.0f64..0.1,
            dt in 1e-4f64..1e-2,
            omega in -1.0f64..1.0,
        ) {
            let g = PeriodicGrid::new(64).unwrap();
            let mut cfg = EvolutionConfig::new(params(1.0, 2.0 * PI), 1.0);
            cfg.eps = eps;
            cfg.params.omega = omega;
            let u = g.sample(|t| 1.0 + coeffs[0] * t.cos() + coeffs[1] * t.sin()
                + coeffs[2] * (2.0 * t).cos() + coeffs[3] * (3.0 * t).sin());
            let out = step(&u, dt, &cfg).unwrap();
            let (m0, m1) = (quadrature(&u), quadrature(&out.profile));
            prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
        }
    }
}
