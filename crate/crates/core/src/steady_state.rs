//! Closed-form energy minimizers of fixed mass.
//!
//! On its support every minimizer solves `u'' + α²u + cos θ = λ`. Three
//! regimes occur, distinguished by the sign of `M(1−α²) − 2π`:
//!
//! * `Positive` (requires α < 1): `u = M/2π + cos θ/(1−α²)`, strictly positive.
//! * `Critical`: `u = (1 + cos θ)/(1−α²)`, touching down quadratically at θ = ±π.
//! * `CompactSupport`: `u = A(τ)(cos αθ − cos ατ) + u⁰(θ) − u⁰(τ)` on `|θ| ≤ τ`
//!   and zero elsewhere, with `A(τ)` fixed by the zero contact angle condition
//!   `u'(τ) = 0`. The support half-length τ is the inverse of the strictly
//!   increasing map τ ↦ M(τ).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, PeriodicGridFunction};
use crate::integrate::adaptive_gauss_kronrod;

/// Relative tolerance on `M(1−α²) − 2π` below which a state is classified
/// as critical.
pub const REGIME_TOL: f64 = 1e-12;
/// Offset of the bisection bracket from the ends of the admissible τ range.
pub const TAU_BRACKET_EPS: f64 = 1e-8;
/// Relative accuracy of the mass quadrature.
pub const MASS_QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Geometric constant α.
    pub alpha: f64,
    /// Mobility exponent.
    pub n: f64,
    /// Rotation speed ω (only the evolution uses it).
    pub omega: f64,
    pub mass: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, n: f64, omega: f64, mass: f64) -> Result<Self> {
        let p = Self {
            alpha,
            n,
            omega,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::Parameter(format!(
                "mobility exponent n must be > 0, got {}",
                self.n
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::Parameter("omega must be finite".into()));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::Parameter(format!(
                "mass must be > 0, got {}",
                self.mass
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Positive,
    Critical,
    CompactSupport,
}

/// The unique minimizer of the energy among nonnegative profiles of a given
/// mass, stored through its closed-form coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub regime: Regime,
    pub alpha: f64,
    pub mass: f64,
    /// Support half-length; π for the positive and critical regimes.
    pub tau: f64,
    /// Coefficient of cos(αθ) in the general solution.
    pub coeff_a: f64,
    /// Lagrange multiplier λ of the mass constraint.
    pub lagrange: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "alpha must be > 0 (alpha = 0 is not supported), got {alpha}"
        )));
    }
    Ok(())
}

/// Upper end of the admissible support half-lengths, `π / max{α, 1}`.
pub fn tau_upper(alpha: f64) -> f64 {
    PI / alpha.max(1.0)
}

fn check_tau(tau: f64, alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(tau > 0.0 && tau < tau_upper(alpha)) || (alpha * tau).sin() <= 0.0 {
        return Err(Error::Domain(format!(
            "tau must lie in (0, {}) for alpha = {alpha}, got {tau}",
            tau_upper(alpha)
        )));
    }
    Ok(())
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Building blocks of the particular solution in a form without the
/// `0/0` at α = 1:
///
/// `u⁰(θ) = −[2 S(θ) g(θ) − k cos αθ] / (α+1)` with
/// `S = sin((α+1)θ/2)`, `g = sin((α−1)θ/2)/(α−1)`, `k = (α−1)/(2α)`.
struct Particular {
    alpha: f64,
    k: f64,
}

impl Particular {
    fn new(alpha: f64) -> Self {
        Self {
            alpha,
            k: (alpha - 1.0) / (2.0 * alpha),
        }
    }

    #[inline]
    fn s(&self, t: f64) -> (f64, f64) {
        (0.5 * (self.alpha + 1.0) * t).sin_cos()
    }

    /// `g(θ)` and `g'(θ)`.
    #[inline]
    fn g(&self, t: f64) -> (f64, f64) {
        let x = 0.5 * (self.alpha - 1.0) * t;
        (0.5 * t * sinc(x), 0.5 * x.cos())
    }

    fn sg(&self, t: f64) -> f64 {
        self.s(t).0 * self.g(t).0
    }

    fn value(&self, t: f64) -> f64 {
        let a = self.alpha;
        -(2.0 * self.sg(t) - self.k * (a * t).cos()) / (a + 1.0)
    }

    fn d1(&self, t: f64) -> f64 {
        let a = self.alpha;
        let (s, c) = self.s(t);
        let (g, dg) = self.g(t);
        -((a + 1.0) * c * g + 2.0 * s * dg + self.k * a * (a * t).sin()) / (a + 1.0)
    }

    fn d2(&self, t: f64) -> f64 {
        let a = self.alpha;
        let (s, c) = self.s(t);
        let (g, dg) = self.g(t);
        let p = 0.5 * (a + 1.0);
        let q = 0.5 * (a - 1.0);
        // (S g)'' = S'' g + 2 S' g' + S g''
        let sg2 = -p * p * s * g + 2.0 * p * c * dg - q * q * s * g;
        -(2.0 * sg2 + self.k * a * a * (a * t).cos()) / (a + 1.0)
    }

    /// `u⁰(θ) − u⁰(τ)`, with the cosine difference taken in product form.
    fn diff(&self, t: f64, tau: f64) -> f64 {
        let a = self.alpha;
        -(2.0 * (self.sg(t) - self.sg(tau)) - self.k * cos_diff(a, t, tau)) / (a + 1.0)
    }
}

/// `cos(αθ) − cos(ατ)` without cancellation.
#[inline]
fn cos_diff(alpha: f64, t: f64, tau: f64) -> f64 {
    2.0 * (0.5 * alpha * (tau + t)).sin() * (0.5 * alpha * (tau - t)).sin()
}

/// The even particular solution `u⁰` of `u'' + α²u + cos θ = 0`,
/// `−½θ sin θ` at α = 1 and `(cos θ − (1+α²)/(2α) cos αθ)/(1−α²)` otherwise.
///
/// The evaluation uses a product form of the same expression that is free of
/// cancellation as α → 1, so no separate branch is needed near α = 1.
pub fn particular_solution(theta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Particular::new(alpha).value(theta))
}

/// Exact θ-derivative of [`particular_solution`].
pub fn particular_solution_deriv(theta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Particular::new(alpha).d1(theta))
}

/// Exact second θ-derivative of [`particular_solution`].
pub fn particular_solution_deriv2(theta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Particular::new(alpha).d2(theta))
}

/// `A(τ) = u⁰'(τ) / (α sin ατ)`.
pub fn coefficient_a(tau: f64, alpha: f64) -> Result<f64> {
    check_tau(tau, alpha)?;
    Ok(coefficient_a_unchecked(tau, alpha))
}

fn coefficient_a_unchecked(tau: f64, alpha: f64) -> f64 {
    Particular::new(alpha).d1(tau) / (alpha * (alpha * tau).sin())
}

fn compact_value(theta: f64, tau: f64, alpha: f64, a: f64) -> f64 {
    let t = theta.abs();
    if t > tau {
        return 0.0;
    }
    let p = Particular::new(alpha);
    a * cos_diff(alpha, t, tau) + p.diff(t, tau)
}

fn compact_d1(theta: f64, tau: f64, alpha: f64, a: f64) -> f64 {
    let t = theta.abs();
    if t > tau {
        return 0.0;
    }
    let d = -alpha * a * (alpha * t).sin() + Particular::new(alpha).d1(t);
    d.copysign(theta) * if theta == 0.0 { 0.0 } else { 1.0 }
}

fn compact_d2(theta: f64, tau: f64, alpha: f64, a: f64) -> f64 {
    let t = theta.abs();
    if t > tau {
        return 0.0;
    }
    -alpha * alpha * a * (alpha * t).cos() + Particular::new(alpha).d2(t)
}

/// Compact-support profile with half-length τ; zero for `|θ| > τ`.
pub fn profile(theta: f64, tau: f64, alpha: f64) -> Result<f64> {
    check_tau(tau, alpha)?;
    Ok(compact_value(
        theta,
        tau,
        alpha,
        coefficient_a_unchecked(tau, alpha),
    ))
}

fn mass_of_tau_unchecked(tau: f64, alpha: f64) -> Result<f64> {
    let a = coefficient_a_unchecked(tau, alpha);
    // For small τ the profile is O(τ⁴) built from O(τ²) terms, so the
    // attainable accuracy is limited by that cancellation.
    let p = Particular::new(alpha);
    let terms = (a * cos_diff(alpha, 0.0, tau)).abs() + p.diff(0.0, tau).abs();
    let noise = 64.0 * f64::EPSILON * terms * tau;
    let half = adaptive_gauss_kronrod(
        |t| compact_value(t, tau, alpha, a),
        0.0,
        tau,
        MASS_QUAD_TOL,
        noise,
    )?;
    Ok(2.0 * half)
}

/// Mass `∫_{−τ}^{τ} u(θ; τ) dθ` of the compact-support profile, by adaptive
/// quadrature.
pub fn mass_of_tau(tau: f64, alpha: f64) -> Result<f64> {
    check_tau(tau, alpha)?;
    mass_of_tau_unchecked(tau, alpha)
}

/// `dM/dτ = A'(τ) ∫_{−τ}^{τ} (cos αθ − cos ατ) dθ`, where
/// `A'(τ) α sin ατ = u''(τ−; τ)`.
pub fn dmass_dtau(tau: f64, alpha: f64) -> Result<f64> {
    check_tau(tau, alpha)?;
    Ok(dmass_dtau_unchecked(tau, alpha))
}

fn dmass_dtau_unchecked(tau: f64, alpha: f64) -> f64 {
    let a = coefficient_a_unchecked(tau, alpha);
    let curvature = compact_d2(tau, tau, alpha, a);
    let da = curvature / (alpha * (alpha * tau).sin());
    let width = 2.0 * ((alpha * tau).sin() / alpha - tau * (alpha * tau).cos());
    da * width
}

/// Inverts [`mass_of_tau`]: bisection on the monotone map, then a
/// safeguarded Newton polish using [`dmass_dtau`].
pub fn tau_of_mass(mass: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Parameter(format!("mass must be > 0, got {mass}")));
    }
    if alpha < 1.0 && mass * (1.0 - alpha * alpha) >= 2.0 * PI {
        return Err(Error::Regime(format!(
            "mass {mass} is at or above the critical mass {} for alpha = {alpha}",
            2.0 * PI / (1.0 - alpha * alpha)
        )));
    }
    let tol = 1e-10 * mass;
    let upper = tau_upper(alpha);
    let f = |t: f64| mass_of_tau_unchecked(t, alpha).map(|m| m - mass);

    let mut lo = TAU_BRACKET_EPS;
    let mut hi = upper - TAU_BRACKET_EPS;
    let f_hi = f(hi)?;
    if f_hi < 0.0 {
        if alpha >= 1.0 {
            return Err(Error::Numerical(format!(
                "mass {mass} exceeds the resolvable range (M(τ_max − {TAU_BRACKET_EPS:e}) = {})",
                f_hi + mass
            )));
        }
        // α < 1: the target lies between M(hi) and the critical mass, and
        // M(τ) stays finite up to τ = π, so the search continues to π.
        lo = hi;
        hi = upper;
    } else {
        for _ in 0..200 {
            if hi - lo <= 1e-7 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    let mut tau = 0.5 * (lo + hi);
    for _ in 0..60 {
        let r = f(tau)?;
        if r.abs() <= tol {
            return Ok(tau);
        }
        if r < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let slope = dmass_dtau_unchecked(tau, alpha);
        let mut next = tau - r / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == tau {
            break;
        }
        tau = next;
    }
    let r = f(tau)?;
    if r.abs() <= tol {
        Ok(tau)
    } else {
        Err(Error::Numerical(format!(
            "tau_of_mass({mass}, {alpha}) did not converge: residual {r:e}"
        )))
    }
}

/// Regime of the minimizer of mass `mass`.
pub fn classify(mass: f64, alpha: f64) -> Regime {
    if alpha >= 1.0 {
        return Regime::CompactSupport;
    }
    let gap = mass * (1.0 - alpha * alpha) - 2.0 * PI;
    if gap.abs() <= REGIME_TOL * 2.0 * PI {
        Regime::Critical
    } else if gap > 0.0 {
        Regime::Positive
    } else {
        Regime::CompactSupport
    }
}

/// Mass at which a positive minimizer first touches down, `2π/(1−α²)`.
/// Infinite for α ≥ 1.
pub fn critical_mass(alpha: f64) -> f64 {
    if alpha < 1.0 {
        2.0 * PI / (1.0 - alpha * alpha)
    } else {
        f64::INFINITY
    }
}

/// The energy minimizer for the given parameters.
pub fn minimizer(params: &ModelParams) -> Result<SteadyState> {
    params.validate()?;
    let (alpha, mass) = (params.alpha, params.mass);
    let a2 = alpha * alpha;
    let regime = classify(mass, alpha);
    let state = match regime {
        Regime::Positive | Regime::Critical => {
            let a = (1.0 + a2) / (2.0 * alpha * (1.0 - a2));
            let mass = if regime == Regime::Critical {
                critical_mass(alpha)
            } else {
                mass
            };
            SteadyState {
                regime,
                alpha,
                mass,
                tau: PI,
                coeff_a: a,
                lagrange: a2 * mass / (2.0 * PI),
            }
        }
        Regime::CompactSupport => {
            let tau = tau_of_mass(mass, alpha)?;
            let a = coefficient_a_unchecked(tau, alpha);
            let u0_tau = Particular::new(alpha).value(tau);
            if alpha > 1.0 && alpha * tau >= 1.0 {
                log::warn!(
                    "support half-length tau = {tau} satisfies alpha*tau = {} >= 1 (alpha = {alpha}, mass = {mass})",
                    alpha * tau
                );
            }
            SteadyState {
                regime,
                alpha,
                mass,
                tau,
                coeff_a: a,
                lagrange: -a2 * (u0_tau + a * (alpha * tau).cos()),
            }
        }
    };
    Ok(state)
}

impl SteadyState {
    fn one_minus_a2(&self) -> f64 {
        1.0 - self.alpha * self.alpha
    }

    pub fn value(&self, theta: f64) -> f64 {
        match self.regime {
            Regime::Positive => self.mass / (2.0 * PI) + theta.cos() / self.one_minus_a2(),
            Regime::Critical => (1.0 + theta.cos()) / self.one_minus_a2(),
            Regime::CompactSupport => compact_value(theta, self.tau, self.alpha, self.coeff_a),
        }
    }

    /// Analytic first derivative; one-sided from inside the support at `±τ`.
    pub fn derivative(&self, theta: f64) -> f64 {
        match self.regime {
            Regime::Positive | Regime::Critical => -theta.sin() / self.one_minus_a2(),
            Regime::CompactSupport => compact_d1(theta, self.tau, self.alpha, self.coeff_a),
        }
    }

    /// Analytic second derivative; one-sided from inside the support at `±τ`.
    pub fn second_derivative(&self, theta: f64) -> f64 {
        match self.regime {
            Regime::Positive | Regime::Critical => -theta.cos() / self.one_minus_a2(),
            Regime::CompactSupport => compact_d2(theta, self.tau, self.alpha, self.coeff_a),
        }
    }

    /// Slope of the profile where it meets the dry region (zero for a
    /// minimizer). Zero by definition when there is no contact point.
    pub fn contact_slope(&self) -> f64 {
        match self.regime {
            Regime::Positive => 0.0,
            Regime::Critical => self.derivative(PI),
            Regime::CompactSupport => self.derivative(self.tau),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self.regime {
            Regime::Positive => self.mass / (2.0 * PI) - 1.0 / self.one_minus_a2(),
            _ => 0.0,
        }
    }

    /// Length of the dry interval `2(π − τ)`; zero unless compactly supported.
    pub fn dry_length(&self) -> f64 {
        match self.regime {
            Regime::CompactSupport => 2.0 * (PI - self.tau),
            _ => 0.0,
        }
    }

    /// Samples the profile at the grid nodes, clipping round-off below zero.
    pub fn evaluate_on_grid(&self, grid: &PeriodicGrid) -> PeriodicGridFunction {
        grid.sample(|t| self.value(t).max(0.0))
    }
}

pub fn evaluate_on_grid(state: &SteadyState, grid: &PeriodicGrid) -> PeriodicGridFunction {
    state.evaluate_on_grid(grid)
}

/// `max |u'' + α²u + cos θ − λ|` over nodes farther than `2h` from the edge
/// of the support, using the analytic second derivative.
pub fn euler_lagrange_residual(state: &SteadyState, grid: &PeriodicGrid) -> f64 {
    let a2 = state.alpha * state.alpha;
    let margin = 2.0 * grid.spacing();
    let edge = match state.regime {
        Regime::Positive => f64::INFINITY,
        Regime::Critical | Regime::CompactSupport => state.tau,
    };
    grid.nodes()
        .into_iter()
        .filter(|t| edge - t.abs() > margin)
        .map(|t| {
            let r = state.second_derivative(t) + a2 * state.value(t) + t.cos() - state.lagrange;
            r.abs()
        })
        .fold(0.0, f64::max)
}

/// The sampled minimizer plus `amplitude·cos θ`, clipped at zero and rescaled
/// back to the minimizer's mass.
pub fn perturbed_profile(
    state: &SteadyState,
    grid: &PeriodicGrid,
    amplitude: f64,
) -> PeriodicGridFunction {
    let u = grid.sample(|t| (state.value(t) + amplitude * t.cos()).max(0.0));
    let m = crate::grid::quadrature(&u);
    if m > 0.0 {
        u.map(|v| v * state.mass / m)
    } else {
        u
    }
}
