//! Energy and entropy functionals on grid functions, and the explicit
//! constants bounding them.
//!
//! The discrete energy is
//!
//! ```text
//! E_h(u) = ½ h Σ ((u_{j+1} − u_j)/h)² − ½ α² h Σ u_j² − h Σ u_j cos θ_j
//! ```
//!
//! whose gradient (scaled by 1/h) is exactly [`variational_derivative`]. The
//! evolution scheme is built on the same operators, so `E_h` is the quantity
//! it dissipates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, face_gradient, quadrature, PeriodicGridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub gradient_term: f64,
    pub quadratic_term: f64,
    pub forcing_term: f64,
    pub total: f64,
}

/// Exponents of the entropy `∫ u^{−β}` for mobility exponent `n > 3/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub n: f64,
    pub beta: f64,
    pub c_n: f64,
}

impl EntropyParams {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 1.5 && n.is_finite()) {
            return Err(Error::Parameter(format!(
                "entropy requires mobility exponent n > 3/2, got {n}"
            )));
        }
        Ok(Self {
            n,
            beta: n - 1.5,
            c_n: (n - 1.5) * (n - 0.5),
        })
    }
}

pub fn energy(u: &PeriodicGridFunction, alpha: f64) -> EnergyBreakdown {
    let h = u.grid().spacing();
    let gradient_term = 0.5 * h * face_gradient(u).iter().map(|g| g * g).sum::<f64>();
    let quadratic_term = -0.5 * alpha * alpha * h * u.values().iter().map(|v| v * v).sum::<f64>();
    let forcing_term = -h
        * u.values()
            .iter()
            .zip(u.grid().nodes())
            .map(|(v, t)| v * t.cos())
            .sum::<f64>();
    EnergyBreakdown {
        gradient_term,
        quadratic_term,
        forcing_term,
        total: gradient_term + quadratic_term + forcing_term,
    }
}

/// `δE/δu = −u_θθ − α²u − cos θ` with the three-point second difference.
pub fn variational_derivative(u: &PeriodicGridFunction, alpha: f64) -> PeriodicGridFunction {
    let d2 = derivative(u, 2).expect("order 2 is supported");
    let a2 = alpha * alpha;
    let nodes = u.grid().nodes();
    let values = d2
        .values()
        .iter()
        .zip(u.values())
        .zip(&nodes)
        .map(|((d, v), t)| -d - a2 * v - t.cos())
        .collect();
    PeriodicGridFunction::new(*u.grid(), values).expect("same grid")
}

/// `−M²α²(2+α²)/(4π) − M`, a lower bound for the energy of any nonnegative
/// profile of mass `M`.
pub fn energy_lower_bound(mass: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    -mass * mass * a2 * (2.0 + a2) / (4.0 * PI) - mass
}

fn quad_of(u: &PeriodicGridFunction, f: impl Fn(f64) -> f64) -> f64 {
    u.grid().spacing() * u.values().iter().map(|&v| f(v)).sum::<f64>()
}

/// `∫ u^{−β}`; `+∞` if any value is nonpositive.
pub fn entropy(u: &PeriodicGridFunction, params: &EntropyParams) -> f64 {
    if u.values().iter().any(|&v| v <= 0.0) {
        return f64::INFINITY;
    }
    quad_of(u, |v| v.powf(-params.beta))
}

/// `s_ε(z) = z^{−3/2}(1 + (3/7) ε / z)`, the entropy density adapted to the
/// regularized mobility for n = 3.
pub fn regularized_entropy_density(z: f64, eps: f64) -> f64 {
    z.powf(-1.5) * (1.0 + 3.0 / 7.0 * eps / z)
}

/// `∫ s_ε(u)`; `+∞` if any value is nonpositive.
pub fn regularized_entropy(u: &PeriodicGridFunction, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    if u.values().iter().any(|&v| v <= 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(quad_of(u, |v| regularized_entropy_density(v, eps)))
}

/// Upper bound `K₀` on the entropy growth rate along a solution of mass
/// `mass` and initial energy `e0`.
pub fn entropy_growth_constant(
    mass: f64,
    alpha: f64,
    params: &EntropyParams,
    e0: f64,
) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::Parameter(format!("mass must be > 0, got {mass}")));
    }
    let a2 = alpha * alpha;
    let radicand = 2.0 * (e0 + mass) / PI + mass * mass / (4.0 * PI * PI) * a2 * (2.0 + a2);
    if radicand < 0.0 || !radicand.is_finite() {
        return Err(Error::Parameter(format!(
            "initial energy {e0} gives a negative radicand {radicand} in the entropy growth constant"
        )));
    }
    let bracket = mass / (2.0 * PI) * (1.0 + a2) + radicand.sqrt();
    Ok(params.c_n * (mass * a2 / 4.0 * bracket.sqrt() + 2.0 * (mass * PI).sqrt()))
}

/// Time derivative of the entropy in completed-square form,
///
/// `c_n { −∫ u^{½}(2(u^{½})_θθ − (α²/2)u^{½})² + (α⁴/4)∫u^{3/2} + 2∫u^{½} cos θ }`.
pub fn entropy_production(
    u: &PeriodicGridFunction,
    alpha: f64,
    params: &EntropyParams,
) -> Result<f64> {
    if let Some(v) = u.values().iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "entropy production needs a strictly positive profile, found {v}"
        )));
    }
    let a2 = alpha * alpha;
    let root = u.map(f64::sqrt);
    let d2 = derivative(&root, 2)?;
    let h = u.grid().spacing();
    let square: f64 = root
        .values()
        .iter()
        .zip(d2.values())
        .map(|(r, d)| r * (2.0 * d - 0.5 * a2 * r).powi(2))
        .sum::<f64>()
        * h;
    let porous = 0.25 * a2 * a2 * quad_of(u, |v| v.powf(1.5));
    let forcing = 2.0 * quadrature(&root.zip_with(&u.grid().sample(f64::cos), |r, c| r * c)?);
    Ok(params.c_n * (-square + porous + forcing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::steady_state::{minimizer, ModelParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = grid(256);
        for &(c, a) in &[(1.0, 1.0), (2.5, 0.5), (0.3, 2.0)] {
            let e = energy(&g.constant(c), a);
            assert_abs_diff_eq!(e.total, -PI * a * a * c * c, epsilon = 1e-12);
            assert_eq!(e.gradient_term, 0.0);
            assert_abs_diff_eq!(e.forcing_term, 0.0, epsilon = 1e-12);
        }
        for &c in &[0.0, 1.0, 3.0] {
            let e = energy(&g.sample(|t| c + t.cos()), 1.0);
            assert_abs_diff_eq!(e.total, -PI * c * c - PI, epsilon = 2e-3);
            assert_eq!(e.total, e.gradient_term + e.quadratic_term + e.forcing_term);
        }
        let s = minimizer(&ModelParams::new(0.5, 3.0, 0.0, 20.0).unwrap()).unwrap();
        let e_min = energy(&s.evaluate_on_grid(&g), 0.5).total;
        let e_const = energy(&g.constant(20.0 / (2.0 * PI)), 0.5).total;
        assert!(e_min < e_const);
    }

    #[test]
    fn variational_derivative_examples() {
        let g = grid(128);
        let v = variational_derivative(&g.constant(0.0), 1.3);
        for (x, t) in v.values().iter().zip(g.nodes()) {
            assert_abs_diff_eq!(*x, -t.cos(), epsilon = 1e-15);
        }
        let g = grid(1024);
        let v = variational_derivative(&g.sample(f64::cos), 1.0);
        for (x, t) in v.values().iter().zip(g.nodes()) {
            assert_abs_diff_eq!(*x, -t.cos(), epsilon = 1e-5);
        }
    }

    #[test]
    fn variational_derivative_is_constant_on_support() {
        let g = grid(1024);
        for &(a, m) in &[(1.0, 2.0 * PI), (0.5, 20.0), (2.0, 5.0)] {
            let s = minimizer(&ModelParams::new(a, 3.0, 0.0, m).unwrap()).unwrap();
            let u = s.evaluate_on_grid(&g);
            let v = variational_derivative(&u, a);
            for (j, t) in g.nodes().into_iter().enumerate() {
                if s.tau - t.abs() > 3.0 * g.spacing() {
                    assert_abs_diff_eq!(v.values()[j], -s.lagrange, epsilon = 1e-4);
                }
            }
        }
    }

    #[test]
    fn variational_derivative_is_the_energy_gradient() {
        let g = grid(64);
        let u = g.sample(|t| 1.0 + 0.3 * t.sin() + 0.2 * (2.0 * t).cos());
        let v = variational_derivative(&u, 0.8);
        let h = g.spacing();
        for j in [0, 7, 31, 50] {
            let d = 1e-6;
            let mut up = u.clone();
            up.values_mut()[j] += d;
            let mut dn = u.clone();
            dn.values_mut()[j] -= d;
            let fd = (energy(&up, 0.8).total - energy(&dn, 0.8).total) / (2.0 * d);
            assert_abs_diff_eq!(fd / h, v.values()[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn energy_lower_bound_examples() {
        assert_abs_diff_eq!(
            energy_lower_bound(2.0 * PI, 1.0),
            -5.0 * PI,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(energy_lower_bound(3.0, 1e-9), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_lower_bound_holds_for_minimizers() {
        let g = grid(1024);
        for &a in &[0.5, 0.9, 1.0, 1.5, 2.0] {
            for &m in &[0.5, PI, 2.0 * PI, 4.0 * PI, 20.0] {
                let s = minimizer(&ModelParams::new(a, 3.0, 0.0, m).unwrap()).unwrap();
                let e = energy(&s.evaluate_on_grid(&g), a).total;
                assert!(e >= energy_lower_bound(m, a), "alpha {a} mass {m}");
            }
        }
    }

    #[test]
    fn entropy_examples() {
        let g = grid(64);
        let p = EntropyParams::new(3.0).unwrap();
        assert_abs_diff_eq!(entropy(&g.constant(1.0), &p), 2.0 * PI, epsilon = 1e-13);
        assert_abs_diff_eq!(entropy(&g.constant(4.0), &p), PI / 4.0, epsilon = 1e-13);
        let mut u = g.constant(1.0);
        u.values_mut()[5] = 0.0;
        assert_eq!(entropy(&u, &p), f64::INFINITY);
        assert!(EntropyParams::new(1.5).is_err());
        assert!(EntropyParams::new(1.0).is_err());
        let p = EntropyParams::new(2.5).unwrap();
        assert_eq!((p.beta, p.c_n), (1.0, 2.0));
    }

    #[test]
    fn regularized_entropy_examples() {
        let g = grid(64);
        let p = EntropyParams::new(3.0).unwrap();
        let u = g.sample(|t| 1.5 + t.cos());
        assert_abs_diff_eq!(
            regularized_entropy(&u, 0.0).unwrap(),
            entropy(&u, &p),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            regularized_entropy(&g.constant(1.0), 0.7).unwrap(),
            2.6 * PI,
            epsilon = 1e-13
        );
        assert!(regularized_entropy(&u, -1.0).is_err());
        assert_eq!(
            regularized_entropy(&g.constant(0.0), 0.1).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn regularized_density_matches_mobility() {
        // s_ε'' by hand: (15/4) z^{−7/2} + (15/4) ε z^{−9/2}
        let f_eps = |z: f64, e: f64| z.powi(4) / (z.abs() + e);
        for &z in &[0.01f64, 0.3, 1.0, 7.0] {
            for &e in &[0.0, 1e-8, 0.1, 2.0] {
                let s2 = 3.75 * z.powf(-3.5) + 3.0 / 7.0 * e * 8.75 * z.powf(-4.5);
                let lhs = s2 * f_eps(z, e);
                assert!((lhs - 3.75 * z.powf(-0.5)).abs() <= 1e-10 * lhs.abs());
                // and against a finite-difference second derivative
                let d = 1e-4 * z;
                let fd = (regularized_entropy_density(z + d, e)
                    - 2.0 * regularized_entropy_density(z, e)
                    + regularized_entropy_density(z - d, e))
                    / (d * d);
                assert!((fd - s2).abs() <= 1e-5 * s2);
            }
        }
    }

    #[test]
    fn entropy_growth_constant_examples() {
        let p = EntropyParams::new(3.0).unwrap();
        let k = entropy_growth_constant(2.0 * PI, 1.0, &p, -PI).unwrap();
        // term by term: radicand 5, bracket 2 + √5
        let oracle = 3.75 * (PI / 2.0 * (2.0 + 5f64.sqrt()).sqrt() + 2.0 * PI * 2f64.sqrt());
        assert_abs_diff_eq!(k, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(k, 45.445, epsilon = 1e-3);
        let k0 = entropy_growth_constant(3.0, 0.0, &p, -1.0).unwrap();
        assert_abs_diff_eq!(k0, 2.0 * 3.75 * (3.0 * PI).sqrt(), epsilon = 1e-12);
        let mut prev = 0.0;
        for i in 0..20 {
            let k = entropy_growth_constant(2.0 * PI, 1.0, &p, -5.0 + i as f64).unwrap();
            assert!(k > prev);
            prev = k;
        }
        assert!(entropy_growth_constant(2.0 * PI, 1.0, &p, -100.0).is_err());
    }

    #[test]
    fn entropy_production_examples() {
        let g = grid(128);
        let p = EntropyParams::new(3.0).unwrap();
        for &(c, a) in &[(1.0, 1.0), (2.0, 0.5), (0.7, 2.0)] {
            assert_abs_diff_eq!(
                entropy_production(&g.constant(c), a, &p).unwrap(),
                0.0,
                epsilon = 1e-10
            );
        }
        assert_abs_diff_eq!(
            entropy_production(&g.constant(1.0), 0.0, &p).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let mut u = g.constant(1.0);
        u.values_mut()[0] = 0.0;
        assert!(matches!(
            entropy_production(&u, 1.0, &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn entropy_production_below_growth_constant() {
        let g = grid(512);
        let p = EntropyParams::new(3.0).unwrap();
        for &(c, amp, a) in &[
            (1.0, 0.5, 1.0),
            (2.0, 1.5, 1.0),
            (0.5, 0.45, 0.5),
            (1.0, 0.2, 2.0),
        ] {
            let u = g.sample(|t| c + amp * (t.cos() + 0.3 * (3.0 * t).sin()).tanh());
            if u.min_value() <= 0.0 {
                continue;
            }
            let m = quadrature(&u);
            let e = energy(&u, a).total;
            let k = entropy_growth_constant(m, a, &p, e).unwrap();
            assert!(entropy_production(&u, a, &p).unwrap() <= k);
        }
    }

    /// Mean-zero perturbation orthogonal to cos θ on the grid, so the first
    /// variation at a positive-regime minimizer vanishes exactly.
    fn orthogonal_perturbation(g: &PeriodicGrid, c: &[f64; 6]) -> PeriodicGridFunction {
        g.sample(|t| {
            c[0] * t.sin()
                + c[1] * (2.0 * t).cos()
                + c[2] * (2.0 * t).sin()
                + c[3] * (3.0 * t).cos()
                + c[4] * (5.0 * t).sin()
                + c[5] * (4.0 * t).cos()
        })
    }

    /// Coordinate-wise energy quadratic form `½∫w_θ² − α²w²`.
    fn quadratic_form(w: &PeriodicGridFunction, a: f64) -> f64 {
        let e = energy(w, a);
        e.gradient_term + e.quadratic_term
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_above_lower_bound(
            a in 0.1f64..2.5,
            coeffs in proptest::collection::vec(-1.0f64..1.0, 6),
            centre in -3.0f64..3.0,
            width in 0.2f64..3.0,
            scale in 0.1f64..30.0,
        ) {
            let g = grid(128);
            let u = g.sample(|t| {
                let bump = (-((t - centre) / width).powi(2)).exp();
                let wiggle: f64 = coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * t).cos()).sum();
                (scale * bump * (1.0 + 0.5 * wiggle)).max(0.0)
            });
            let m = quadrature(&u);
            prop_assume!(m > 0.0);
            prop_assert!(energy(&u, a).total >= energy_lower_bound(m, a));
        }

        #[test]
        fn minimizer_beats_random_competitors(
            a in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]),
            m in 0.5f64..15.0,
            heights in proptest::collection::vec(0.0f64..1.0, 1..5),
            widths in proptest::collection::vec(0.2f64..1.5, 5),
            centres in proptest::collection::vec(-3.0f64..3.0, 5),
        ) {
            let g = grid(512);
            let s = minimizer(&ModelParams::new(a, 3.0, 0.0, m).unwrap()).unwrap();
            let raw = g.sample(|t| {
                heights.iter().enumerate().map(|(i, h)| {
                    let d = (t - centres[i]).abs();
                    h * (1.0 - (d / widths[i]).powi(2)).max(0.0).powi(2)
                }).sum::<f64>()
            });
            let mass_raw = quadrature(&raw);
            prop_assume!(mass_raw > 1e-6);
            let v = raw.map(|x| x * m / mass_raw);
            let u = s.evaluate_on_grid(&g);
            let mu = quadrature(&u);
            let u = u.map(|x| x * m / mu);
            prop_assert!(energy(&u, a).total <= energy(&v, a).total + 1e-3);
        }

        #[test]
        fn quadratic_expansion_is_exact_in_positive_regime(
            c in proptest::array::uniform6(-0.3f64..0.3),
            a in 0.1f64..0.9,
            extra in 0.5f64..10.0,
        ) {
            let g = grid(256);
            let m = 2.0 * PI / (1.0 - a * a) + extra;
            let s = minimizer(&ModelParams::new(a, 3.0, 0.0, m).unwrap()).unwrap();
            let u_star = s.evaluate_on_grid(&g);
            let w = orthogonal_perturbation(&g, &c);
            let u = u_star.zip_with(&w, |x, y| x + y).unwrap();
            prop_assume!(u.min_value() >= 0.0);
            let gap = energy(&u, a).total - energy(&u_star, a).total;
            prop_assert!((gap - quadratic_form(&w, a)).abs() < 1e-8);
        }
    }
}
