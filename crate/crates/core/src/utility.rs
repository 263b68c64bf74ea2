//! Utility functions and their convex conjugates.

use crate::error::{Error, Result};

/// Interface for a utility function on `(0, ∞)` that is strictly increasing,
/// strictly concave and twice differentiable.
///
/// Only [`PowerUtility`] is used by the solvers; the general form exists so the
/// Euler–Lagrange right-hand side can be written without the power structure.
pub trait UtilityFn {
    fn value(&self, x: f64) -> f64;
    fn marginal(&self, x: f64) -> f64;
    fn curvature(&self, x: f64) -> f64;
    /// `I = (U')^{-1}`.
    fn inverse_marginal(&self, y: f64) -> f64;
    /// `Ũ(y) = sup_{x>0} [U(x) - x y]`.
    fn conjugate(&self, y: f64) -> f64;
}

/// Which quantity [`PowerUtility::eval`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    U,
    Marginal,
    Curvature,
    InverseMarginal,
    Conjugate,
}

/// `U(x) = K₁ x^γ` with `0 < γ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerUtility {
    k1: f64,
    gamma: f64,
    ktilde1: f64,
    gammatilde: f64,
}

impl PowerUtility {
    pub fn new(k1: f64, gamma: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::config(format!("K1 must be positive, got {k1}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0,1), got {gamma}")));
        }
        let gammatilde = gamma / (1.0 - gamma);
        let ktilde1 = (1.0 - gamma) * gamma.powf(gammatilde) * k1.powf(1.0 / (1.0 - gamma));
        Ok(Self {
            k1,
            gamma,
            ktilde1,
            gammatilde,
        })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Scale of the conjugate, `Ũ(y) = K̃₁ y^{-γ̃}`.
    pub fn ktilde1(&self) -> f64 {
        self.ktilde1
    }

    /// `γ̃ = γ / (1 - γ)`.
    pub fn gammatilde(&self) -> f64 {
        self.gammatilde
    }

    /// Same utility with `K₁` multiplied by `beta`.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        Self::new(self.k1 * beta, self.gamma)
    }

    /// Checked evaluation. `U` accepts `x = 0` (where it vanishes); every other
    /// quantity requires a strictly positive argument.
    pub fn eval(&self, which: UtilityKind, arg: f64) -> Result<f64> {
        if arg.is_nan() || arg < 0.0 || (arg == 0.0 && which != UtilityKind::U) {
            return Err(Error::domain(format!(
                "{which:?} requires a positive argument, got {arg}"
            )));
        }
        Ok(match which {
            UtilityKind::U => self.value(arg),
            UtilityKind::Marginal => self.marginal(arg),
            UtilityKind::Curvature => self.curvature(arg),
            UtilityKind::InverseMarginal => self.inverse_marginal(arg),
            UtilityKind::Conjugate => self.conjugate(arg),
        })
    }
}

impl UtilityFn for PowerUtility {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.k1 * x.powf(self.gamma)
        }
    }

    #[inline]
    fn marginal(&self, x: f64) -> f64 {
        self.k1 * self.gamma * x.powf(self.gamma - 1.0)
    }

    #[inline]
    fn curvature(&self, x: f64) -> f64 {
        self.k1 * self.gamma * (self.gamma - 1.0) * x.powf(self.gamma - 2.0)
    }

    #[inline]
    fn inverse_marginal(&self, y: f64) -> f64 {
        if y.is_infinite() {
            return 0.0;
        }
        (y / (self.k1 * self.gamma)).powf(1.0 / (self.gamma - 1.0))
    }

    #[inline]
    fn conjugate(&self, y: f64) -> f64 {
        if y.is_infinite() {
            return 0.0;
        }
        self.ktilde1 * y.powf(-self.gammatilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sqrt_utility() -> PowerUtility {
        PowerUtility::new(1.0, 0.5).unwrap()
    }

    // Brute-force sup over a fine grid, independent of the closed forms.
    fn conjugate_by_grid(u: &PowerUtility, y: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let n = 2_000_000;
        for i in 1..=n {
            let x = 10.0 * i as f64 / n as f64;
            best = best.max(u.value(x) - x * y);
        }
        best
    }

    #[test]
    fn conjugate_matches_grid_maximisation() {
        let u = sqrt_utility();
        let grid = conjugate_by_grid(&u, 0.5);
        assert_relative_eq!(grid, 0.5, epsilon = 1e-9);
        assert_relative_eq!(u.eval(UtilityKind::Conjugate, 0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn inverse_marginal_by_bisection() {
        let u = sqrt_utility();
        let (mut lo, mut hi) = (1e-6, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if u.marginal(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(lo, 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.eval(UtilityKind::InverseMarginal, 0.5).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn utility_vanishes_at_zero() {
        let u = PowerUtility::new(3.7, 0.3).unwrap();
        assert_eq!(u.eval(UtilityKind::U, 0.0).unwrap(), 0.0);
        assert!(u.eval(UtilityKind::U, 1e-300).unwrap() < 1e-80);
    }

    #[test]
    fn nonpositive_arguments_are_rejected() {
        let u = sqrt_utility();
        for which in [
            UtilityKind::Marginal,
            UtilityKind::Curvature,
            UtilityKind::InverseMarginal,
            UtilityKind::Conjugate,
        ] {
            assert!(matches!(u.eval(which, 0.0), Err(Error::Domain(_))));
            assert!(matches!(u.eval(which, -1.0), Err(Error::Domain(_))));
        }
        assert!(u.eval(UtilityKind::U, -1.0).is_err());
    }

    #[test]
    fn ktilde_matches_numeric_conjugate_for_other_gamma() {
        let u = PowerUtility::new(2.0, 0.3).unwrap();
        let y = 0.7;
        assert_relative_eq!(conjugate_by_grid(&u, y), u.conjugate(y), max_relative = 1e-8);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PowerUtility::new(0.0, 0.5).is_err());
        assert!(PowerUtility::new(1.0, 1.0).is_err());
        assert!(PowerUtility::new(1.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fenchel_inequality(c in 1e-3f64..50.0, y in 1e-3f64..50.0, gamma in 0.05f64..0.95) {
                let u = PowerUtility::new(1.3, gamma).unwrap();
                let gap = u.value(c) - c * y - u.conjugate(y);
                prop_assert!(gap <= 1e-10 * (1.0 + u.conjugate(y)));
                let c_star = u.inverse_marginal(y);
                let gap_star = u.value(c_star) - c_star * y - u.conjugate(y);
                prop_assert!(gap_star.abs() <= 1e-10 * (1.0 + u.conjugate(y)));
            }

            #[test]
            fn inverse_round_trip(c in 1e-4f64..1e4, gamma in 0.05f64..0.95) {
                let u = PowerUtility::new(0.8, gamma).unwrap();
                let back = u.inverse_marginal(u.marginal(c));
                prop_assert!((back - c).abs() <= 1e-10 * c);
            }
        }
    }
}
