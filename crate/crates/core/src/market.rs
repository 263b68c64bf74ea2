//! Market data: discounting, trade intensity and the conditional law of the
//! return observed at a trading date.

use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, DEFAULT_NODES};
use crate::utility::PowerUtility;

/// Relative tolerance under which the growth condition counts as borderline.
pub const BORDERLINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    rho: f64,
    lambda: f64,
}

impl MarketParams {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::config(format!("rho must be positive, got {rho}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { rho, lambda })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Effective discount rate between trades, `ρ + λ`.
    pub fn discount(&self) -> f64 {
        self.rho + self.lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReturnKind {
    /// `Z(t) = exp((b - σ²/2) t + σ W_t) - 1`.
    BlackScholes { drift: f64, sigma: f64 },
    /// Time-independent law on finitely many points.
    DiscreteStationary { points: Vec<f64>, probs: Vec<f64> },
    /// Black–Scholes law frozen at horizon `t0`, whatever the waiting time.
    FrozenLognormal { t0: f64, drift: f64, sigma: f64 },
}

/// Conditional law `p(t, dz)` of the return given the waiting time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnModel {
    kind: ReturnKind,
    zlow: f64,
    zhigh: f64,
    gh: GaussHermite,
}

/// Moments needed by the reduced equations at one `(t, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KernelMoments {
    /// `E[(ξ + Z)^γ]`.
    pub power: f64,
    /// `E[(ξ + Z)^{γ-1}]` over the support without the atom at `-z̲`.
    pub slope_regular: f64,
    /// Probability of the atom at `-z̲` (zero for continuous laws).
    pub atom: f64,
}

impl ReturnModel {
    pub fn black_scholes(drift: f64, sigma: f64) -> Result<Self> {
        check_lognormal(drift, sigma)?;
        Self::build(ReturnKind::BlackScholes { drift, sigma }, 1.0, f64::INFINITY)
    }

    pub fn frozen_lognormal(t0: f64, drift: f64, sigma: f64) -> Result<Self> {
        check_lognormal(drift, sigma)?;
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::config(format!("freeze time t0 must be positive, got {t0}")));
        }
        Self::build(ReturnKind::FrozenLognormal { t0, drift, sigma }, 1.0, f64::INFINITY)
    }

    /// Discrete law with bounds `z̲ = -min(points)` and `z̄ = max(points)`.
    pub fn discrete(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::discrete_with_bounds(points, probs, -lo, hi)
    }

    /// Discrete law whose support is declared to be `[-zlow, zhigh]`.
    pub fn discrete_with_bounds(points: Vec<f64>, probs: Vec<f64>, zlow: f64, zhigh: f64) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(Error::config(
                "discrete law needs equally many points and probabilities",
            ));
        }
        if !(zlow > 0.0 && zlow <= 1.0) {
            return Err(Error::config(format!("zlow must lie in (0,1], got {zlow}")));
        }
        if !(zhigh > 0.0 && zhigh.is_finite()) {
            return Err(Error::config(format!(
                "zhigh must be positive and finite for a discrete law, got {zhigh}"
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::config(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("probabilities sum to {total}, not 1")));
        }
        if let Some(z) = points.iter().find(|z| **z < -zlow || **z > zhigh || **z <= -1.0) {
            return Err(Error::config(format!(
                "return {z} outside the support [-{zlow}, {zhigh}]"
            )));
        }
        let mean: f64 = points.iter().zip(&probs).map(|(z, p)| z * p).sum();
        if mean < 0.0 {
            return Err(Error::config(format!("mean return {mean} is negative")));
        }
        Self::build(ReturnKind::DiscreteStationary { points, probs }, zlow, zhigh)
    }

    fn build(kind: ReturnKind, zlow: f64, zhigh: f64) -> Result<Self> {
        Ok(Self {
            kind,
            zlow,
            zhigh,
            gh: GaussHermite::new(DEFAULT_NODES)?,
        })
    }

    /// Replace the Gauss–Hermite rule.
    pub fn with_quadrature_nodes(mut self, n: usize) -> Result<Self> {
        self.gh = GaussHermite::new(n)?;
        Ok(self)
    }

    pub fn kind(&self) -> &ReturnKind {
        &self.kind
    }

    pub fn zlow(&self) -> f64 {
        self.zlow
    }

    pub fn zhigh(&self) -> f64 {
        self.zhigh
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.gh.len()
    }

    /// True when `p(t, dz)` does not depend on `t`.
    pub fn is_stationary(&self) -> bool {
        !matches!(self.kind, ReturnKind::BlackScholes { .. })
    }

    /// The same law frozen at waiting time `t` (always stationary).
    pub fn frozen_at(&self, t: f64) -> Result<Self> {
        match &self.kind {
            ReturnKind::BlackScholes { drift, sigma } => {
                let mut frozen = Self::frozen_lognormal(t, *drift, *sigma)?;
                frozen.gh = self.gh.clone();
                Ok(frozen)
            }
            _ => Ok(self.clone()),
        }
    }

    /// Mean and variance of `ln(1 + Z)` at waiting time `t`, for lognormal laws.
    pub fn log_moments(&self, t: f64) -> Option<(f64, f64)> {
        match self.kind {
            ReturnKind::BlackScholes { drift, sigma } => Some(((drift - 0.5 * sigma * sigma) * t, sigma * sigma * t)),
            ReturnKind::FrozenLognormal { t0, drift, sigma } => {
                Some(((drift - 0.5 * sigma * sigma) * t0, sigma * sigma * t0))
            }
            ReturnKind::DiscreteStationary { .. } => None,
        }
    }

    /// Minimum wealth `l(a) = max(a z̲, -a z̄)` keeping the post-trade wealth
    /// nonnegative against the worst return.
    pub fn l_bound(&self, a: f64) -> Result<f64> {
        if a.is_nan() {
            return Err(Error::domain("allocation is NaN"));
        }
        if self.zhigh.is_infinite() {
            if a < 0.0 {
                return Err(Error::domain(format!(
                    "short allocation {a} is not admissible when zhigh is infinite"
                )));
            }
            return Ok(a * self.zlow);
        }
        Ok((a * self.zlow).max(-a * self.zhigh))
    }

    /// `∫ w(z) p(t, dz)`.
    pub fn expect(&self, t: f64, mut w: impl FnMut(f64) -> f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("waiting time must be nonnegative, got {t}")));
        }
        let value = match &self.kind {
            ReturnKind::DiscreteStationary { points, probs } => points.iter().zip(probs).map(|(&z, &p)| p * w(z)).sum(),
            _ => {
                let (mean, var) = self.log_moments(t).expect("lognormal law");
                self.gh.gaussian_expectation(mean, var, |u| w(u.exp() - 1.0))
            }
        };
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "expectation at t = {t} is not finite ({value}); integrand grows too fast"
            )));
        }
        Ok(value)
    }

    pub fn mean_return(&self, t: f64) -> Result<f64> {
        self.expect(t, |z| z)
    }

    pub(crate) fn kernel_moments(&self, t: f64, xi: f64, gamma: f64) -> Result<KernelMoments> {
        Ok(self.kernel_moments_many(t, &[xi], gamma)?[0])
    }

    /// [`Self::kernel_moments`] at several `ξ` sharing one waiting time.
    pub(crate) fn kernel_moments_many(&self, t: f64, xis: &[f64], gamma: f64) -> Result<Vec<KernelMoments>> {
        if let Some(&xi) = xis.iter().find(|&&xi| !(xi >= self.zlow)) {
            return Err(Error::domain(format!("xi = {xi} lies below zlow = {}", self.zlow)));
        }
        let t = t.max(0.0);
        let ReturnKind::DiscreteStationary { points, probs } = &self.kind else {
            return self.lognormal_moments(t, xis, gamma);
        };
        Ok(xis
            .iter()
            .map(|&xi| {
                let mut power = 0.0;
                let mut slope = 0.0;
                let mut atom = 0.0;
                for (&z, &p) in points.iter().zip(probs) {
                    let base = xi + z;
                    if (z + self.zlow).abs() <= 1e-14 {
                        // The atom at -z̲ is kept apart: its slope term is singular at the floor.
                        atom += p;
                        if base > 0.0 {
                            power += p * base.powf(gamma);
                        }
                        continue;
                    }
                    power += p * base.powf(gamma);
                    slope += p * base.powf(gamma - 1.0);
                }
                KernelMoments {
                    power,
                    slope_regular: slope,
                    atom,
                }
            })
            .collect())
    }

    /// Growth factors `g_j = 1 + z_j` and weights `w_j` with
    /// `∫ f(z) p(t, dz) ≈ Σ w_j f(g_j - 1)`: the support itself for discrete
    /// laws, Gauss–Hermite nodes otherwise. Factors are kept unshifted so tiny
    /// lognormal growth stays positive.
    pub(crate) fn growth_law(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if let ReturnKind::DiscreteStationary { points, probs } = &self.kind {
            return (points.iter().map(|z| 1.0 + z).collect(), probs.clone());
        }
        let (mean, var) = self.log_moments(t.max(0.0)).expect("lognormal law");
        if var <= 0.0 {
            return (vec![mean.exp()], vec![1.0]);
        }
        let scale = (2.0 * var).sqrt();
        let norm = std::f64::consts::PI.sqrt();
        self.gh
            .nodes()
            .iter()
            .zip(self.gh.weights())
            .map(|(&x, &w)| ((mean + scale * x).exp(), w / norm))
            .unzip()
    }

    fn lognormal_moments(&self, t: f64, xis: &[f64], gamma: f64) -> Result<Vec<KernelMoments>> {
        let (growth, weights) = self.growth_law(t);
        let pow = |x: f64| if gamma == 0.5 { x.sqrt() } else { (gamma * x.ln()).exp() };
        xis.iter()
            .map(|&xi| {
                let shift = xi - 1.0;
                let mut power = 0.0;
                let mut slope = 0.0;
                for (&g, &w) in growth.iter().zip(&weights) {
                    let base = shift + g;
                    let p = pow(base);
                    power += w * p;
                    slope += w * p / base;
                }
                if !(power.is_finite() && slope.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "kernel moments not finite at t = {t}, xi = {xi}"
                    )));
                }
                Ok(KernelMoments {
                    power,
                    slope_regular: slope,
                    atom: 0.0,
                })
            })
            .collect()
    }

    /// Constants `(k, b)` with `∫(1+z) p(t,dz) ≤ k e^{bt}`.
    pub fn growth_constants(&self) -> (f64, f64) {
        match &self.kind {
            ReturnKind::BlackScholes { drift, .. } => (1.0, *drift),
            ReturnKind::FrozenLognormal { t0, drift, .. } => ((drift * t0).exp(), 0.0),
            ReturnKind::DiscreteStationary { points, probs } => {
                let k = points.iter().zip(probs).map(|(z, p)| (1.0 + z) * p).sum();
                (k, 0.0)
            }
        }
    }

    /// Return realised after a waiting time `dt`, from one standard normal and
    /// one uniform draw. Each kind uses only the draw it needs, so two runs fed
    /// the same draws see the same returns.
    pub fn return_from_draws(&self, dt: f64, normal: f64, uniform: f64) -> f64 {
        match &self.kind {
            ReturnKind::DiscreteStationary { points, probs } => {
                let mut acc = 0.0;
                for (&z, &p) in points.iter().zip(probs) {
                    acc += p;
                    if uniform < acc {
                        return z;
                    }
                }
                *points.last().expect("nonempty support")
            }
            _ => {
                let (mean, var) = self.log_moments(dt).expect("lognormal law");
                (mean + var.sqrt() * normal).exp() - 1.0
            }
        }
    }
}

fn check_lognormal(drift: f64, sigma: f64) -> Result<()> {
    if !(drift >= 0.0 && drift.is_finite()) {
        return Err(Error::config(format!("drift must be nonnegative, got {drift}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("volatility must be positive, got {sigma}")));
    }
    Ok(())
}

/// `g(t, ξ) = λ θ₁ ∫ (ξ + z)^γ p(t, dz)`, the reduced expected continuation value.
pub fn g_scaled(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    theta1: f64,
    t: f64,
    xi: f64,
) -> Result<f64> {
    if theta1 < 0.0 {
        return Err(Error::domain(format!("theta1 must be nonnegative, got {theta1}")));
    }
    let m = model.kernel_moments(t, xi, u.gamma())?;
    Ok(params.lambda() * theta1 * m.power)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Value,
    DerivT,
    DerivZ,
}

/// Density of the Black–Scholes return `Z(t)` and its partial derivatives.
pub fn bs_density(drift: f64, sigma: f64, t: f64, z: f64, which: DensityKind) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("density needs t > 0, got {t}")));
    }
    if !(z > -1.0) {
        return Err(Error::domain(format!("density needs z > -1, got {z}")));
    }
    let s2 = sigma * sigma;
    let lz = (1.0 + z).ln();
    let m = (drift - 0.5 * s2) * t;
    let f = (-(lz - m).powi(2) / (2.0 * s2 * t)).exp() / (sigma * (2.0 * std::f64::consts::PI * t).sqrt() * (1.0 + z));
    Ok(match which {
        DensityKind::Value => f,
        DensityKind::DerivT => {
            f * (-0.5 / t + lz * lz / (2.0 * s2 * t * t) - drift * drift / (2.0 * s2) + 0.5 * drift - s2 / 8.0)
        }
        DensityKind::DerivZ => f / (1.0 + z) * (drift / s2 - 1.5 - lz / (s2 * t)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionFlag {
    Pass,
    Borderline,
    Fail,
}

impl fmt::Display for AssumptionFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssumptionFlag::Pass => "pass",
            AssumptionFlag::Borderline => "borderline",
            AssumptionFlag::Fail => "fail",
        })
    }
}

/// Outcome of checking `ρ > bγ + λ(k^γ / z̲^γ - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub rho: f64,
    pub rhs: f64,
    pub k: f64,
    pub b: f64,
    pub flag: AssumptionFlag,
    /// Mean return nonnegative at the sampled waiting times.
    pub mean_return_ok: bool,
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "growth condition: rho > b*gamma + lambda*(k^gamma/zlow^gamma - 1)")?;
        writeln!(f, "  k = {:.12}, b = {:.12}", self.k, self.b)?;
        writeln!(f, "  rho = {:.12}, rhs = {:.12}", self.rho, self.rhs)?;
        writeln!(f, "  mean return nonnegative: {}", self.mean_return_ok)?;
        write!(f, "  status: {}", self.flag)
    }
}

pub fn validate_assumptions(model: &ReturnModel, params: &MarketParams, u: &PowerUtility) -> AssumptionReport {
    let (k, b) = model.growth_constants();
    let gamma = u.gamma();
    let rhs = b * gamma + params.lambda() * ((k / model.zlow()).powf(gamma) - 1.0);
    let rho = params.rho();
    let flag = if (rho - rhs).abs() <= BORDERLINE_TOL * rho.abs().max(1.0) {
        AssumptionFlag::Borderline
    } else if rho > rhs {
        AssumptionFlag::Pass
    } else {
        AssumptionFlag::Fail
    };
    let mean_return_ok = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0]
        .iter()
        .all(|&t| model.mean_return(t).map(|m| m >= -1e-12).unwrap_or(false));
    if flag == AssumptionFlag::Borderline {
        log::warn!("growth condition holds only with equality (rho = {rho}, rhs = {rhs})");
    }
    AssumptionReport {
        rho,
        rhs,
        k,
        b,
        flag,
        mean_return_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point() -> ReturnModel {
        ReturnModel::discrete(vec![-0.5, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn l_bound_cases() {
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        assert_eq!(bs.l_bound(2.0).unwrap(), 2.0);
        assert_eq!(bs.l_bound(0.0).unwrap(), 0.0);
        assert!(bs.l_bound(-1.0).is_err());
        let d = ReturnModel::discrete(vec![-0.5, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.l_bound(2.0).unwrap(), 1.0);
        assert_eq!(d.l_bound(-2.0).unwrap(), 2.0);
    }

    #[test]
    fn expectations() {
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        let m = bs.expect(1.0, |z| 1.0 + z).unwrap();
        assert_relative_eq!(m, 1.49182, epsilon = 1e-5);
        assert_relative_eq!(m, 0.4f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(bs.expect(2.0, |_| 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(two_point().expect(0.0, |z| z).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(two_point().expect(7.0, |_| 1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expectation_of_explosive_integrand_is_an_error() {
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        let r = bs.expect(1.0, |z| (1e3 * (1.0 + z)).exp());
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn g_scaled_examples() {
        let d = two_point();
        let p = MarketParams::new(0.2, 2.0).unwrap();
        let u = PowerUtility::new(1.0, 0.5).unwrap();
        let g = g_scaled(&d, &p, &u, 1.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(g, 2.0 * 0.5 * 1.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g, 1.22474, epsilon = 1e-5);
        assert_eq!(g_scaled(&d, &p, &u, 0.0, 3.0, 4.0).unwrap(), 0.0);
        assert!(g_scaled(&d, &p, &u, 1.0, 0.0, 0.4).is_err());

        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        let g0 = g_scaled(&bs, &p, &u, 1.0, 1e-12, 1.0).unwrap();
        assert_relative_eq!(g0, 2.0, max_relative = 1e-5);
    }

    #[test]
    fn black_scholes_power_moment_at_floor() {
        // E[(1+Z)^γ] = exp(γ(b - σ²/2)t + γ²σ²t/2).
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        for t in [0.1, 1.0, 3.0, 9.0] {
            let m = bs.kernel_moments(t, 1.0, 0.5).unwrap();
            let exact = (0.5 * (0.4 - 0.5) * t + 0.125 * t).exp();
            assert_relative_eq!(m.power, exact, max_relative = 1e-12);
            let exact_slope = (-0.5 * (0.4 - 0.5) * t + 0.125 * t).exp();
            assert_relative_eq!(m.slope_regular, exact_slope, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_value_and_domain() {
        let f = bs_density(0.4, 1.0, 1.0, 0.0, DensityKind::Value).unwrap();
        assert_relative_eq!(f, 0.396953, epsilon = 1e-6);
        assert!(bs_density(0.4, 1.0, 0.0, 0.0, DensityKind::Value).is_err());
        assert!(bs_density(0.4, 1.0, 1.0, -1.0, DensityKind::Value).is_err());
    }

    #[test]
    fn density_derivatives_match_finite_differences() {
        let (b, s) = (0.4, 1.0);
        for &(t, z) in &[(1.0, 0.0), (0.5, 0.7), (2.0, -0.4), (3.0, 2.5)] {
            let h = 1e-5;
            let fd_z = (bs_density(b, s, t, z + h, DensityKind::Value).unwrap()
                - bs_density(b, s, t, z - h, DensityKind::Value).unwrap())
                / (2.0 * h);
            let fd_t = (bs_density(b, s, t + h, z, DensityKind::Value).unwrap()
                - bs_density(b, s, t - h, z, DensityKind::Value).unwrap())
                / (2.0 * h);
            let dz = bs_density(b, s, t, z, DensityKind::DerivZ).unwrap();
            let dt = bs_density(b, s, t, z, DensityKind::DerivT).unwrap();
            assert_relative_eq!(dz, fd_z, max_relative = 1e-6);
            assert_relative_eq!(dt, fd_t, max_relative = 1e-6);
        }
    }

    #[test]
    fn assumption_flags() {
        let u = PowerUtility::new(1.0, 0.5).unwrap();
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        let r = validate_assumptions(&bs, &MarketParams::new(0.2, 2.0).unwrap(), &u);
        assert_relative_eq!(r.rhs, 0.2, epsilon = 1e-15);
        assert_eq!(r.flag, AssumptionFlag::Borderline);
        assert_eq!((r.k, r.b), (1.0, 0.4));
        let r = validate_assumptions(&bs, &MarketParams::new(0.5, 2.0).unwrap(), &u);
        assert_eq!(r.flag, AssumptionFlag::Pass);
        let r = validate_assumptions(&bs, &MarketParams::new(0.05, 2.0).unwrap(), &u);
        assert_eq!(r.flag, AssumptionFlag::Fail);
        // Vanishing intensity: only ρ > bγ remains, and 0.1 < 0.2 fails.
        let r = validate_assumptions(&bs, &MarketParams::new(0.1, 1e-12).unwrap(), &u);
        assert_eq!(r.flag, AssumptionFlag::Fail);
        assert!(r.mean_return_ok);
    }

    #[test]
    fn discrete_growth_constants() {
        let d = two_point();
        assert_eq!(d.growth_constants(), (1.25, 0.0));
    }

    #[test]
    fn discrete_validation() {
        assert!(ReturnModel::discrete(vec![-0.5, 1.0], vec![0.5, 0.6]).is_err());
        assert!(ReturnModel::discrete(vec![-0.5, 0.1], vec![0.9, 0.1]).is_err());
        assert!(ReturnModel::discrete(vec![-1.5, 1.0], vec![0.5, 0.5]).is_err());
        assert!(ReturnModel::discrete_with_bounds(vec![-0.2, 1.0], vec![0.5, 0.5], 0.1, 2.0).is_err());
        let d = two_point();
        assert_eq!(d.zlow(), 0.5);
        assert_eq!(d.zhigh(), 1.0);
    }

    #[test]
    fn categorical_sampling_uses_the_uniform() {
        let d = two_point();
        assert_eq!(d.return_from_draws(1.0, 0.0, 0.2), -0.5);
        assert_eq!(d.return_from_draws(1.0, 0.0, 0.7), 1.0);
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        assert_relative_eq!(bs.return_from_draws(1.0, 0.0, 0.3), (-0.1f64).exp() - 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn l_bound_is_convex(a1 in -5.0f64..5.0, a2 in -5.0f64..5.0, eta in 0.0f64..1.0) {
                let d = ReturnModel::discrete(vec![-0.5, 0.2, 1.0], vec![0.3, 0.4, 0.3]).unwrap();
                let mix = d.l_bound(eta * a1 + (1.0 - eta) * a2).unwrap();
                let chord = eta * d.l_bound(a1).unwrap() + (1.0 - eta) * d.l_bound(a2).unwrap();
                prop_assert!(mix <= chord + 1e-12);
            }

            #[test]
            fn l_bound_is_convex_long_only(a1 in 0.0f64..5.0, a2 in 0.0f64..5.0, eta in 0.0f64..1.0) {
                let bs = ReturnModel::black_scholes(0.1, 0.3).unwrap();
                let mix = bs.l_bound(eta * a1 + (1.0 - eta) * a2).unwrap();
                let chord = eta * bs.l_bound(a1).unwrap() + (1.0 - eta) * bs.l_bound(a2).unwrap();
                prop_assert!(mix <= chord + 1e-12);
            }
        }
    }
}
