//! Executable controls: the invested amount at trading dates and the
//! consumption rate between them.
//!
//! Between two trades the optimal path for wealth `x` and allocation `a` is the
//! unit path scaled by `a` (positive homogeneity of degree one in `(x, a)`), so
//! one template path solved at `(ξ*, 1)` serves every trade.

use std::fmt;

use crate::bvp::{solve_bvp, ConsumptionPath, ShootingConfig};
use crate::error::{Error, Result};
use crate::utility::{PowerUtility, UtilityFn};
use crate::value::ValueFunction;

#[derive(Debug, Clone)]
pub struct Policy {
    xi_star: f64,
    pi_star: f64,
    theta1: f64,
    rho: f64,
    utility: PowerUtility,
    template: ConsumptionPath,
    /// `∫_0^{s_k} e^{−ρs} U(c(s)) ds` on the template lattice.
    cumulative: Vec<f64>,
}

impl Policy {
    /// Builds the policy and its template path. When not investing is optimal
    /// the template is the no-trade path from unit wealth.
    pub fn new<V: ValueFunction + ?Sized>(value: &V, shooting: &ShootingConfig) -> Result<Self> {
        let xi_star = value.xi_star();
        let (x0, a, pi_star) = if xi_star.is_finite() {
            (xi_star, 1.0, 1.0 / xi_star)
        } else {
            (1.0, 0.0, 0.0)
        };
        let template = solve_bvp(value, x0, a, shooting)?;
        let rho = value.params().rho();
        let utility = *value.utility();
        let cumulative = cumulative_utility(&template, &utility, rho)?;
        Ok(Self {
            xi_star,
            pi_star,
            theta1: value.theta1(),
            rho,
            utility,
            template,
            cumulative,
        })
    }

    pub fn xi_star(&self) -> f64 {
        self.xi_star
    }

    /// Invested fraction of wealth at a trading date, `1/ξ*`.
    pub fn pi_star(&self) -> f64 {
        self.pi_star
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn utility(&self) -> &PowerUtility {
        &self.utility
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn template(&self) -> &ConsumptionPath {
        &self.template
    }

    /// `a* = x/ξ*`.
    pub fn optimal_allocation(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("wealth must be nonnegative, got {x}")));
        }
        Ok(x * self.pi_star)
    }

    /// Factor mapping the template onto a trade with wealth `x`.
    pub fn scale(&self, x: f64) -> f64 {
        x / self.template.x0()
    }

    /// Wealth and consumption rate `s` after a trade with wealth `x`.
    pub fn state(&self, x: f64, s: f64) -> Result<(f64, f64)> {
        let (y, c) = self.template.state_at(s)?;
        let k = self.scale(x);
        Ok((k * y, k * c))
    }

    /// `∫_0^d e^{−ρs} U(c(s)) ds` along the template (unit scale); multiply by
    /// `scale(x)^γ` for a trade with wealth `x`.
    pub fn template_utility(&self, d: f64) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::domain(format!("duration must be nonnegative, got {d}")));
        }
        let s = self.template.s();
        let last = s.len() - 1;
        if d >= s[last] {
            return Ok(self.cumulative[last] + self.tail_utility(d)?);
        }
        let h = s[1] - s[0];
        let k = ((d / h).floor() as usize).min(last - 1);
        Ok(self.cumulative[k] + self.simpson(s[k], d)?)
    }

    /// Consumption past the end of the template decays exponentially, so its
    /// discounted utility has a closed form.
    fn tail_utility(&self, d: f64) -> Result<f64> {
        let p = &self.template;
        let end = p.end_time();
        let gap = p.wealth()[p.wealth().len() - 1] - p.floor();
        let c_end = p.rate()[p.rate().len() - 1];
        if gap <= 0.0 || c_end <= 0.0 {
            return Ok(0.0);
        }
        let decay = self.rho + self.utility.gamma() * c_end / gap;
        let head = self.utility.value(c_end) * (-self.rho * end).exp();
        Ok(head * -(-decay * (d - end)).exp_m1() / decay)
    }

    fn simpson(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let f = |s: f64| -> Result<f64> {
            let (_, c) = self.template.state_at(s)?;
            Ok((-self.rho * s).exp() * self.utility.value(c))
        };
        Ok((b - a) / 6.0 * (f(a)? + 4.0 * f(0.5 * (a + b))? + f(b)?))
    }

    /// Plain-text summary.
    pub fn report(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "xi_star = {:.12}", self.xi_star)?;
        writeln!(f, "pi_star = {:.12}", self.pi_star)?;
        writeln!(f, "theta1  = {:.12}", self.theta1)?;
        write!(
            f,
            "template: c0 = {:.12}, floor reached at s = {:.4} ({})",
            self.template.initial_rate(),
            self.template.end_time(),
            self.template.class()
        )
    }
}

fn cumulative_utility(path: &ConsumptionPath, u: &PowerUtility, rho: f64) -> Result<Vec<f64>> {
    let s = path.s();
    let c = path.rate();
    let f = |sk: f64, ck: f64| (-rho * sk).exp() * u.value(ck);
    let mut out = Vec::with_capacity(s.len());
    out.push(0.0);
    let mut acc = 0.0;
    for k in 0..s.len() - 1 {
        let mid = 0.5 * (s[k] + s[k + 1]);
        let (_, cm) = path.state_at(mid)?;
        acc += (s[k + 1] - s[k]) / 6.0 * (f(s[k], c[k]) + 4.0 * f(mid, cm) + f(s[k + 1], c[k + 1]));
        out.push(acc);
    }
    Ok(out)
}

/// Checked feedback rate `I(∂v̂/∂x)(t, x, a)`; zero at the floor `l(a)`.
pub fn feedback_rate<V: ValueFunction + ?Sized>(value: &V, u: &PowerUtility, t: f64, x: f64, a: f64) -> Result<f64> {
    if value.utility() != u {
        return Err(Error::Mismatch(
            "value function was solved for a different utility".into(),
        ));
    }
    let floor = value.model().l_bound(a)?;
    if x < floor {
        return Err(Error::domain(format!(
            "wealth {x} lies below the floor {floor} for allocation {a}"
        )));
    }
    if x == floor {
        return Ok(0.0);
    }
    value.feedback_rate(t, x, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::market::{MarketParams, ReturnModel};
    use crate::stationary::{fixed_point_theta1, FixedPointConfig};
    use crate::value::VhatKind;

    fn demo() -> (ReturnModel, MarketParams, PowerUtility) {
        (
            ReturnModel::discrete(vec![-0.5, 0.2, 0.8], vec![0.1, 0.6, 0.3]).unwrap(),
            MarketParams::new(0.8, 1.0).unwrap(),
            PowerUtility::new(1.0, 0.5).unwrap(),
        )
    }

    #[test]
    fn allocation_is_homogeneous_and_maximises() {
        let (m, p, u) = demo();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::default(), &FixedPointConfig::default()).unwrap();
        let pol = Policy::new(&vg, &ShootingConfig::default()).unwrap();
        assert_eq!(pol.optimal_allocation(0.0).unwrap(), 0.0);
        assert!(pol.optimal_allocation(-1.0).is_err());
        let x = 1.7;
        assert_eq!(
            pol.optimal_allocation(2.0 * x).unwrap(),
            2.0 * pol.optimal_allocation(x).unwrap()
        );

        // Brute force over a in [x/ξ_max, x/zlow).
        let (lo, top) = (x / vg.xi_grid().end(), x / m.zlow());
        let n = 4000;
        let cell = (top - lo) / n as f64;
        let best = (0..n)
            .map(|i| lo + i as f64 * cell)
            .map(|a| (a, vg.vhat(0.0, x, a, VhatKind::Value).unwrap()))
            .fold((0.0, f64::NEG_INFINITY), |b, t| if t.1 > b.1 { t } else { b });
        assert!((best.0 - pol.optimal_allocation(x).unwrap()).abs() <= cell);
    }

    #[test]
    fn template_utility_matches_path_quadrature() {
        let (m, p, u) = demo();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::default(), &FixedPointConfig::default()).unwrap();
        let pol = Policy::new(&vg, &ShootingConfig::default()).unwrap();
        let full = pol.template_utility(200.0).unwrap();
        let t = pol.template();
        let trap: f64 = t
            .s()
            .windows(2)
            .zip(t.rate().windows(2))
            .map(|(s, c)| {
                0.5 * (s[1] - s[0]) * ((-0.8 * s[0]).exp() * u.value(c[0]) + (-0.8 * s[1]).exp() * u.value(c[1]))
            })
            .sum();
        assert!((full - trap).abs() <= 1e-4 * full);
        // Monotone in the duration, continuous across the end of the lattice.
        let e = t.end_time();
        let before = pol.template_utility(e * (1.0 - 1e-9)).unwrap();
        let after = pol.template_utility(e * (1.0 + 1e-9)).unwrap();
        assert!((after - before).abs() <= 1e-8 * full);
        assert!(pol.template_utility(1.0).unwrap() < pol.template_utility(2.0).unwrap());
    }

    #[test]
    fn feedback_rate_at_the_floor_and_increasing_in_wealth() {
        let (m, p, u) = demo();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::default(), &FixedPointConfig::default()).unwrap();
        let floor = m.l_bound(1.0).unwrap();
        assert_eq!(feedback_rate(&vg, &u, 0.0, floor, 1.0).unwrap(), 0.0);
        assert!(feedback_rate(&vg, &u, 0.0, floor * 0.99, 1.0).is_err());
        let rates: Vec<f64> = (1..200)
            .map(|i| floor + 0.02 * i as f64)
            .map(|x| feedback_rate(&vg, &u, 0.0, x, 1.0).unwrap())
            .collect();
        assert!(rates[0] > 0.0);
        assert!(rates.windows(2).all(|w| w[1] > w[0]));
    }
}
