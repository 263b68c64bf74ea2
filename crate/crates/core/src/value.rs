//! Common interface of reduced value functions and the scaling representation
//! `v̂(t, x, a) = a^γ v̄(t, x/a)`.

use crate::error::{Error, Result};
use crate::grid::XiGrid;
use crate::hermite;
use crate::market::{MarketParams, ReturnModel};
use crate::reduced::Slice;
use crate::utility::{PowerUtility, UtilityFn};

/// Which quantity of `v̂` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VhatKind {
    Value,
    DValueDx,
}

/// A solved reduced value function `v̄(t, ξ)` together with the data it was
/// solved for. Stationary solutions ignore `t`.
pub trait ValueFunction: Sync {
    fn utility(&self) -> &PowerUtility;
    fn model(&self) -> &ReturnModel;
    fn params(&self) -> &MarketParams;
    fn theta1(&self) -> f64;
    /// Maximiser of `ξ^{-γ} v̄(0, ξ)`; infinite when not investing is optimal.
    fn xi_star(&self) -> f64;
    fn xi_grid(&self) -> &XiGrid;
    /// Last time covered, `None` for stationary solutions.
    fn t_max(&self) -> Option<f64>;
    /// Coefficient `C` of the no-investment value `v̂(t, x, 0) = C x^γ`.
    fn no_trade_coefficient(&self) -> f64;

    fn vbar_at(&self, t: f64, xi: f64) -> Result<f64>;
    fn dvbar_at(&self, t: f64, xi: f64) -> Result<f64>;

    fn is_stationary(&self) -> bool {
        self.t_max().is_none()
    }

    /// `v̂(t, x, a)` or its `x`-derivative. Allocations must be nonnegative.
    fn vhat(&self, t: f64, x: f64, a: f64, which: VhatKind) -> Result<f64> {
        let gamma = self.utility().gamma();
        if !(a >= 0.0) {
            return Err(Error::domain(format!("allocation must be nonnegative, got {a}")));
        }
        if !(x >= 0.0) {
            return Err(Error::domain(format!("wealth must be nonnegative, got {x}")));
        }
        if a == 0.0 {
            let c = self.no_trade_coefficient();
            return Ok(match which {
                VhatKind::Value => c * x.powf(gamma),
                VhatKind::DValueDx if x == 0.0 => f64::INFINITY,
                VhatKind::DValueDx => gamma * c * x.powf(gamma - 1.0),
            });
        }
        let zlow = self.model().zlow();
        let floor = a * zlow;
        if x < floor * (1.0 - 1e-14) {
            return Err(Error::domain(format!(
                "wealth {x} lies below the minimum {floor} for allocation {a}"
            )));
        }
        let xi = (x / a).max(zlow);
        Ok(match which {
            VhatKind::Value => a.powf(gamma) * self.vbar_at(t, xi)?,
            VhatKind::DValueDx => a.powf(gamma - 1.0) * self.dvbar_at(t, xi)?,
        })
    }

    /// `v(x) = θ₁ x^γ`.
    fn value(&self, x: f64) -> f64 {
        self.theta1() * x.max(0.0).powf(self.utility().gamma())
    }

    /// Feedback consumption `I(∂v̂/∂x)`; zero at the wealth floor.
    fn feedback_rate(&self, t: f64, x: f64, a: f64) -> Result<f64> {
        let y = self.vhat(t, x, a, VhatKind::DValueDx)?;
        Ok(self.utility().inverse_marginal(y))
    }
}

/// Checked evaluation of `v̂` against the utility the caller expects.
pub fn vhat_eval<V: ValueFunction + ?Sized>(
    value: &V,
    u: &PowerUtility,
    t: f64,
    x: f64,
    a: f64,
    which: VhatKind,
) -> Result<f64> {
    if value.utility() != u {
        return Err(Error::Mismatch(
            "value function was solved for a different utility".into(),
        ));
    }
    value.vhat(t, x, a, which)
}

pub(crate) fn check_xi(grid: &XiGrid, xi: f64) -> Result<()> {
    if xi.is_nan() || xi < grid.start() * (1.0 - 1e-14) {
        return Err(Error::domain(format!(
            "xi = {xi} lies below the floor {}",
            grid.start()
        )));
    }
    if xi > grid.end() * (1.0 + 1e-14) {
        return Err(Error::domain(format!(
            "xi = {xi} lies beyond the grid end {}; enlarge xi_max",
            grid.end()
        )));
    }
    Ok(())
}

/// `v̄` between nodes: Hermite on values and slopes, except on the first
/// interval where the floor behaviour `(ξ − z̲)^γ` is used.
pub(crate) fn slice_value(grid: &XiGrid, s: &Slice, gamma: f64, xi: f64) -> f64 {
    let x = grid.nodes();
    let xi = xi.clamp(x[0], x[x.len() - 1]);
    let i = grid.locate(xi);
    if i == 0 {
        let frac = ((xi - x[0]) / (x[1] - x[0])).clamp(0.0, 1.0);
        return s.vbar[0] + (s.vbar[1] - s.vbar[0]) * frac.powf(gamma);
    }
    hermite::cubic(x[i], x[i + 1], s.vbar[i], s.vbar[i + 1], s.dvbar[i], s.dvbar[i + 1], xi)
}

/// `q` between nodes, Hermite on `(q, q′)`. The cell at the floor uses
/// `q = q′(z̲)d + b d^{2−γ}` instead, matching the leading singular term.
pub(crate) fn slice_q(grid: &XiGrid, s: &Slice, gamma: f64, xi: f64) -> f64 {
    let x = grid.nodes();
    let xi = xi.clamp(x[0], x[x.len() - 1]);
    let i = grid.locate(xi);
    if i == 0 && s.q[0] == 0.0 && s.dq[0].is_finite() {
        return s.first_cell(x, gamma, xi);
    }
    hermite::cubic(x[i], x[i + 1], s.q[i], s.q[i + 1], s.dq[i], s.dq[i + 1], xi).max(0.0)
}

pub(crate) fn slope_from_q(u: &PowerUtility, q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    u.ktilde1().powf(1.0 / u.gammatilde()) * q.powf(u.gamma() - 1.0)
}

pub(crate) fn slice_slope(grid: &XiGrid, s: &Slice, u: &PowerUtility, xi: f64) -> f64 {
    if xi <= grid.start() {
        return f64::INFINITY;
    }
    slope_from_q(u, slice_q(grid, s, u.gamma(), xi))
}

/// Location of `sup ξ^{-γ} v̄(ξ)` on one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RatioSup {
    pub xi: f64,
    pub value: f64,
    pub node: usize,
    /// Another node attains the discrete maximum within rounding.
    pub tied: bool,
}

pub(crate) fn ratio_sup(grid: &XiGrid, s: &Slice, gamma: f64) -> RatioSup {
    let x = grid.nodes();
    let n = x.len();
    let ratio: Vec<f64> = (0..n).map(|i| x[i].powf(-gamma) * s.vbar[i]).collect();
    let mut best = 0;
    for i in 1..n {
        // Strict comparison keeps the smallest maximiser.
        if ratio[i] > ratio[best] {
            best = i;
        }
    }
    let top = ratio[best];
    let tied = (0..n).any(|i| i.abs_diff(best) > 1 && top - ratio[i] <= 1e-13 * top.abs());
    if best == 0 || best == n - 1 {
        return RatioSup {
            xi: x[best],
            value: top,
            node: best,
            tied,
        };
    }
    let f = |xi: f64| -> f64 { xi.powf(-gamma) * slice_value(grid, s, gamma, xi) };
    let (xi, value) = golden_max(f, x[best - 1], x[best + 1]);
    let (xi, value) = if value >= top { (xi, value) } else { (x[best], top) };
    RatioSup {
        xi,
        value,
        node: best,
        tied,
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        // Ties move left so the smaller maximiser wins.
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 3.0);
        assert_relative_eq!(x, 1.3, epsilon = 1e-6);
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
    }
}
