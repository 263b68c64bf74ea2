//! Stationary reduced value function and the coefficient fixed point.
//!
//! Solves `(ρ+λ) v̄ − Ũ(v̄′) − λθ₁ E[(ξ+Z)^γ] = 0` on `[z̲, Ξmax]` together
//! with `θ₁ = sup_ξ ξ^{-γ} v̄(ξ)`.

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, XiGrid};
use crate::market::{validate_assumptions, AssumptionFlag, MarketParams, ReturnModel};
use crate::reduced::{self, KernelTable, Slice, StepProblem};
use crate::utility::{PowerUtility, UtilityFn};
use crate::value::{self, RatioSup, ValueFunction};

/// Discretisation of the reduced equation in `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Scheme {
    #[default]
    /// Radau IIA collocation along the first-order form in `q = Ũ(v̄′)^{1/γ}`; fifth order.
    Characteristic,
    /// Explicit pseudo-time marching with backward differences; first order.
    Upwind { march_tol: f64, max_sweeps: usize },
}

impl Scheme {
    pub fn upwind() -> Self {
        Scheme::Upwind {
            march_tol: 1e-10,
            max_sweeps: 5_000_000,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Characteristic => "characteristic",
            Scheme::Upwind { .. } => "upwind",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Damping `ω` of `θ ← (1−ω)θ + ω F(θ)`.
    pub omega: f64,
    /// Stop when `|F(θ) − θ| ≤ tol · θ`.
    pub tol: f64,
    pub max_iter: usize,
    /// Secant steps on `F(θ) − θ` when they move further than the damped step.
    pub accelerate: bool,
    /// Divergence is declared when `θ` exceeds this multiple of its first iterate.
    pub growth_limit: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            tol: 1e-10,
            max_iter: 2000,
            accelerate: true,
            growth_limit: 1e6,
        }
    }
}

impl FixedPointConfig {
    /// Plain undamped iteration (`ω = 1`, no acceleration).
    pub fn plain() -> Self {
        Self {
            omega: 1.0,
            accelerate: false,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config(format!("omega must lie in (0,1], got {}", self.omega)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.growth_limit > 1.0) {
            return Err(Error::config(
                "fixed-point tolerance, iteration cap and growth limit must be positive",
            ));
        }
        Ok(())
    }
}

/// Outcome of evaluating `F(θ) = max(sup_ξ ξ^{-γ} v̄_θ(ξ), C(θ))`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SupOutcome {
    pub value: f64,
    pub xi_star: f64,
    pub tied: bool,
    pub no_trade: f64,
}

pub(crate) fn evaluate_sup(
    grid: &XiGrid,
    slice: &Slice,
    u: &PowerUtility,
    params: &MarketParams,
    theta1: f64,
) -> Result<SupOutcome> {
    let RatioSup { xi, value, node, tied } = value::ratio_sup(grid, slice, u.gamma());
    let no_trade = reduced::no_trade_coefficient(u, params.discount(), params.lambda() * theta1);
    let n = grid.len();
    if node == 0 {
        return Err(Error::ArgmaxAtEdge {
            xi,
            hint: "maximum sits at the wealth floor; the reduced solution is not increasing".into(),
        });
    }
    if node == n - 1 {
        if no_trade >= value {
            return Ok(SupOutcome {
                value: no_trade,
                xi_star: f64::INFINITY,
                tied,
                no_trade,
            });
        }
        return Err(Error::ArgmaxAtEdge {
            xi,
            hint: "increase xi_max".into(),
        });
    }
    if no_trade > value {
        return Ok(SupOutcome {
            value: no_trade,
            xi_star: f64::INFINITY,
            tied,
            no_trade,
        });
    }
    Ok(SupOutcome {
        value,
        xi_star: xi,
        tied,
        no_trade,
    })
}

/// Damped / secant iteration for `θ = F(θ)` starting from `θ = 0`.
pub(crate) fn iterate_theta<S>(
    fp: &FixedPointConfig,
    eval: impl FnMut(f64) -> Result<(SupOutcome, S)>,
) -> Result<(f64, SupOutcome, S, Vec<f64>)> {
    let run = iterate_theta_from(fp, None, eval)?;
    Ok((run.theta, run.out, run.state, run.history))
}

/// Starting point from an earlier, cheaper iteration: its final `θ₁` and the
/// last secant slope of `F(θ) − θ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WarmStart {
    pub theta: f64,
    pub slope: Option<f64>,
}

pub(crate) struct FixedPointRun<S> {
    pub theta: f64,
    pub out: SupOutcome,
    pub state: S,
    pub history: Vec<f64>,
    pub slope: Option<f64>,
}

pub(crate) fn iterate_theta_from<S>(
    fp: &FixedPointConfig,
    warm: Option<WarmStart>,
    mut eval: impl FnMut(f64) -> Result<(SupOutcome, S)>,
) -> Result<FixedPointRun<S>> {
    fp.check()?;
    let mut theta = warm.map_or(0.0, |w| w.theta);
    let mut hint = warm.and_then(|w| w.slope);
    let (mut out, mut state) = eval(theta)?;
    let first = out.value;
    let mut history = vec![theta];
    let mut prev: Option<(f64, f64)> = None;
    let mut slope_seen = None;
    for it in 1..=fp.max_iter {
        let f = out.value;
        let gap = f - theta;
        if theta > 0.0 && gap.abs() <= fp.tol * theta.abs() {
            return Ok(FixedPointRun {
                theta,
                out,
                state,
                history,
                slope: slope_seen,
            });
        }
        let damped = (1.0 - fp.omega) * theta + fp.omega * f;
        let mut next = damped;
        if fp.accelerate {
            let slope = match prev {
                Some((tp, hp)) => Some((gap - hp) / (theta - tp)),
                None => hint.take(),
            };
            if let Some(slope) = slope {
                if slope < 0.0 && slope.is_finite() {
                    slope_seen = Some(slope);
                    let secant = theta - gap / slope;
                    if secant.is_finite() && secant > next {
                        next = secant;
                    }
                }
            }
        }
        if next > fp.growth_limit * first.max(f64::MIN_POSITIVE) || !next.is_finite() {
            return Err(Error::Divergence {
                iterations: it,
                theta1: next,
            });
        }
        prev = Some((theta, gap));
        theta = next;
        history.push(theta);
        let (o, s) = eval(theta)?;
        out = o;
        state = s;
        log::debug!("theta1 iteration {it}: theta = {theta:.15e}, F = {:.15e}", out.value);
    }
    Err(Error::NonConvergence {
        what: "theta1 fixed point".into(),
        iterations: fp.max_iter,
        residual: (out.value - theta).abs() / theta.max(f64::MIN_POSITIVE),
    })
}

/// Reduced value function on a `ξ` grid.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    grid: XiGrid,
    slice: Slice,
    source: Vec<f64>,
    theta1: f64,
    sup: Option<SupOutcome>,
    no_trade: f64,
    model: ReturnModel,
    params: MarketParams,
    utility: PowerUtility,
    scheme: Scheme,
    march_residual: Option<f64>,
    history: Vec<f64>,
}

fn require_stationary(model: &ReturnModel) -> Result<()> {
    if !model.is_stationary() {
        return Err(Error::config(
            "the stationary solver needs a time-independent return law; \
             use the surface solver or freeze the law at a fixed horizon",
        ));
    }
    Ok(())
}

/// Solve the reduced equation for a given `θ₁` with the default scheme.
pub fn solve_vbar(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    theta1: f64,
    grid_cfg: &GridConfig,
) -> Result<ValueGrid> {
    solve_vbar_with(model, params, u, theta1, grid_cfg, Scheme::Characteristic)
}

pub fn solve_vbar_with(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    theta1: f64,
    grid_cfg: &GridConfig,
    scheme: Scheme,
) -> Result<ValueGrid> {
    require_stationary(model)?;
    if !(theta1 >= 0.0 && theta1.is_finite()) {
        return Err(Error::domain(format!("theta1 must be nonnegative, got {theta1}")));
    }
    let grid = grid_cfg.build(model.zlow())?;
    let kernel = KernelTable::build(model, 0.0, &grid, u.gamma())?;
    let (slice, march) = solve_on(&grid, &kernel, u, params, theta1, scheme)?;
    let source = kernel.power.iter().map(|p| params.lambda() * theta1 * p).collect();
    let no_trade = reduced::no_trade_coefficient(u, params.discount(), params.lambda() * theta1);
    Ok(ValueGrid {
        grid,
        slice,
        source,
        theta1,
        sup: None,
        no_trade,
        model: model.clone(),
        params: *params,
        utility: *u,
        scheme,
        march_residual: march,
        history: Vec::new(),
    })
}

fn solve_on(
    grid: &XiGrid,
    kernel: &KernelTable,
    u: &PowerUtility,
    params: &MarketParams,
    theta1: f64,
    scheme: Scheme,
) -> Result<(Slice, Option<f64>)> {
    let g_scale = params.lambda() * theta1;
    match scheme {
        Scheme::Characteristic => {
            let prob = StepProblem {
                r: params.discount(),
                g_scale,
                kernel,
                memory: &[],
            };
            Ok((reduced::solve_step(grid, u, &prob)?, None))
        }
        Scheme::Upwind { march_tol, max_sweeps } => {
            let (s, res) = march_upwind(grid, kernel, u, params.discount(), g_scale, march_tol, max_sweeps)?;
            Ok((s, Some(res)))
        }
    }
}

/// Explicit pseudo-time marching with backward differences.
fn march_upwind(
    grid: &XiGrid,
    kernel: &KernelTable,
    u: &PowerUtility,
    r: f64,
    g_scale: f64,
    march_tol: f64,
    max_sweeps: usize,
) -> Result<(Slice, f64)> {
    let x = grid.nodes();
    let n = x.len();
    let gamma = u.gamma();
    let gt = u.gammatilde();
    let g: Vec<f64> = kernel.power.iter().map(|p| g_scale * p).collect();
    let c0 = u.k1() * (r / (1.0 - gamma)).powf(gamma - 1.0);
    let mut v: Vec<f64> = (0..n).map(|i| g[i] / r + c0 * (x[i] - x[0]).powf(gamma)).collect();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut slope = vec![0.0; n];
    let mut clamped = 0usize;
    let mut residual = f64::INFINITY;
    for sweep in 0..max_sweeps {
        let mut speed_over_h: f64 = 0.0;
        for i in 1..n {
            let mut d = (v[i] - v[i - 1]) / h[i - 1];
            if !(d > 0.0) {
                clamped += 1;
                d = f64::MIN_POSITIVE.sqrt();
            }
            slope[i] = d;
            // |dŨ/dy| = γ̃ K̃₁ y^{-γ̃-1}, the consumption rate.
            let speed = gt * u.ktilde1() * d.powf(-gt - 1.0);
            speed_over_h = speed_over_h.max(speed / h[i - 1]);
        }
        let dtau = 0.9 / (r + speed_over_h);
        residual = 0.0;
        for i in 1..n {
            let f = -r * v[i] + u.conjugate(slope[i]) + g[i];
            residual = residual.max(f.abs());
            v[i] += dtau * f;
        }
        if residual < march_tol {
            log::debug!("upwind marching converged after {sweep} sweeps");
            break;
        }
        if sweep + 1 == max_sweeps {
            return Err(Error::NonConvergence {
                what: "upwind pseudo-time marching".into(),
                iterations: max_sweeps,
                residual,
            });
        }
    }
    if clamped > 0 {
        log::warn!("upwind marching clamped {clamped} nonpositive slopes");
    }
    let mut dv = vec![f64::INFINITY; n];
    for i in 1..n {
        dv[i] = (v[i] - v[i - 1]) / h[i - 1];
    }
    Ok((Slice::from_values(x, u, v, dv), residual))
}

/// Iterate `θ₁ = sup_ξ ξ^{-γ} v̄_{θ₁}(ξ)` from `θ₁ = 0`.
pub fn fixed_point_theta1(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    grid_cfg: &GridConfig,
    fp: &FixedPointConfig,
) -> Result<ValueGrid> {
    fixed_point_theta1_with(model, params, u, grid_cfg, fp, Scheme::Characteristic)
}

pub fn fixed_point_theta1_with(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    grid_cfg: &GridConfig,
    fp: &FixedPointConfig,
    scheme: Scheme,
) -> Result<ValueGrid> {
    require_stationary(model)?;
    let report = validate_assumptions(model, params, u);
    if report.flag == AssumptionFlag::Fail {
        log::warn!(
            "growth condition fails (rho = {}, rhs = {}); iterating anyway",
            report.rho,
            report.rhs
        );
    }
    let grid = grid_cfg.build(model.zlow())?;
    let kernel = KernelTable::build(model, 0.0, &grid, u.gamma())?;
    let (theta1, sup, (slice, march), history) = iterate_theta(fp, |theta| {
        let (s, m) = solve_on(&grid, &kernel, u, params, theta, scheme)?;
        let out = evaluate_sup(&grid, &s, u, params, theta)?;
        Ok((out, (s, m)))
    })?;
    if sup.tied {
        log::warn!("ratio xi^-gamma vbar has several near-equal maxima; the smallest xi was kept");
    }
    let source = kernel.power.iter().map(|p| params.lambda() * theta1 * p).collect();
    Ok(ValueGrid {
        grid,
        slice,
        source,
        theta1,
        sup: Some(sup),
        no_trade: sup.no_trade,
        model: model.clone(),
        params: *params,
        utility: *u,
        scheme,
        march_residual: march,
        history,
    })
}

impl ValueGrid {
    pub fn xi(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn vbar(&self) -> &[f64] {
        &self.slice.vbar
    }

    /// Node slopes; the first entry (the floor) is infinite.
    pub fn dvbar(&self) -> &[f64] {
        &self.slice.dvbar
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `θ₁` iterates, starting at zero. Empty when `θ₁` was given.
    pub fn theta_history(&self) -> &[f64] {
        &self.history
    }

    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    /// Several grid nodes attain the maximal ratio within rounding.
    pub fn argmax_tied(&self) -> bool {
        self.sup.map(|s| s.tied).unwrap_or(false)
    }

    /// `sup ξ^{-γ} v̄`, or `None` when `θ₁` was prescribed.
    pub fn sup_ratio(&self) -> Option<f64> {
        self.sup.map(|s| s.value)
    }

    /// `|θ₁ − F(θ₁)| / θ₁` after a fixed-point solve.
    pub fn fixed_point_residual(&self) -> Option<f64> {
        self.sup
            .map(|s| (s.value - self.theta1).abs() / self.theta1.max(f64::MIN_POSITIVE))
    }

    /// Largest update of the upwind marching at exit.
    pub fn march_residual(&self) -> Option<f64> {
        self.march_residual
    }

    /// `λθ₁ E[(ξᵢ + Z)^γ]` at the nodes.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Sup-norm of `(ρ+λ)v̄ − Ũ(v̄′) − λθ₁E[(ξ+Z)^γ]` on interior nodes, with
    /// `v̄′` from finite differences of the stored values.
    pub fn residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }

    /// Pointwise plug-back residuals on nodes `1..n-1`.
    pub fn residuals(&self) -> Vec<f64> {
        let x = self.grid.nodes();
        let slope = reduced::fd_slope(x, &self.slice.vbar, self.utility.gamma());
        let r = self.params.discount();
        (1..x.len() - 1)
            .map(|i| {
                if !(slope[i] > 0.0) {
                    return f64::INFINITY;
                }
                (r * self.slice.vbar[i] - self.utility.conjugate(slope[i]) - self.source[i]).abs()
            })
            .collect()
    }

    /// `v̄(z̲)`.
    pub fn boundary_value(&self) -> f64 {
        self.slice.vbar[0]
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["xi", "vbar", "dvbar"]);
        t.comment(format!("theta1={:.16e}", self.theta1));
        t.comment(format!(
            "scheme={} n_xi={} xi_max={:.16e} xi_star={:.16e} iterations={}",
            self.scheme.name(),
            self.grid.len(),
            self.grid.end(),
            self.xi_star(),
            self.iterations()
        ));
        for i in 0..self.grid.len() {
            t.push_row(vec![self.grid.nodes()[i], self.slice.vbar[i], self.slice.dvbar[i]]);
        }
        t
    }
}

impl ValueFunction for ValueGrid {
    fn utility(&self) -> &PowerUtility {
        &self.utility
    }

    fn model(&self) -> &ReturnModel {
        &self.model
    }

    fn params(&self) -> &MarketParams {
        &self.params
    }

    fn theta1(&self) -> f64 {
        self.theta1
    }

    fn xi_star(&self) -> f64 {
        match self.sup {
            Some(s) => s.xi_star,
            None => {
                let r = value::ratio_sup(&self.grid, &self.slice, self.utility.gamma());
                if r.node == self.grid.len() - 1 || self.no_trade > r.value {
                    f64::INFINITY
                } else {
                    r.xi
                }
            }
        }
    }

    fn xi_grid(&self) -> &XiGrid {
        &self.grid
    }

    fn t_max(&self) -> Option<f64> {
        None
    }

    fn no_trade_coefficient(&self) -> f64 {
        self.no_trade
    }

    fn vbar_at(&self, _t: f64, xi: f64) -> Result<f64> {
        value::check_xi(&self.grid, xi)?;
        Ok(value::slice_value(&self.grid, &self.slice, self.utility.gamma(), xi))
    }

    fn dvbar_at(&self, _t: f64, xi: f64) -> Result<f64> {
        value::check_xi(&self.grid, xi)?;
        Ok(value::slice_slope(&self.grid, &self.slice, &self.utility, xi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::VhatKind;
    use approx::assert_relative_eq;

    fn demo_model() -> ReturnModel {
        ReturnModel::discrete(vec![-0.5, 0.2, 0.8], vec![0.1, 0.6, 0.3]).unwrap()
    }

    fn demo_params() -> MarketParams {
        MarketParams::new(0.8, 1.0).unwrap()
    }

    fn sqrt_u() -> PowerUtility {
        PowerUtility::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn closed_form_without_continuation_value() {
        let model = ReturnModel::discrete(vec![-0.5, 1.0], vec![0.5, 0.5]).unwrap();
        let params = MarketParams::new(0.2, 2.0).unwrap();
        let u = sqrt_u();
        let vg = solve_vbar(&model, &params, &u, 0.0, &GridConfig::default()).unwrap();
        let coef = (2.2f64 / 0.5).powf(-0.5);
        for (x, v) in vg.xi().iter().zip(vg.vbar()) {
            let exact = coef * (x - 0.5).sqrt();
            assert!((v - exact).abs() <= 1e-12 * (1.0 + exact), "{x}: {v} vs {exact}");
        }
        assert_relative_eq!(vg.vbar_at(0.0, 1.5).unwrap(), 0.476731, epsilon = 1e-6);
    }

    #[test]
    fn boundary_value_is_source_over_discount() {
        let model = demo_model();
        let params = demo_params();
        let u = sqrt_u();
        let vg = solve_vbar(&model, &params, &u, 1.0, &GridConfig::default()).unwrap();
        let g = crate::market::g_scaled(&model, &params, &u, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(vg.boundary_value(), g / params.discount());
    }

    #[test]
    fn fixed_point_demo_is_consistent() {
        let vg = fixed_point_theta1(
            &demo_model(),
            &demo_params(),
            &sqrt_u(),
            &GridConfig::default(),
            &FixedPointConfig::default(),
        )
        .unwrap();
        assert!(vg.theta1() > 0.0);
        assert!(vg.fixed_point_residual().unwrap() <= 1e-9);
        assert!(vg.residual() <= 1e-6, "residual {}", vg.residual());
        let xs = vg.xi_star();
        assert!(xs > 1.0 && xs < vg.xi_grid().end());
        // Discrete maximum over the nodes sits below the refined one.
        let disc = vg
            .xi()
            .iter()
            .zip(vg.vbar())
            .map(|(x, v)| x.powf(-0.5) * v)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(disc <= vg.sup_ratio().unwrap() + 1e-15);
        assert!((vg.theta1() - disc).abs() <= 1e-6 * vg.theta1());
    }

    #[test]
    fn plain_iteration_is_monotone() {
        let vg = fixed_point_theta1(
            &demo_model(),
            &demo_params(),
            &sqrt_u(),
            &GridConfig::with_n(256),
            &FixedPointConfig::plain(),
        )
        .unwrap();
        let h = vg.theta_history();
        assert!(h.len() > 5);
        assert!(h.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn shape_of_the_solution() {
        let vg = fixed_point_theta1(
            &demo_model(),
            &demo_params(),
            &sqrt_u(),
            &GridConfig::default(),
            &FixedPointConfig::default(),
        )
        .unwrap();
        let v = vg.vbar();
        let x = vg.xi();
        for i in 1..v.len() {
            assert!(v[i] > v[i - 1]);
        }
        for i in 1..v.len() - 1 {
            let left = (v[i] - v[i - 1]) / (x[i] - x[i - 1]);
            let right = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
            assert!(right - left <= 1e-8);
        }
        let d = vg.dvbar();
        assert!(d[1] >= 10.0 * d[d.len() - 1]);
        assert!(d[1..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn upwind_agrees_to_first_order() {
        let cfg = GridConfig {
            n: 400,
            xi_max: Some(20.0),
            first_step: 1e-5,
        };
        let (m, p, u) = (demo_model(), demo_params(), sqrt_u());
        let a = solve_vbar(&m, &p, &u, 1.4, &cfg).unwrap();
        let b = solve_vbar_with(&m, &p, &u, 1.4, &cfg, Scheme::upwind()).unwrap();
        assert!(b.march_residual().unwrap() < 1e-10);
        let err = a
            .vbar()
            .iter()
            .zip(b.vbar())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-2, "upwind deviation {err}");
    }

    #[test]
    fn vhat_scaling_and_floor() {
        let vg = fixed_point_theta1(
            &demo_model(),
            &demo_params(),
            &sqrt_u(),
            &GridConfig::default(),
            &FixedPointConfig::default(),
        )
        .unwrap();
        let (x, a, beta) = (3.0, 1.1, 2.7);
        let v1 = vg.vhat(0.0, x, a, VhatKind::Value).unwrap();
        let v2 = vg.vhat(0.0, beta * x, beta * a, VhatKind::Value).unwrap();
        assert!((v2 - beta.sqrt() * v1).abs() <= 1e-12 * v2);
        let floor = vg.vhat(0.0, a * 0.5, a, VhatKind::Value).unwrap();
        assert_relative_eq!(floor, a.sqrt() * vg.boundary_value(), max_relative = 1e-15);
        assert!(vg.vhat(0.0, 0.5, a, VhatKind::Value).is_err());
        assert!(vg.feedback_rate(0.0, 0.5 * a, a).unwrap() == 0.0);
    }

    #[test]
    fn rejects_time_dependent_law() {
        let bs = ReturnModel::black_scholes(0.4, 1.0).unwrap();
        let r = solve_vbar(&bs, &demo_params(), &sqrt_u(), 0.0, &GridConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
