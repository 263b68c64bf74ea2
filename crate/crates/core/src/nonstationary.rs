//! Time-dependent reduced value function.
//!
//! Solves `(ρ+λ) v̄ − ∂ₜv̄ − Ũ(∂_ξ v̄) − λθ₁ E[(ξ+Z_t)^γ] = 0` on
//! `[0, Tmax] × [z̲, Ξmax]` backward from a terminal slice in which the return
//! law is frozen at `Tmax`. Each time step is implicit (backward Euler for the
//! first, variable-step BDF2 afterwards) and solved exactly in `ξ` by the same
//! first-order transform as the stationary problem.
//!
//! The frozen terminal slice is not an exact solution, so a transient decaying
//! like `e^{−(ρ+λ)(Tmax−t)}` starts at `Tmax`. Steps are graded geometrically
//! from `terminal_step` and kept below `dt·exp((ρ+λ)(τ − L)/2)` in the
//! time-to-go `τ`, with layer length `L = 4/(ρ+λ)`, so the local error of the
//! transient stays near the level of the coarse steps far from `Tmax`.

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, XiGrid};
use crate::market::{validate_assumptions, AssumptionFlag, MarketParams, ReturnModel};
use crate::reduced::{self, KernelTable, Memory, Slice, StepProblem};
use crate::stationary::{evaluate_sup, iterate_theta_from, FixedPointConfig, SupOutcome, WarmStart};
use crate::utility::{PowerUtility, UtilityFn};
use crate::value::{self, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    pub grid: GridConfig,
    /// Time step away from the terminal layer.
    pub dt: f64,
    /// Horizon; `None` means `ceil(18.5 / (ρ+λ))`.
    pub t_max: Option<f64>,
    /// First step below `Tmax`; later steps grow by at most 10 % each.
    pub terminal_step: f64,
}

/// Ratio of the warm-up time step to the requested one in the `θ₁` iteration.
const COARSE_FACTOR: f64 = 5.0;

/// Growth factor between consecutive terminal-layer steps.
const STEP_GROWTH: f64 = 1.1;

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            dt: 0.01,
            t_max: None,
            terminal_step: 1e-5,
        }
    }
}

impl SurfaceConfig {
    pub fn resolved_t_max(&self, params: &MarketParams) -> f64 {
        self.t_max.unwrap_or_else(|| (18.5 / params.discount()).ceil())
    }

    /// Time nodes from 0 to `Tmax`, fine near `Tmax`.
    pub fn time_nodes(&self, params: &MarketParams) -> Result<Vec<f64>> {
        let t_max = self.resolved_t_max(params);
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::config(format!("Tmax must be positive, got {t_max}")));
        }
        if !(self.dt > 0.0 && self.dt <= t_max) {
            return Err(Error::config(format!(
                "time step must lie in (0, Tmax], got {}",
                self.dt
            )));
        }
        if !(self.terminal_step > 0.0) {
            return Err(Error::config(format!(
                "terminal step must be positive, got {}",
                self.terminal_step
            )));
        }
        let r = params.discount();
        let layer = 4.0 / r;
        let mut tau = vec![0.0];
        let mut h = self.terminal_step.min(self.dt);
        loop {
            let last = tau[tau.len() - 1];
            let cap = self.dt * (0.5 * r * (last - layer)).exp().min(1.0);
            h = (h * STEP_GROWTH)
                .min(cap)
                .min(self.dt)
                .max(self.terminal_step.min(self.dt));
            if t_max - last <= 2.0 * h {
                // Two equal closing steps keep the ratio to the previous step bounded.
                tau.push(0.5 * (last + t_max));
                tau.push(t_max);
                break;
            }
            tau.push(last + h);
        }
        let mut t: Vec<f64> = tau.iter().rev().map(|s| t_max - s).collect();
        t[0] = 0.0;
        Ok(t)
    }
}

/// Kernel tables along the time grid, shared by all `θ₁` iterates.
struct Tables {
    grid: XiGrid,
    t: Vec<f64>,
    kernels: Vec<KernelTable>,
    stationary: bool,
}

impl Tables {
    fn build(model: &ReturnModel, params: &MarketParams, u: &PowerUtility, cfg: &SurfaceConfig) -> Result<Self> {
        let t = cfg.time_nodes(params)?;
        let t_max = t[t.len() - 1];
        let (_, b) = model.growth_constants();
        let net = params.discount() - b * u.gamma();
        if !(net > 0.0) {
            return Err(Error::config(format!(
                "net discount rho + lambda - b*gamma = {net} must be positive"
            )));
        }
        let tail = (-params.discount() * t_max).exp();
        if tail > 1e-8 {
            log::warn!("exp(-(rho+lambda) Tmax) = {tail:e} exceeds 1e-8; consider a longer horizon");
        }
        let grid = cfg.grid.build(model.zlow())?;
        let stationary = model.is_stationary();
        let kernels = if stationary {
            vec![KernelTable::build(model, 0.0, &grid, u.gamma())?]
        } else {
            t.iter()
                .map(|&tj| KernelTable::build(model, tj, &grid, u.gamma()))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            grid,
            t,
            kernels,
            stationary,
        })
    }

    fn kernel(&self, j: usize) -> &KernelTable {
        if self.stationary {
            &self.kernels[0]
        } else {
            &self.kernels[j]
        }
    }

    fn march(&self, u: &PowerUtility, params: &MarketParams, theta1: f64) -> Result<Vec<Slice>> {
        let steps = self.t.len() - 1;
        let r = params.discount();
        let g_scale = params.lambda() * theta1;
        let mut slices: Vec<Option<Slice>> = vec![None; steps + 1];
        let terminal = StepProblem {
            r,
            g_scale,
            kernel: self.kernel(steps),
            memory: &[],
        };
        slices[steps] = Some(reduced::solve_step(&self.grid, u, &terminal)?);
        for j in (0..steps).rev() {
            let next = slices[j + 1].as_ref().expect("later slice solved");
            let h = self.t[j + 1] - self.t[j];
            let slice = if j + 1 == steps {
                let memory = [Memory {
                    beta: 1.0 / h,
                    slice: next,
                }];
                let prob = StepProblem {
                    r: r + 1.0 / h,
                    g_scale,
                    kernel: self.kernel(j),
                    memory: &memory,
                };
                reduced::solve_step(&self.grid, u, &prob)
            } else {
                let after = slices[j + 2].as_ref().expect("later slice solved");
                let w = h / (self.t[j + 2] - self.t[j + 1]);
                let memory = [
                    Memory {
                        beta: (1.0 + w) / h,
                        slice: next,
                    },
                    Memory {
                        beta: -w * w / ((1.0 + w) * h),
                        slice: after,
                    },
                ];
                let prob = StepProblem {
                    r: r + (1.0 + 2.0 * w) / ((1.0 + w) * h),
                    g_scale,
                    kernel: self.kernel(j),
                    memory: &memory,
                };
                reduced::solve_step(&self.grid, u, &prob)
            }
            .map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("{m} (time step at t = {})", self.t[j])),
                other => other,
            })?;
            slices[j] = Some(slice);
        }
        Ok(slices.into_iter().map(|s| s.expect("all slices solved")).collect())
    }
}

/// Reduced value function on a `(t, ξ)` grid.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    grid: XiGrid,
    t: Vec<f64>,
    slices: Vec<Slice>,
    power: Vec<Vec<f64>>,
    theta1: f64,
    sup: SupOutcome,
    model: ReturnModel,
    params: MarketParams,
    utility: PowerUtility,
    history: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    tables: Tables,
    slices: Vec<Slice>,
    sup: SupOutcome,
    theta1: f64,
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    history: Vec<f64>,
) -> ValueSurface {
    let power = if tables.stationary {
        vec![tables.kernels[0].power.clone()]
    } else {
        tables.kernels.iter().map(|k| k.power.clone()).collect()
    };
    ValueSurface {
        grid: tables.grid,
        t: tables.t,
        slices,
        power,
        theta1,
        sup,
        model: model.clone(),
        params: *params,
        utility: *u,
        history,
    }
}

/// Solve the time-dependent reduced equation for a given `θ₁`.
pub fn solve_surface(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    theta1: f64,
    cfg: &SurfaceConfig,
) -> Result<ValueSurface> {
    if !(theta1 >= 0.0 && theta1.is_finite()) {
        return Err(Error::domain(format!("theta1 must be nonnegative, got {theta1}")));
    }
    let tables = Tables::build(model, params, u, cfg)?;
    let slices = tables.march(u, params, theta1)?;
    let sup = match evaluate_sup(&tables.grid, &slices[0], u, params, theta1) {
        Ok(s) => s,
        Err(Error::ArgmaxAtEdge { .. }) => {
            let r = value::ratio_sup(&tables.grid, &slices[0], u.gamma());
            SupOutcome {
                value: r.value,
                xi_star: f64::NAN,
                tied: r.tied,
                no_trade: reduced::no_trade_coefficient(u, params.discount(), params.lambda() * theta1),
            }
        }
        Err(e) => return Err(e),
    };
    Ok(finish(tables, slices, sup, theta1, model, params, u, Vec::new()))
}

/// Iterate `θ₁ = sup_ξ ξ^{-γ} v̄(0, ξ)` from `θ₁ = 0`. With acceleration on,
/// the iteration first converges with time steps five times larger and
/// continues on the requested grid from there; the history holds both legs.
pub fn fixed_point_theta1_ns(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    cfg: &SurfaceConfig,
    fp: &FixedPointConfig,
) -> Result<ValueSurface> {
    let report = validate_assumptions(model, params, u);
    if report.flag == AssumptionFlag::Fail {
        log::warn!(
            "growth condition fails (rho = {}, rhs = {}); iterating anyway",
            report.rho,
            report.rhs
        );
    }
    let run = |tables: &Tables, warm: Option<WarmStart>| {
        iterate_theta_from(fp, warm, |theta| {
            let slices = tables.march(u, params, theta)?;
            let out = evaluate_sup(&tables.grid, &slices[0], u, params, theta)?;
            Ok((out, slices))
        })
    };
    // Most iterations happen on a grid with coarser time steps; the fine grid
    // then only corrects the last digits.
    let coarse_cfg = SurfaceConfig {
        dt: COARSE_FACTOR * cfg.dt,
        ..*cfg
    };
    let mut history = Vec::new();
    let mut warm = None;
    if fp.accelerate && coarse_cfg.dt <= 0.25 * cfg.resolved_t_max(params) {
        let coarse = run(&Tables::build(model, params, u, &coarse_cfg)?, None)?;
        history = coarse.history;
        history.pop();
        warm = Some(WarmStart {
            theta: coarse.theta,
            slope: coarse.slope,
        });
    }
    let tables = Tables::build(model, params, u, cfg)?;
    let fine = run(&tables, warm)?;
    history.extend(fine.history);
    let (theta1, sup, slices) = (fine.theta, fine.out, fine.state);
    if sup.tied {
        log::warn!("ratio xi^-gamma vbar(0, .) has several near-equal maxima; the smallest xi was kept");
    }
    Ok(finish(tables, slices, sup, theta1, model, params, u, history))
}

impl ValueSurface {
    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn xi(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Largest time step.
    pub fn dt(&self) -> f64 {
        self.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn vbar_slice(&self, j: usize) -> &[f64] {
        &self.slices[j].vbar
    }

    pub fn dvbar_slice(&self, j: usize) -> &[f64] {
        &self.slices[j].dvbar
    }

    pub fn theta_history(&self) -> &[f64] {
        &self.history
    }

    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    pub fn argmax_tied(&self) -> bool {
        self.sup.tied
    }

    pub fn sup_ratio(&self) -> f64 {
        self.sup.value
    }

    pub fn fixed_point_residual(&self) -> f64 {
        (self.sup.value - self.theta1).abs() / self.theta1.max(f64::MIN_POSITIVE)
    }

    /// Largest `sup_ξ ξ^{-γ} v̄(t, ξ)` over all slices.
    pub fn max_ratio_over_time(&self) -> f64 {
        let gamma = self.utility.gamma();
        self.slices
            .iter()
            .map(|s| value::ratio_sup(&self.grid, s, gamma).value)
            .fold(self.sup.no_trade, f64::max)
    }

    fn power_at(&self, j: usize) -> &[f64] {
        if self.power.len() == 1 {
            &self.power[0]
        } else {
            &self.power[j]
        }
    }

    /// Sup-norm of the space-time residual on interior nodes; `∂ₜ` by
    /// three-point differences, `∂_ξ` by finite differences of the stored values.
    pub fn residual(&self) -> f64 {
        self.residual_location().0
    }

    /// Largest residual with the `(t, ξ)` node where it occurs.
    pub fn residual_location(&self) -> (f64, f64, f64) {
        let mut worst = (0.0, 0.0, 0.0);
        for j in 1..self.t.len() - 1 {
            let (res, xi) = self.residual_slice(j);
            if res > worst.0 {
                worst = (res, self.t[j], xi);
            }
        }
        worst
    }

    /// Largest residual over `ξ` at each interior time node.
    pub fn residual_profile(&self) -> Vec<(f64, f64)> {
        (1..self.t.len() - 1)
            .map(|j| (self.t[j], self.residual_slice(j).0))
            .collect()
    }

    fn residual_slice(&self, j: usize) -> (f64, f64) {
        let r = self.params.discount();
        let lt = self.params.lambda() * self.theta1;
        let gamma = self.utility.gamma();
        let x = self.grid.nodes();
        let h1 = self.t[j] - self.t[j - 1];
        let h2 = self.t[j + 1] - self.t[j];
        let (wa, wb, wc) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        let v = &self.slices[j].vbar;
        let slope = reduced::fd_slope(x, v, gamma);
        let p = self.power_at(j);
        let mut worst = (0.0, 0.0);
        for i in 1..x.len() - 1 {
            let vt = wa * self.slices[j - 1].vbar[i] + wb * v[i] + wc * self.slices[j + 1].vbar[i];
            let res = if slope[i] > 0.0 {
                (r * v[i] - vt - self.utility.conjugate(slope[i]) - lt * p[i]).abs()
            } else {
                f64::INFINITY
            };
            if res > worst.0 {
                worst = (res, x[i]);
            }
        }
        worst
    }

    /// `v̄(t, z̲)` at each time node.
    pub fn boundary_slice(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.vbar[0]).collect()
    }

    /// Long-format table `t,xi,vbar,dvbar_dxi`, keeping every `stride`-th time node.
    pub fn to_csv(&self, stride: usize) -> CsvTable {
        let stride = stride.max(1);
        let mut t = CsvTable::new(["t", "xi", "vbar", "dvbar_dxi"]);
        t.comment(format!("theta1={:.16e}", self.theta1));
        t.comment(format!(
            "n_xi={} n_t={} xi_max={:.16e} t_max={:.16e} dt={:.16e} xi_star={:.16e} iterations={}",
            self.grid.len(),
            self.t.len(),
            self.grid.end(),
            self.t[self.t.len() - 1],
            self.dt(),
            self.sup.xi_star,
            self.iterations()
        ));
        let last = self.t.len() - 1;
        for j in (0..=last).filter(|j| j % stride == 0 || *j == last) {
            for i in 0..self.grid.len() {
                t.push_row(vec![
                    self.t[j],
                    self.grid.nodes()[i],
                    self.slices[j].vbar[i],
                    self.slices[j].dvbar[i],
                ]);
            }
        }
        t
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let last = self.t.len() - 1;
        let t_max = self.t[last];
        if !(t >= 0.0) || t > t_max * (1.0 + 1e-12) {
            return Err(Error::domain(format!("time {t} outside the solved range [0, {t_max}]")));
        }
        let j = self.t.partition_point(|&s| s <= t).saturating_sub(1).min(last - 1);
        let w = ((t - self.t[j]) / (self.t[j + 1] - self.t[j])).clamp(0.0, 1.0);
        Ok((j, w))
    }
}

impl ValueFunction for ValueSurface {
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
        self.sup.xi_star
    }

    fn xi_grid(&self) -> &XiGrid {
        &self.grid
    }

    fn t_max(&self) -> Option<f64> {
        Some(self.t[self.t.len() - 1])
    }

    fn no_trade_coefficient(&self) -> f64 {
        self.sup.no_trade
    }

    fn vbar_at(&self, t: f64, xi: f64) -> Result<f64> {
        value::check_xi(&self.grid, xi)?;
        let (j, w) = self.bracket(t)?;
        let gamma = self.utility.gamma();
        let a = value::slice_value(&self.grid, &self.slices[j], gamma, xi);
        let b = value::slice_value(&self.grid, &self.slices[j + 1], gamma, xi);
        Ok((1.0 - w) * a + w * b)
    }

    fn dvbar_at(&self, t: f64, xi: f64) -> Result<f64> {
        value::check_xi(&self.grid, xi)?;
        let (j, w) = self.bracket(t)?;
        if xi <= self.grid.start() {
            return Ok(f64::INFINITY);
        }
        let a = value::slice_q(&self.grid, &self.slices[j], self.utility.gamma(), xi);
        let b = value::slice_q(&self.grid, &self.slices[j + 1], self.utility.gamma(), xi);
        Ok(value::slope_from_q(&self.utility, (1.0 - w) * a + w * b))
    }
}
