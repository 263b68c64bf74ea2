//! Optimal wealth and consumption between two trading dates.
//!
//! With `c = −Y′` the Euler–Lagrange equation for power utility reads
//!
//! ```text
//! Y″ = (ρ+λ) c / (1−γ) − c^{2−γ} g_x(s, Y) / (K₁ γ (1−γ)),
//! g_x(s, x) = λ θ₁ γ E[(x + a Z_s)^{γ−1}],
//! Y(0) = x₀,   Y(∞) = l(a).
//! ```
//!
//! It is solved by shooting on the initial rate `c(0)` with bisection. The
//! path is a saddle, so rounding in `c(0)` grows exponentially and one
//! bisection cannot cover the whole horizon; once the last too-small and
//! too-large trials drift apart, shooting restarts from the last node where
//! they still agree. Integration is classical RK4 on a fixed lattice and stops
//! when the wealth comes within `ε_stop` of the floor. A trial stopped there
//! is judged against the decay rate `κ` of the saddle at the floor,
//! `c ≈ κ (Y − l(a))`, with `(1−γ)κ + λθ₁ π κ^{1−γ}/K₁ = ρ+λ` and `π` the
//! probability of the return that sends the wealth to the floor. Judging by
//! the band alone would bias the path towards trials that level off just at
//! `ε_stop`.

use std::cell::OnceCell;

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::hermite;
use crate::market::{MarketParams, ReturnModel};
use crate::utility::{PowerUtility, UtilityFn};
use crate::value::{ValueFunction, VhatKind};

/// `Y″` from the general form `(g_x − (ρ+λ) U′(c)) / U″(c)`.
pub fn ode_rhs<U: UtilityFn + ?Sized>(u: &U, discount: f64, gx: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("consumption rate must be positive, got {c}")));
    }
    Ok((gx - discount * u.marginal(c)) / u.curvature(c))
}

/// `Y″` from the power form `(ρ+λ) c/(1−γ) − c^{2−γ} g_x / (K₁γ(1−γ))`.
pub fn ode_rhs_power(u: &PowerUtility, discount: f64, gx: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("consumption rate must be positive, got {c}")));
    }
    let g = u.gamma();
    Ok(discount * c / (1.0 - g) - c.powf(2.0 - g) * gx / (u.k1() * g * (1.0 - g)))
}

/// Wealth path without investment opportunities:
/// `Y⁰_s = x₀ − (x₀ − l(a))(1 − e^{−(ρ+λ)s/(1−γ)})`.
pub fn baseline_y0(
    x0: f64,
    a: f64,
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    s: f64,
) -> Result<f64> {
    let floor = model.l_bound(a)?;
    Ok(baseline_from_floor(x0, floor, params.discount() / (1.0 - u.gamma()), s))
}

fn baseline_from_floor(x0: f64, floor: f64, rate: f64, s: f64) -> f64 {
    floor + (x0 - floor) * (-rate * s).exp()
}

/// `g_x(s, x)` for one allocation, with the quadrature laws cached on the
/// half-step lattice of the integrator.
pub struct MarginalContinuation {
    model: ReturnModel,
    a: f64,
    gamma: f64,
    scale: f64,
    half_step: f64,
    laws: Vec<OnceCell<(Vec<f64>, Vec<f64>)>>,
}

impl MarginalContinuation {
    pub fn new(model: &ReturnModel, params: &MarketParams, u: &PowerUtility, theta1: f64, a: f64) -> Self {
        Self::with_lattice(model, params, u, theta1, a, 0.0, 0)
    }

    fn with_lattice(
        model: &ReturnModel,
        params: &MarketParams,
        u: &PowerUtility,
        theta1: f64,
        a: f64,
        half_step: f64,
        half_steps: usize,
    ) -> Self {
        let slots = if model.is_stationary() { 1 } else { half_steps + 1 };
        Self {
            model: model.clone(),
            a,
            gamma: u.gamma(),
            scale: params.lambda() * theta1 * u.gamma(),
            half_step,
            laws: (0..slots).map(|_| OnceCell::new()).collect(),
        }
    }

    fn law(&self, s: f64) -> std::borrow::Cow<'_, (Vec<f64>, Vec<f64>)> {
        use std::borrow::Cow;
        if self.model.is_stationary() {
            return Cow::Borrowed(self.laws[0].get_or_init(|| self.model.growth_law(0.0)));
        }
        if self.half_step > 0.0 {
            let k = (s / self.half_step).round();
            if k >= 0.0 && (k as usize) < self.laws.len() && (s - k * self.half_step).abs() <= 1e-9 * self.half_step {
                let k = k as usize;
                return Cow::Borrowed(self.laws[k].get_or_init(|| self.model.growth_law(k as f64 * self.half_step)));
            }
        }
        Cow::Owned(self.model.growth_law(s))
    }

    /// Probability of the return that maps wealth `floor` to zero.
    fn floor_atom(&self, floor: f64) -> f64 {
        if self.a == 0.0 || !self.model.is_stationary() {
            return 0.0;
        }
        let law = self.law(0.0);
        law.0
            .iter()
            .zip(&law.1)
            .filter(|(&g, _)| (self.a * (g - 1.0) + floor).abs() <= 1e-12 * self.a.abs().max(1.0))
            .map(|(_, &w)| w)
            .sum()
    }

    /// `g_x(s, l(a))` without the atom that reaches the floor.
    fn regular_at_floor(&self, s: f64, floor: f64) -> f64 {
        if self.scale == 0.0 || self.a == 0.0 {
            return 0.0;
        }
        let law = self.law(s);
        let tol = 1e-12 * self.a.abs().max(1.0);
        self.scale
            * law
                .0
                .iter()
                .zip(&law.1)
                .map(|(&g, &w)| (floor - self.a + self.a * g, w))
                .filter(|&(base, _)| base > tol)
                .map(|(base, w)| w * base.powf(self.gamma - 1.0))
                .sum::<f64>()
    }

    /// `λθ₁γ E[(x + aZ_s)^{γ−1}]`; infinite at and below the floor.
    pub fn eval(&self, s: f64, x: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        if self.a == 0.0 {
            return if x > 0.0 {
                self.scale * x.powf(self.gamma - 1.0)
            } else {
                f64::INFINITY
            };
        }
        let law = self.law(s);
        let (growth, weights) = (&law.0, &law.1);
        let shift = x - self.a;
        let mut acc = 0.0;
        for (&g, &w) in growth.iter().zip(weights) {
            let base = shift + self.a * g;
            if !(base > 0.0) {
                return f64::INFINITY;
            }
            acc += w * base.powf(self.gamma - 1.0);
        }
        self.scale * acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    /// Lattice step in `s`.
    pub step: f64,
    /// `None` starts from the horizon of a time-dependent value function, or
    /// `ceil(18.5/(ρ+λ))` for stationary ones, and doubles it while wealth
    /// has not reached the floor.
    pub horizon: Option<f64>,
    /// Integration stops once `Y − l(a) ≤ stop_frac · (x₀ − l(a))`.
    pub stop_frac: f64,
    /// Rates below `rate_floor_frac` times the top of the initial bracket
    /// count as zero.
    pub rate_floor_frac: f64,
    /// The initial bracket is `[0, bracket_factor · (x₀−l(a))(ρ+λ)/(1−γ)]`.
    pub bracket_factor: f64,
    /// Relative distance at which the two bracketing trials count as apart.
    pub agree_tol: f64,
    /// Accepted distance `Y(horizon) − l(a)` relative to `x₀ − l(a)`.
    pub path_tol: f64,
    pub max_bisections: usize,
    pub max_segments: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            step: 0.005,
            horizon: None,
            stop_frac: 1e-8,
            rate_floor_frac: 1e-10,
            bracket_factor: 2.0,
            agree_tol: 1e-12,
            path_tol: 1e-6,
            max_bisections: 200,
            max_segments: 200,
        }
    }
}

/// How a returned path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathClass {
    /// Wealth reached the floor band, or the horizon within `path_tol`.
    Converged,
    /// Wealth hit the floor while still consuming (rate too high).
    HitFloor,
    /// Consumption died out with wealth left above the floor (rate too low).
    Flattened,
}

impl std::fmt::Display for PathClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PathClass::Converged => "converged",
            PathClass::HitFloor => "hit_floor",
            PathClass::Flattened => "flattened",
        })
    }
}

/// One shooting trial: the rate tried and its verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub segment: usize,
    pub rate: f64,
    pub class: PathClass,
}

#[derive(Debug, Clone)]
pub struct ConsumptionPath {
    a: f64,
    x0: f64,
    floor: f64,
    theta1: f64,
    s: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
    dc: Vec<f64>,
    class: PathClass,
    horizon: f64,
    utility: PowerUtility,
    discount: f64,
    trials: Vec<Trial>,
    segments: usize,
}

struct Run {
    y: Vec<f64>,
    c: Vec<f64>,
    class: PathClass,
    /// Ended inside the floor band rather than at the horizon.
    banded: bool,
}

struct Shooter<'a> {
    u: &'a PowerUtility,
    gx: MarginalContinuation,
    floor: f64,
    step: f64,
    nodes: usize,
    /// `(ρ+λ)/(1−γ)`.
    rate: f64,
    curv: f64,
    eps_stop: f64,
    path_tol: f64,
    c_floor: f64,
    /// Saddle decay rate at the floor.
    kappa: f64,
    /// Atom term `λθ₁π/(K₁(1−γ))` of the floor expansion.
    atom_term: f64,
}

impl Shooter<'_> {
    /// Saddle rate at time `s` and distance `w` above the floor, to second
    /// order: `c = κ w + β(s) w^{2−γ}`.
    fn saddle_rate(&self, s: f64, w: f64) -> f64 {
        let g = self.u.gamma();
        let regular = self.gx.regular_at_floor(s, self.floor) / self.curv;
        let k = self.kappa;
        let beta = -k.powf(1.0 - g) * regular / ((2.0 - g) + (1.0 - g) * k.powf(-g) * self.atom_term);
        k * w + beta * w.powf(2.0 - g)
    }

    fn judge(&self, s: f64, w: f64, c: f64) -> PathClass {
        if c > self.saddle_rate(s, w) {
            PathClass::HitFloor
        } else {
            PathClass::Flattened
        }
    }

    fn deriv(&self, s: f64, y: f64, c: f64) -> std::result::Result<(f64, f64), PathClass> {
        if !(y > self.floor) {
            return Err(PathClass::HitFloor);
        }
        if !(c > 0.0) {
            return Err(PathClass::Flattened);
        }
        let g = self.u.gamma();
        let gx = self.gx.eval(s, y);
        let ypp = self.rate * c - c.powf(2.0 - g) * gx / self.curv;
        if !ypp.is_finite() {
            return Err(PathClass::HitFloor);
        }
        Ok((-c, -ypp))
    }

    fn run(&self, k0: usize, y0: f64, c0: f64) -> Run {
        let mut y = vec![y0];
        let mut c = vec![c0];
        let h = self.step;
        let last = self.nodes - 1;
        let mut k = k0;
        loop {
            let (yk, ck) = (y[y.len() - 1], c[c.len() - 1]);
            let gap = yk - self.floor;
            let s = k as f64 * h;
            if gap <= self.eps_stop {
                let class = if ck <= self.c_floor {
                    PathClass::Converged
                } else {
                    self.judge(s, gap, ck)
                };
                return Run {
                    y,
                    c,
                    class,
                    banded: true,
                };
            }
            if ck <= self.c_floor {
                return Run {
                    y,
                    c,
                    class: PathClass::Flattened,
                    banded: false,
                };
            }
            if k == last {
                let class = self.judge(s, gap, ck);
                return Run {
                    y,
                    c,
                    class,
                    banded: false,
                };
            }
            let step = || -> std::result::Result<(f64, f64), PathClass> {
                let k1 = self.deriv(s, yk, ck)?;
                let k2 = self.deriv(s + 0.5 * h, yk + 0.5 * h * k1.0, ck + 0.5 * h * k1.1)?;
                let k3 = self.deriv(s + 0.5 * h, yk + 0.5 * h * k2.0, ck + 0.5 * h * k2.1)?;
                let k4 = self.deriv(s + h, yk + h * k3.0, ck + h * k3.1)?;
                Ok((
                    yk + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    ck + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                ))
            };
            match step() {
                Ok((yn, cn)) => {
                    if !(yn > self.floor) {
                        return Run {
                            y,
                            c,
                            class: PathClass::HitFloor,
                            banded: false,
                        };
                    }
                    if !(cn > 0.0) {
                        return Run {
                            y,
                            c,
                            class: PathClass::Flattened,
                            banded: false,
                        };
                    }
                    y.push(yn);
                    c.push(cn);
                }
                Err(class) => {
                    return Run {
                        y,
                        c,
                        class,
                        banded: false,
                    }
                }
            }
            k += 1;
        }
    }
}

/// Root of `(1−γ)κ + m κ^{1−γ} = r` in `(0, r/(1−γ)]`.
fn floor_decay_rate(r: f64, gamma: f64, m: f64) -> f64 {
    let f = |k: f64| (1.0 - gamma) * k + m * k.powf(1.0 - gamma) - r;
    let (mut lo, mut hi) = (0.0, r / (1.0 - gamma));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Euler–Lagrange path for a given `θ₁`, without reference to a solved value
/// function. `horizon` is the last time covered by the lattice.
#[allow(clippy::too_many_arguments)]
pub fn solve_path(
    model: &ReturnModel,
    params: &MarketParams,
    u: &PowerUtility,
    theta1: f64,
    x0: f64,
    a: f64,
    horizon: f64,
    cfg: &ShootingConfig,
) -> Result<ConsumptionPath> {
    let floor = model.l_bound(a)?;
    if !(x0 > floor) {
        return Err(Error::domain(format!(
            "initial wealth {x0} must exceed the floor l(a) = {floor}"
        )));
    }
    if !(theta1 >= 0.0 && theta1.is_finite()) {
        return Err(Error::domain(format!("theta1 must be nonnegative, got {theta1}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("horizon must be positive, got {horizon}")));
    }
    if !(cfg.step > 0.0 && cfg.step < horizon) {
        return Err(Error::config(format!(
            "lattice step must lie in (0, horizon), got {}",
            cfg.step
        )));
    }
    if !(cfg.bracket_factor >= 1.0) {
        return Err(Error::config("bracket factor must be at least 1"));
    }
    let steps = (horizon / cfg.step).ceil() as usize;
    let h = horizon / steps as f64;
    let gamma = u.gamma();
    let rate = params.discount() / (1.0 - gamma);
    let width = x0 - floor;
    let top = cfg.bracket_factor * width * rate;
    let gx = MarginalContinuation::with_lattice(model, params, u, theta1, a, 0.5 * h, 2 * steps);
    let atom = params.lambda() * theta1 * gx.floor_atom(floor) / u.k1();
    let kappa = floor_decay_rate(params.discount(), gamma, atom);
    let shooter = Shooter {
        u,
        gx,
        floor,
        step: h,
        nodes: steps + 1,
        rate,
        curv: u.k1() * gamma * (1.0 - gamma),
        eps_stop: cfg.stop_frac * width,
        path_tol: cfg.path_tol * width,
        c_floor: cfg.rate_floor_frac * top,
        kappa,
        atom_term: atom / (1.0 - gamma),
    };

    let mut y = vec![x0];
    let mut c: Vec<f64> = Vec::new();
    let mut trials = Vec::new();
    let mut k0 = 0;
    let mut class = PathClass::Flattened;
    for segment in 0..cfg.max_segments {
        let y_start = y[y.len() - 1];
        let seg_top = cfg.bracket_factor * (y_start - floor) * rate;
        let mut lo = (0.0, None::<Run>);
        let mut hi = (seg_top, None::<Run>);
        let first = shooter.run(k0, y_start, seg_top);
        trials.push(Trial {
            segment,
            rate: seg_top,
            class: first.class,
        });
        if first.class != PathClass::HitFloor {
            return Err(Error::Horizon {
                horizon,
                gap: first.y[first.y.len() - 1] - floor,
            });
        }
        hi.1 = Some(first);
        let mut accepted = None;
        for _ in 0..cfg.max_bisections {
            let mid = 0.5 * (lo.0 + hi.0);
            if !(mid > lo.0 && mid < hi.0) {
                break;
            }
            let run = shooter.run(k0, y_start, mid);
            trials.push(Trial {
                segment,
                rate: mid,
                class: run.class,
            });
            match run.class {
                PathClass::HitFloor => hi = (mid, Some(run)),
                PathClass::Flattened => lo = (mid, Some(run)),
                PathClass::Converged => {
                    accepted = Some(run);
                    break;
                }
            }
        }
        let (keep, done) = match accepted {
            Some(run) => {
                let n = run.y.len();
                (run, n)
            }
            None => {
                let hi_run = hi.1.expect("top trial recorded");
                let Some(lo_run) = lo.1 else {
                    return Err(Error::NonConvergence {
                        what: "shooting never produced a too-small trial".into(),
                        iterations: cfg.max_bisections,
                        residual: hi.0,
                    });
                };
                let common = hi_run.y.len().min(lo_run.y.len());
                let scale_c = hi_run.c[0];
                let mut agree = 0;
                while agree < common {
                    let i = agree;
                    let dy = (hi_run.y[i] - lo_run.y[i]).abs();
                    let dc = (hi_run.c[i] - lo_run.c[i]).abs();
                    if dy > cfg.agree_tol * width || dc > cfg.agree_tol * hi_run.c[i].max(cfg.agree_tol * scale_c) {
                        break;
                    }
                    agree += 1;
                }
                let whole = agree + 1 >= hi_run.y.len();
                let end_gap = hi_run.y[hi_run.y.len() - 1] - floor;
                if whole && (hi_run.banded || end_gap <= shooter.path_tol) {
                    class = PathClass::Converged;
                    let n = hi_run.y.len();
                    (Run { banded: true, ..hi_run }, n)
                } else if whole {
                    return Err(Error::Horizon { horizon, gap: end_gap });
                } else if agree < 2 {
                    return Err(Error::NonConvergence {
                        what: format!("shooting made no progress at s = {}", k0 as f64 * h),
                        iterations: trials.len(),
                        residual: (hi.0 - lo.0) / hi.0,
                    });
                } else {
                    class = hi_run.class;
                    (hi_run, agree)
                }
            }
        };
        // The first node of a segment repeats the last accepted one.
        if c.is_empty() {
            c.push(keep.c[0]);
        } else {
            let last = c.len() - 1;
            c[last] = keep.c[0];
        }
        y.extend_from_slice(&keep.y[1..done]);
        c.extend_from_slice(&keep.c[1..done]);
        let finished = keep.class == PathClass::Converged && done == keep.y.len();
        if finished || (keep.banded && done == keep.y.len()) {
            class = PathClass::Converged;
            let s: Vec<f64> = (0..y.len()).map(|k| k as f64 * h).collect();
            let dc = s
                .iter()
                .zip(y.iter().zip(&c))
                .map(|(&sk, (&yk, &ck))| {
                    shooter
                        .deriv(sk, yk.max(floor + f64::MIN_POSITIVE), ck)
                        .map_or(0.0, |d| d.1)
                })
                .collect();
            return Ok(ConsumptionPath {
                a,
                x0,
                floor,
                theta1,
                s,
                y,
                c,
                dc,
                class,
                horizon,
                utility: *u,
                discount: params.discount(),
                trials,
                segments: segment + 1,
            });
        }
        k0 += done - 1;
        if k0 >= steps {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: format!("shooting did not reach the floor (last class {class})"),
        iterations: cfg.max_segments,
        residual: (y[y.len() - 1] - floor) / width,
    })
}

const AUTO_HORIZON_DOUBLINGS: usize = 3;

const CROSSING_TIE: f64 = 1e-7;

/// Euler–Lagrange path using the `θ₁` and data of a solved value function.
/// Diagnostics against `value` cover the nodes up to its last time.
pub fn solve_bvp<V: ValueFunction + ?Sized>(
    value: &V,
    x0: f64,
    a: f64,
    cfg: &ShootingConfig,
) -> Result<ConsumptionPath> {
    let params = value.params();
    let solve = |horizon| {
        solve_path(
            value.model(),
            params,
            value.utility(),
            value.theta1(),
            x0,
            a,
            horizon,
            cfg,
        )
    };
    if let Some(horizon) = cfg.horizon {
        return solve(horizon);
    }
    let mut horizon = value.t_max().unwrap_or_else(|| (18.5 / params.discount()).ceil());
    for _ in 0..AUTO_HORIZON_DOUBLINGS {
        match solve(horizon) {
            Err(Error::Horizon { .. }) => horizon *= 2.0,
            other => return other,
        }
    }
    solve(horizon)
}

impl ConsumptionPath {
    pub fn allocation(&self) -> f64 {
        self.a
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// `l(a)`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn wealth(&self) -> &[f64] {
        &self.y
    }

    pub fn rate(&self) -> &[f64] {
        &self.c
    }

    pub fn initial_rate(&self) -> f64 {
        self.c[0]
    }

    pub fn class(&self) -> PathClass {
        self.class
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Time at which the path enters the floor band.
    pub fn end_time(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Costate `p = U′(c)`.
    pub fn costate(&self) -> Vec<f64> {
        self.c.iter().map(|&c| self.utility.marginal(c)).collect()
    }

    /// `Y⁰` at the path nodes.
    pub fn baseline(&self) -> Vec<f64> {
        let rate = self.discount / (1.0 - self.utility.gamma());
        self.s
            .iter()
            .map(|&s| baseline_from_floor(self.x0, self.floor, rate, s))
            .collect()
    }

    /// Consumption rate of the baseline path, `(x₀−l(a)) κ e^{−κ s}`.
    pub fn baseline_rate(&self) -> Vec<f64> {
        let rate = self.discount / (1.0 - self.utility.gamma());
        self.s
            .iter()
            .map(|&s| (self.x0 - self.floor) * rate * (-rate * s).exp())
            .collect()
    }

    /// Sign changes of `c − c⁰` along the lattice; relative differences up to
    /// `1e-7` count as ties.
    pub fn crossings(&self) -> usize {
        let mut count = 0;
        let mut sign = 0.0f64;
        for (&c, b) in self.c.iter().zip(self.baseline_rate()) {
            let d = c - b;
            if d.abs() <= CROSSING_TIE * c.abs().max(b.abs()) {
                continue;
            }
            if sign != 0.0 && d.signum() != sign {
                count += 1;
            }
            sign = d.signum();
        }
        count
    }

    /// `x₀ − Y_end`, the wealth consumed along the path.
    pub fn consumed(&self) -> f64 {
        self.x0 - self.y[self.y.len() - 1]
    }

    /// Trapezoid estimate of `∫ c ds` over the path.
    pub fn integrated_rate(&self) -> f64 {
        self.c
            .windows(2)
            .zip(self.s.windows(2))
            .map(|(c, s)| 0.5 * (c[0] + c[1]) * (s[1] - s[0]))
            .sum()
    }

    /// Largest violation of `Y ≥ Y⁰` (positive when violated).
    pub fn baseline_violation(&self) -> f64 {
        self.y
            .iter()
            .zip(self.baseline())
            .map(|(y, b)| b - y)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(Y, c)` at time `s`: Hermite between nodes and an exponential tail
    /// beyond the end, decaying at the rate `c/(Y − l(a))` of the last node.
    pub fn state_at(&self, s: f64) -> Result<(f64, f64)> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("time must be nonnegative, got {s}")));
        }
        let last = self.s.len() - 1;
        if s >= self.s[last] {
            let gap = self.y[last] - self.floor;
            if gap <= 0.0 {
                return Ok((self.floor, 0.0));
            }
            let kappa = self.c[last] / gap;
            let decay = (-kappa * (s - self.s[last])).exp();
            return Ok((self.floor + gap * decay, self.c[last] * decay));
        }
        let h = self.s[1] - self.s[0];
        let k = ((s / h).floor() as usize).min(last - 1);
        let (s0, s1) = (self.s[k], self.s[k + 1]);
        let y = hermite::cubic(s0, s1, self.y[k], self.y[k + 1], -self.c[k], -self.c[k + 1], s);
        let c = hermite::cubic(s0, s1, self.c[k], self.c[k + 1], self.dc[k], self.dc[k + 1], s);
        Ok((y.max(self.floor), c.max(0.0)))
    }

    fn check_value<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<()> {
        if value.utility() != &self.utility {
            return Err(Error::Mismatch(
                "path and value function use different utilities".into(),
            ));
        }
        if (value.theta1() - self.theta1).abs() > 1e-12 * self.theta1.max(1.0) {
            return Err(Error::Mismatch(format!(
                "path was solved for theta1 = {}, value function has {}",
                self.theta1,
                value.theta1()
            )));
        }
        Ok(())
    }

    /// Nodes inside the time range of `value`.
    pub fn checked_nodes<V: ValueFunction + ?Sized>(&self, value: &V) -> usize {
        match value.t_max() {
            Some(t) => self.s.partition_point(|&s| s <= t * (1.0 + 1e-12)),
            None => self.s.len(),
        }
    }

    fn marginal_values<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<Vec<f64>> {
        self.check_value(value)?;
        let n = self.checked_nodes(value);
        self.s[..n]
            .iter()
            .zip(&self.y)
            .map(|(&s, &y)| value.vhat(s, y, self.a, VhatKind::DValueDx))
            .collect()
    }

    /// Fenchel gap `U(c) − c ∂v̂/∂x − Ũ(∂v̂/∂x)` at every checked node; never positive.
    pub fn optimality_gap<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<Vec<f64>> {
        let u = &self.utility;
        Ok(self
            .marginal_values(value)?
            .iter()
            .zip(&self.c)
            .map(|(&y, &c)| u.value(c) - c * y - u.conjugate(y))
            .collect())
    }

    /// `|c − I(∂v̂/∂x)| / c` at every checked node.
    pub fn feedback_mismatch<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<Vec<f64>> {
        let u = &self.utility;
        Ok(self
            .marginal_values(value)?
            .iter()
            .zip(&self.c)
            .map(|(&y, &c)| (c - u.inverse_marginal(y)).abs() / c)
            .collect())
    }

    /// Residual of `p′ = (ρ+λ)p − g_x(s, Y)` with `p = U′(c)` and a five-point
    /// difference for `p′`, relative to `(ρ+λ)|p| + |g_x|`.
    pub fn costate_residual<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<Vec<f64>> {
        self.check_value(value)?;
        let gx = MarginalContinuation::new(value.model(), value.params(), &self.utility, self.theta1, self.a);
        Ok(costate_residual_of(self, &gx))
    }

    /// Long-format table `s,Y,c,p,Y0_baseline,gap`; `gap` is `nan` past the
    /// last time of `value`.
    pub fn to_csv<V: ValueFunction + ?Sized>(&self, value: &V) -> Result<CsvTable> {
        let gap = self.optimality_gap(value)?;
        let mut t = CsvTable::new(["s", "Y", "c", "p", "Y0_baseline", "gap"]);
        t.comment(format!("theta1={:.16e}", self.theta1));
        t.comment(format!(
            "x0={:.16e} a={:.16e} floor={:.16e} class={} segments={} crossings={}",
            self.x0,
            self.a,
            self.floor,
            self.class,
            self.segments,
            self.crossings()
        ));
        let p = self.costate();
        let base = self.baseline();
        for k in 0..self.s.len() {
            let g = gap.get(k).copied().unwrap_or(f64::NAN);
            t.push_row(vec![self.s[k], self.y[k], self.c[k], p[k], base[k], g]);
        }
        Ok(t)
    }
}

fn costate_residual_of(path: &ConsumptionPath, gx: &MarginalContinuation) -> Vec<f64> {
    let p = path.costate();
    let n = p.len();
    let h = path.s[1] - path.s[0];
    let r = path.discount;
    (0..n)
        .map(|k| {
            let dp = if n < 5 {
                if k == 0 {
                    (p[1] - p[0]) / h
                } else if k == n - 1 {
                    (p[n - 1] - p[n - 2]) / h
                } else {
                    (p[k + 1] - p[k - 1]) / (2.0 * h)
                }
            } else if k >= 2 && k + 2 < n {
                (p[k - 2] - 8.0 * p[k - 1] + 8.0 * p[k + 1] - p[k + 2]) / (12.0 * h)
            } else if k < 2 {
                let j = k;
                let w: [f64; 5] = if j == 0 {
                    [-25.0, 48.0, -36.0, 16.0, -3.0]
                } else {
                    [-3.0, -10.0, 18.0, -6.0, 1.0]
                };
                (0..5).map(|i| w[i] * p[i]).sum::<f64>() / (12.0 * h)
            } else {
                let j = n - 1 - k;
                let w: [f64; 5] = if j == 0 {
                    [25.0, -48.0, 36.0, -16.0, 3.0]
                } else {
                    [3.0, 10.0, -18.0, 6.0, -1.0]
                };
                (0..5).map(|i| w[i] * p[n - 1 - i]).sum::<f64>() / (12.0 * h)
            };
            let g = gx.eval(path.s[k], path.y[k]);
            (dp - (r * p[k] - g)).abs() / (r * p[k].abs() + g.abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::stationary::{fixed_point_theta1, solve_vbar, FixedPointConfig};
    use approx::assert_relative_eq;

    fn sqrt_u() -> PowerUtility {
        PowerUtility::new(1.0, 0.5).unwrap()
    }

    fn demo() -> (ReturnModel, MarketParams) {
        (
            ReturnModel::discrete(vec![-0.5, 0.2, 0.8], vec![0.1, 0.6, 0.3]).unwrap(),
            MarketParams::new(0.8, 1.0).unwrap(),
        )
    }

    #[test]
    fn rhs_without_continuation() {
        let u = sqrt_u();
        assert_relative_eq!(ode_rhs_power(&u, 2.2, 0.0, 1.0).unwrap(), 4.4, epsilon = 1e-14);
        assert!(ode_rhs_power(&u, 2.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn general_and_power_forms_agree() {
        let u = PowerUtility::new(1.7, 0.3).unwrap();
        for &(gx, c) in &[(0.0, 1.0), (0.4, 0.2), (3.0, 2.5), (0.01, 1e-3)] {
            let a = ode_rhs(&u, 1.3, gx, c).unwrap();
            let b = ode_rhs_power(&u, 1.3, gx, c).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn baseline_formula() {
        // a = 0 puts the floor at zero.
        let (m, _) = demo();
        let p = MarketParams::new(0.2, 2.0).unwrap();
        let u = sqrt_u();
        assert_eq!(baseline_y0(1.0, 0.0, &m, &p, &u, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            baseline_y0(1.0, 0.0, &m, &p, &u, 0.5).unwrap(),
            0.110803,
            epsilon = 1e-6
        );
        assert!(baseline_y0(1.0, 0.0, &m, &p, &u, 1e3).unwrap() < 1e-12);
    }

    #[test]
    fn zero_theta_path_is_the_baseline() {
        let (m, p) = demo();
        let u = sqrt_u();
        let a = 1.0;
        let floor = m.l_bound(a).unwrap();
        let x0 = floor + 1.0;
        let path = solve_path(&m, &p, &u, 0.0, x0, a, 10.0, &ShootingConfig::default()).unwrap();
        let kappa = p.discount() / 0.5;
        assert_relative_eq!(path.initial_rate(), kappa, max_relative = 1e-8);
        let base = path.baseline();
        for (y, b) in path.wealth().iter().zip(&base) {
            assert!((y - b).abs() <= 1e-8, "{y} vs {b}");
        }
    }

    #[test]
    fn stationary_path_properties() {
        let (m, p) = demo();
        let u = sqrt_u();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::default(), &FixedPointConfig::default()).unwrap();
        let a = 1.0;
        let path = solve_bvp(&vg, 1.4, a, &ShootingConfig::default()).unwrap();
        assert_eq!(path.class(), PathClass::Converged);
        assert!(path.baseline_violation() <= 1e-8);
        assert!(path.rate().windows(2).all(|w| w[1] < w[0]));
        let y = path.wealth();
        assert!(y.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-8));
        assert_eq!(path.crossings(), 1);
        let fb = path.feedback_mismatch(&vg).unwrap();
        let worst = fb.iter().fold(0.0f64, |a, b| a.max(*b));
        assert!(worst <= 1e-3, "feedback mismatch {worst}");
        assert!(path.optimality_gap(&vg).unwrap().iter().all(|g| *g <= 1e-12));
    }

    #[test]
    fn zero_theta_costate_is_exponential() {
        let (m, p) = demo();
        let u = sqrt_u();
        let vg = solve_vbar(&m, &p, &u, 0.0, &GridConfig::with_n(64)).unwrap();
        let path = solve_bvp(&vg, 2.0, 1.0, &ShootingConfig::default()).unwrap();
        let res = path.costate_residual(&vg).unwrap();
        let worst = res.iter().fold(0.0f64, |a, b| a.max(*b));
        assert!(worst <= 1e-8, "{worst}");
    }
}
