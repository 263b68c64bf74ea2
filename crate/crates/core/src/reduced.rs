//! Shared machinery for the reduced equation
//!
//! ```text
//! r v̄(ξ) − Ũ(v̄′(ξ)) − S(ξ) = 0,   ξ ≥ z̲,
//! S(ξ) = λθ₁ E[(ξ+Z)^γ] + Σ_k β_k v̄_k(ξ),
//! ```
//!
//! which covers the stationary equation (`r = ρ+λ`, no history) and every
//! implicit time step of the time-dependent one (`r` and `β_k` from the time
//! discretisation, `v̄_k` the later slices).
//!
//! With `w = Ũ(v̄′) = r v̄ − S` and `q = w^{1/γ}`, differentiating gives the
//! first-order equation
//!
//! ```text
//! q′ = (1/γ) [ r A − B(ξ) q^{1−γ} ],   A = K̃₁^{1/γ̃},   q(z̲) = 0,
//! B(ξ) q^{1−γ} = S′(ξ) q^{1−γ},
//! ```
//!
//! and `v̄′ = A q^{γ−1}`. Every term of `B q^{1−γ}` stays bounded at the floor.
//! The history terms make the equation stiff for short time steps, so it is
//! integrated outward from `z̲` with the three-stage Radau IIA collocation
//! method (fifth order, L-stable).

use crate::error::{Error, Result};
use crate::grid::XiGrid;
use crate::hermite;
use crate::market::ReturnModel;
use crate::utility::PowerUtility;

const SQRT6: f64 = 2.449_489_742_783_178;
/// Radau IIA (three stages, order five) abscissae on `[0, 1]`; the last is the right end.
const RADAU_C: [f64; 3] = [(4.0 - SQRT6) / 10.0, (4.0 + SQRT6) / 10.0, 1.0];
const RADAU_A: [[f64; 3]; 3] = [
    [
        (88.0 - 7.0 * SQRT6) / 360.0,
        (296.0 - 169.0 * SQRT6) / 1800.0,
        (-2.0 + 3.0 * SQRT6) / 225.0,
    ],
    [
        (296.0 + 169.0 * SQRT6) / 1800.0,
        (88.0 + 7.0 * SQRT6) / 360.0,
        (-2.0 - 3.0 * SQRT6) / 225.0,
    ],
    [(16.0 - SQRT6) / 36.0, (16.0 + SQRT6) / 36.0, 1.0 / 9.0],
];

/// Interior collocation points, two per interval.
fn stage_points(nodes: &[f64]) -> Vec<f64> {
    nodes
        .windows(2)
        .flat_map(|w| [RADAU_C[0], RADAU_C[1]].map(|c| w[0] + c * (w[1] - w[0])))
        .collect()
}

/// Kernel moments at grid nodes and at the interior collocation points of
/// each interval, for one waiting time.
#[derive(Debug, Clone)]
pub(crate) struct KernelTable {
    pub power: Vec<f64>,
    pub slope: Vec<f64>,
    /// Entry `2i + s` belongs to stage `s` of interval `i`.
    pub stage_slope: Vec<f64>,
    pub atom: f64,
}

impl KernelTable {
    pub fn build(model: &ReturnModel, t: f64, grid: &XiGrid, gamma: f64) -> Result<Self> {
        let nodes = grid.nodes();
        let at_nodes = model.kernel_moments_many(t, nodes, gamma)?;
        let at_stages = model.kernel_moments_many(t, &stage_points(nodes), gamma)?;
        Ok(Self {
            power: at_nodes.iter().map(|m| m.power).collect(),
            slope: at_nodes.iter().map(|m| m.slope_regular).collect(),
            stage_slope: at_stages.iter().map(|m| m.slope_regular).collect(),
            atom: at_nodes[0].atom,
        })
    }
}

/// One solved `ξ`-slice.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Slice {
    pub vbar: Vec<f64>,
    /// `v̄′`; infinite at the floor.
    pub dvbar: Vec<f64>,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    /// `q` at the collocation points (Hermite from `q`, `dq`).
    pub q_stage: Vec<f64>,
    /// `q^{γ−1}` at nodes and at collocation points, for history terms.
    pub qpow: Vec<f64>,
    pub qpow_stage: Vec<f64>,
}

impl Slice {
    fn fill_stages(&mut self, nodes: &[f64], gamma: f64) {
        let pts = stage_points(nodes);
        self.q_stage = pts
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let i = k / 2;
                if i == 0 {
                    return self.first_cell(nodes, gamma, x);
                }
                hermite::cubic(
                    nodes[i],
                    nodes[i + 1],
                    self.q[i],
                    self.q[i + 1],
                    self.dq[i],
                    self.dq[i + 1],
                    x,
                )
                .max(0.0)
            })
            .collect();
        self.qpow = self.q.iter().map(|q| q.powf(gamma - 1.0)).collect();
        self.qpow_stage = self.q_stage.iter().map(|q| q.powf(gamma - 1.0)).collect();
    }

    /// Coefficient `b` of `q ≈ q′(z̲) d + b d^{2−γ}`, `d = ξ − z̲`, fitted
    /// through the first interior node.
    pub fn floor_curvature(&self, nodes: &[f64], gamma: f64) -> f64 {
        let h = nodes[1] - nodes[0];
        (self.q[1] / h - self.dq[0]) / h.powf(1.0 - gamma)
    }

    /// `q` in the first interval from the two-term expansion at the floor,
    /// where a cubic cannot follow the `d^{2−γ}` term.
    pub fn first_cell(&self, nodes: &[f64], gamma: f64, xi: f64) -> f64 {
        let d = xi - nodes[0];
        (d * (self.dq[0] + self.floor_curvature(nodes, gamma) * d.powf(1.0 - gamma))).max(0.0)
    }

    /// Build the `q` representation from values and slopes obtained some
    /// other way (used by the upwind scheme).
    pub fn from_values(nodes: &[f64], u: &PowerUtility, vbar: Vec<f64>, dvbar: Vec<f64>) -> Self {
        let gamma = u.gamma();
        let q: Vec<f64> = dvbar
            .iter()
            .map(|&d| {
                if d.is_infinite() {
                    0.0
                } else {
                    let w = u.ktilde1() * d.powf(-u.gammatilde());
                    w.powf(1.0 / gamma)
                }
            })
            .collect();
        let n = nodes.len();
        let mut dq = vec![0.0; n];
        for i in 0..n {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            dq[i] = (q[b] - q[a]) / (nodes[b] - nodes[a]);
        }
        let mut s = Self {
            vbar,
            dvbar,
            q,
            dq,
            q_stage: Vec::new(),
            qpow: Vec::new(),
            qpow_stage: Vec::new(),
        };
        s.fill_stages(nodes, gamma);
        s
    }
}

/// A later slice entering the source term with weight `beta`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Memory<'a> {
    pub beta: f64,
    pub slice: &'a Slice,
}

/// Coefficients of one reduced problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepProblem<'a> {
    pub r: f64,
    /// `λθ₁`.
    pub g_scale: f64,
    pub kernel: &'a KernelTable,
    pub memory: &'a [Memory<'a>],
}

#[derive(Clone, Copy)]
enum At {
    Node(usize),
    Stage(usize),
}

/// Solve one reduced problem on `grid`.
pub(crate) fn solve_step(grid: &XiGrid, u: &PowerUtility, prob: &StepProblem<'_>) -> Result<Slice> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let zlow = nodes[0];
    let gamma = u.gamma();
    let om = 1.0 - gamma;
    let big_a = u.ktilde1().powf(1.0 / u.gammatilde());
    let ra = prob.r * big_a;
    let atom_coef = prob.g_scale * gamma * prob.kernel.atom;

    // Slope at the floor: γd + C d^{1−γ} = rA.
    let c_floor = atom_coef
        + big_a
            * prob
                .memory
                .iter()
                .map(|m| m.beta * m.slice.dq[0].powf(gamma - 1.0))
                .sum::<f64>();
    let d0 = floor_slope(gamma, c_floor, ra)?;

    // Next term of q = d0 d + b d^{2−γ} + …, from matching the d^{1−γ} terms.
    let curvature = {
        let history: f64 = prob
            .memory
            .iter()
            .map(|m| m.beta * m.slice.dq[0].powf(gamma - 2.0) * m.slice.floor_curvature(nodes, gamma))
            .sum();
        let num = d0.powf(om) * (om * big_a * history - prob.g_scale * gamma * prob.kernel.slope[0]);
        num / (gamma * (2.0 - gamma) + om * c_floor * d0.powf(-gamma))
    };

    // B(ξ) of the module docs.
    let coef_b = |at: At, xi: f64| -> f64 {
        let (slope, idx, stage) = match at {
            At::Node(i) => (prob.kernel.slope[i], i, false),
            At::Stage(k) => (prob.kernel.stage_slope[k], k, true),
        };
        let mut b = prob.g_scale * gamma * slope;
        if atom_coef != 0.0 {
            b += atom_coef * (xi - zlow).powf(-om);
        }
        for m in prob.memory {
            let qk = if stage {
                m.slice.qpow_stage[idx]
            } else {
                m.slice.qpow[idx]
            };
            b += big_a * m.beta * qk;
        }
        b
    };
    let rhs = |b: f64, q: f64| (ra - b * q.max(0.0).powf(om)) / gamma;
    // Right-hand side and its q-derivative sharing one power.
    let rhs_jac = |b: f64, q: f64| {
        let q = q.max(f64::MIN_POSITIVE);
        let p = q.powf(om);
        ((ra - b * p) / gamma, -om / gamma * b * p / q)
    };

    let mut q = vec![0.0; n];
    let mut dq = vec![0.0; n];
    dq[0] = d0;
    for i in 0..n - 1 {
        let h = nodes[i + 1] - nodes[i];
        let xs = RADAU_C.map(|c| nodes[i] + c * h);
        let b = [
            coef_b(At::Stage(2 * i), xs[0]),
            coef_b(At::Stage(2 * i + 1), xs[1]),
            coef_b(At::Node(i + 1), xs[2]),
        ];
        let qi = q[i];
        // In the first interval only the remainder after the floor expansion
        // is integrated; elsewhere `known` vanishes.
        let known = |x: f64| if i == 0 { x * (d0 + curvature * x.powf(om)) } else { 0.0 };
        let known_slope = |x: f64| {
            if i == 0 {
                d0 + (2.0 - gamma) * curvature * x.powf(om)
            } else {
                0.0
            }
        };
        let offsets: [(f64, f64); 3] = std::array::from_fn(|s| (known(RADAU_C[s] * h), known_slope(RADAU_C[s] * h)));
        // Stage slopes, started from the left slope.
        let mut k = if i == 0 { [0.0; 3] } else { [dq[i]; 3] };
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let qs: [f64; 3] =
                std::array::from_fn(|s| qi + offsets[s].0 + h * (0..3).map(|j| RADAU_A[s][j] * k[j]).sum::<f64>());
            let fj: [(f64, f64); 3] = std::array::from_fn(|s| rhs_jac(b[s], qs[s]));
            let f: [f64; 3] = std::array::from_fn(|s| k[s] - (fj[s].0 - offsets[s].1));
            let jac: [f64; 3] = std::array::from_fn(|s| fj[s].1);
            // Newton on k − f(q_i + h A k) = 0.
            let mut m: [[f64; 3]; 3] = std::array::from_fn(|r| {
                std::array::from_fn(|c| if r == c { 1.0 } else { 0.0 } - h * jac[r] * RADAU_A[r][c])
            });
            let delta = solve3(&mut m, f);
            for s in 0..3 {
                k[s] -= delta[s];
            }
            if !k.iter().all(|v| v.is_finite()) {
                break;
            }
            let scale = k
                .iter()
                .zip(&offsets)
                .fold(1e-300f64, |a, (v, o)| a.max(v.abs()).max(o.1.abs()));
            last = delta.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
            if last <= 1e-14 {
                break;
            }
        }
        let converged = last <= 1e-10;
        let next = qi + offsets[2].0 + h * (0..3).map(|j| RADAU_A[2][j] * k[j]).sum::<f64>();
        if !converged || !(next > 0.0 && next.is_finite()) {
            return Err(Error::Numeric(format!(
                "collocation step failed at xi = {} (q = {next})",
                nodes[i + 1]
            )));
        }
        q[i + 1] = next;
        dq[i + 1] = rhs(b[2], next);
    }

    let mut vbar = Vec::with_capacity(n);
    let mut dvbar = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = prob.g_scale * prob.kernel.power[i];
        for m in prob.memory {
            s += m.beta * m.slice.vbar[i];
        }
        vbar.push((q[i].powf(gamma) + s) / prob.r);
        dvbar.push(if i == 0 {
            f64::INFINITY
        } else {
            big_a * q[i].powf(gamma - 1.0)
        });
    }
    let mut slice = Slice {
        vbar,
        dvbar,
        q,
        dq,
        q_stage: Vec::new(),
        qpow: Vec::new(),
        qpow_stage: Vec::new(),
    };
    slice.fill_stages(nodes, gamma);
    Ok(slice)
}

/// Gaussian elimination with partial pivoting for a 3×3 system.
fn solve3(m: &mut [[f64; 3]; 3], mut rhs: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty range");
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..3 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let tail: f64 = (r + 1..3).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - tail) / m[r][r];
    }
    x
}

fn floor_slope(gamma: f64, c: f64, target: f64) -> Result<f64> {
    let f = |d: f64| gamma * d + c * d.powf(1.0 - gamma) - target;
    let mut hi = (target / gamma).max(1e-300);
    let mut guard = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Numeric("floor slope equation has no root".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Coefficient `C` of the no-investment value `C x^γ`:
/// `(ρ+λ) C − λθ₁ = K̃₁ (γC)^{−γ̃}`.
pub(crate) fn no_trade_coefficient(u: &PowerUtility, discount: f64, lambda_theta: f64) -> f64 {
    let f = |c: f64| discount * c - lambda_theta - u.ktilde1() * (u.gamma() * c).powf(-u.gammatilde());
    let mut lo = lambda_theta / discount;
    let mut hi = lo.max(1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    if lo <= 0.0 {
        lo = 0.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 || f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Fornberg weights for the first derivative at `x0` from `xs`.
pub(crate) fn fd_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1).
    let mut c = vec![[0.0f64; 2]; m];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..m {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Stencil width of the plug-back derivative estimates.
pub(crate) const FD_WIDTH: usize = 7;

/// Finite-difference `v̄′` at nodes `1..n-1`, taken in the coordinate
/// `s = (ξ − z̲)^γ` in which `v̄` is regular at the floor. Entry 0 is infinite.
pub(crate) fn fd_slope(nodes: &[f64], vbar: &[f64], gamma: f64) -> Vec<f64> {
    let n = nodes.len();
    let z = nodes[0];
    let s: Vec<f64> = nodes.iter().map(|&x| (x - z).powf(gamma)).collect();
    let half = FD_WIDTH / 2;
    let mut out = vec![f64::INFINITY; n];
    for i in 1..n {
        let lo = i.saturating_sub(half).min(n - FD_WIDTH);
        let idx = lo..lo + FD_WIDTH;
        let w = fd_weights(s[i], &s[idx.clone()]);
        let dv_ds: f64 = idx.zip(&w).map(|(j, wj)| wj * vbar[j]).sum();
        out[i] = dv_ds * gamma * (nodes[i] - z).powf(gamma - 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_weights_are_exact_for_polynomials() {
        let xs = [0.0, 0.1, 0.35, 0.5, 0.9];
        let w = fd_weights(0.3, &xs);
        let f = |x: f64| x.powi(4) - 2.0 * x.powi(3) + x;
        let df = |x: f64| 4.0 * x.powi(3) - 6.0 * x * x + 1.0;
        let est: f64 = xs.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        assert_relative_eq!(est, df(0.3), epsilon = 1e-12);
    }

    #[test]
    fn no_trade_coefficient_without_trading_value() {
        let u = PowerUtility::new(1.0, 0.5).unwrap();
        let c = no_trade_coefficient(&u, 2.2, 0.0);
        assert_relative_eq!(c, (2.2f64 / 0.5).powf(-0.5), max_relative = 1e-13);
    }

    #[test]
    fn floor_slope_root() {
        let d = floor_slope(0.5, 0.3, 2.0).unwrap();
        assert_relative_eq!(0.5 * d + 0.3 * d.sqrt(), 2.0, max_relative = 1e-14);
        let d = floor_slope(0.5, 0.0, 2.0).unwrap();
        assert_relative_eq!(d, 4.0, max_relative = 1e-14);
    }
}
