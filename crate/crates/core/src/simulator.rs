//! Monte Carlo simulation of the discrete-trade wealth process.
//!
//! Each path draws its own random stream from `(seed, path index)`, so results
//! do not depend on the number of worker threads, and two runs with the same
//! seed see the same trading dates and returns (common random numbers).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::market::{MarketParams, ReturnModel};
use crate::policy::Policy;
use crate::utility::UtilityFn;
use crate::value::ValueFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Simulated span; `None` picks `ln(1000)/ρ` so that `e^{−ρT} = 10⁻³`.
    pub t_sim: Option<f64>,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Keep every simulated path in the result.
    pub keep_paths: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            t_sim: None,
            seed: 1,
            threads: None,
            keep_paths: false,
        }
    }
}

impl SimConfig {
    pub fn resolved_t_sim(&self, params: &MarketParams) -> f64 {
        self.t_sim.unwrap_or_else(|| 1000f64.ln() / params.rho())
    }
}

/// Trading dates in `(0, T]` and the return realised at each of them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarketDraws {
    pub trade_times: Vec<f64>,
    pub returns: Vec<f64>,
}

/// One simulated path. Index `k` of `allocations` and `wealth` refers to the
/// trade at `trade_times[k]`, with the start at time 0 prepended.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub trade_times: Vec<f64>,
    pub returns: Vec<f64>,
    pub allocations: Vec<f64>,
    pub wealth: Vec<f64>,
    /// `∫_0^T e^{−ρt} U(c_t) dt`.
    pub realized_utility: f64,
}

impl SimPath {
    pub fn min_wealth(&self) -> f64 {
        self.wealth.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_paths: usize,
    pub t_sim: f64,
    pub x0: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `θ₁ x₀^γ`.
    pub value_prediction: f64,
    /// Upper bound on the discounted value left after `T`.
    pub truncation_bound: f64,
    /// Constant consumption rate between trades at the optimal allocation.
    pub baseline_mean: f64,
    pub baseline_std_error: f64,
    /// Standard error of the paired difference optimal − baseline.
    pub difference_std_error: f64,
    /// Smallest wealth at a trading date across all paths, both policies.
    pub min_wealth: f64,
    pub utilities: Vec<f64>,
    pub baseline_utilities: Vec<f64>,
    pub paths: Vec<SimPath>,
}

impl SimResult {
    /// `|mean − θ₁x₀^γ|`.
    pub fn value_error(&self) -> f64 {
        (self.mean - self.value_prediction).abs()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "n_paths",
            "t_sim",
            "x0",
            "mean",
            "std_error",
            "value_prediction",
            "truncation_bound",
            "baseline_mean",
            "baseline_std_error",
            "difference_std_error",
            "min_wealth",
        ]);
        t.push_row(vec![
            self.n_paths as f64,
            self.t_sim,
            self.x0,
            self.mean,
            self.std_error,
            self.value_prediction,
            self.truncation_bound,
            self.baseline_mean,
            self.baseline_std_error,
            self.difference_std_error,
            self.min_wealth,
        ]);
        t
    }

    /// One row per trading date of every kept path.
    pub fn paths_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["path", "k", "tau", "return", "allocation", "wealth"]);
        for (i, p) in self.paths.iter().enumerate() {
            for k in 0..p.wealth.len() {
                let (tau, z) = if k == 0 {
                    (0.0, 0.0)
                } else {
                    (p.trade_times[k - 1], p.returns[k - 1])
                };
                t.push_row(vec![i as f64, k as f64, tau, z, p.allocations[k], p.wealth[k]]);
            }
        }
        t
    }
}

/// Random stream of path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exponential waiting times until `t_sim` and the return over each wait.
/// Every trade consumes one exponential, one normal and one uniform draw.
pub fn sample_market<R: Rng + ?Sized>(
    rng: &mut R,
    model: &ReturnModel,
    params: &MarketParams,
    t_sim: f64,
) -> Result<MarketDraws> {
    if !(t_sim > 0.0) {
        return Err(Error::domain(format!("simulated span must be positive, got {t_sim}")));
    }
    let wait = Exp::new(params.lambda()).map_err(|e| Error::config(e.to_string()))?;
    let mut out = MarketDraws::default();
    let mut t = 0.0;
    loop {
        let dt: f64 = rng.sample(wait);
        let normal: f64 = rng.sample(StandardNormal);
        let uniform: f64 = rng.random();
        if t + dt > t_sim {
            return Ok(out);
        }
        t += dt;
        out.trade_times.push(t);
        out.returns.push(model.return_from_draws(dt, normal, uniform));
    }
}

/// Between-trade consumption rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consumption {
    /// Scaled optimal template path.
    Optimal,
    /// The optimal initial rate held constant until wealth hits the floor.
    ConstantRate,
}

/// Runs one path on fixed market draws, rebalancing to the optimal allocation
/// at every trade.
pub fn simulate_path(
    draws: &MarketDraws,
    policy: &Policy,
    model: &ReturnModel,
    x0: f64,
    t_sim: f64,
    rule: Consumption,
) -> Result<SimPath> {
    if !(x0 >= 0.0) {
        return Err(Error::domain(format!("initial wealth must be nonnegative, got {x0}")));
    }
    let rho = policy.rho();
    let u = policy.utility();
    let gamma = u.gamma();
    let c0 = policy.template().initial_rate();
    let n = draws.trade_times.len();
    let mut allocations = Vec::with_capacity(n + 1);
    let mut wealth = Vec::with_capacity(n + 1);
    let mut x = x0;
    let mut start = 0.0;
    let mut utility = 0.0;
    for k in 0..=n {
        let a = policy.optimal_allocation(x)?;
        allocations.push(a);
        wealth.push(x);
        let end = if k < n { draws.trade_times[k] } else { t_sim };
        let d = end - start;
        let scale = policy.scale(x);
        let disc = (-rho * start).exp();
        let y = match rule {
            Consumption::Optimal => {
                if scale > 0.0 {
                    utility += disc * scale.powf(gamma) * policy.template_utility(d)?;
                }
                policy.state(x, d)?.0
            }
            Consumption::ConstantRate => {
                let rate = scale * c0;
                let floor = model.l_bound(a)?;
                let span = if rate > 0.0 {
                    d.min((x - floor).max(0.0) / rate)
                } else {
                    0.0
                };
                if span > 0.0 {
                    utility += disc * u.value(rate) * -(-rho * span).exp_m1() / rho;
                }
                (x - rate * span).max(floor)
            }
        };
        if k < n {
            x = y + a * draws.returns[k];
            if x < 0.0 {
                // Rounding only; the floor keeps x ≥ a(z̲ + Z) ≥ 0.
                x = 0.0;
            }
        }
        start = end;
    }
    Ok(SimPath {
        trade_times: draws.trade_times.clone(),
        returns: draws.returns.clone(),
        allocations,
        wealth,
        realized_utility: utility,
    })
}

/// `e^{−ρT} θ₁ (x₀ M)^γ` with `M` bounding the expected marked-to-market
/// wealth at `T`: each waiting time `Δ` multiplies it by at most
/// `k̂ e^{b̂Δ}`, `k̂ = 1 + π(k−1)`, `b̂ = max(1,π) b`, over the constants of
/// [`ReturnModel::growth_constants`].
pub fn truncation_bound(policy: &Policy, model: &ReturnModel, params: &MarketParams, x0: f64, t_sim: f64) -> f64 {
    let (k, b) = model.growth_constants();
    let pi = policy.pi_star();
    let khat = 1.0 + pi * (k.max(1.0) - 1.0);
    let bhat = pi.max(1.0) * b.max(0.0);
    let growth = khat * ((params.lambda() * (khat - 1.0) + bhat) * t_sim).exp();
    (-params.rho() * t_sim).exp() * policy.theta1() * (x0 * growth).powf(policy.utility().gamma())
}

/// Simulates `cfg.n_paths` paths under the optimal policy and the
/// constant-rate baseline on the same draws.
pub fn monte_carlo<V: ValueFunction + ?Sized>(
    value: &V,
    policy: &Policy,
    x0: f64,
    cfg: &SimConfig,
) -> Result<SimResult> {
    if (value.theta1() - policy.theta1()).abs() > 1e-12 * policy.theta1().max(1.0)
        || value.utility() != policy.utility()
    {
        return Err(Error::Mismatch(
            "policy was built from a different value function".into(),
        ));
    }
    if cfg.n_paths < 2 {
        return Err(Error::config(format!("need at least two paths, got {}", cfg.n_paths)));
    }
    let model = value.model();
    let params = value.params();
    let t_sim = cfg.resolved_t_sim(params);
    if !(t_sim > 0.0 && t_sim.is_finite()) {
        return Err(Error::config(format!(
            "simulated span must be positive and finite, got {t_sim}"
        )));
    }
    let run = |i: usize| -> Result<(SimPath, SimPath)> {
        let mut rng = path_rng(cfg.seed, i as u64);
        let draws = sample_market(&mut rng, model, params, t_sim)?;
        Ok((
            simulate_path(&draws, policy, model, x0, t_sim, Consumption::Optimal)?,
            simulate_path(&draws, policy, model, x0, t_sim, Consumption::ConstantRate)?,
        ))
    };
    let pairs: Vec<(SimPath, SimPath)> = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(e.to_string()))?
            .install(|| (0..cfg.n_paths).into_par_iter().map(run).collect::<Result<_>>())?,
        None => (0..cfg.n_paths).into_par_iter().map(run).collect::<Result<_>>()?,
    };

    // Reduction in path order keeps the sums independent of scheduling.
    let utilities: Vec<f64> = pairs.iter().map(|p| p.0.realized_utility).collect();
    let baseline_utilities: Vec<f64> = pairs.iter().map(|p| p.1.realized_utility).collect();
    let diffs: Vec<f64> = utilities.iter().zip(&baseline_utilities).map(|(a, b)| a - b).collect();
    let (mean, std_error) = mean_and_se(&utilities);
    let (baseline_mean, baseline_std_error) = mean_and_se(&baseline_utilities);
    let (_, difference_std_error) = mean_and_se(&diffs);
    let min_wealth = pairs
        .iter()
        .map(|p| p.0.min_wealth().min(p.1.min_wealth()))
        .fold(f64::INFINITY, f64::min);
    let paths = if cfg.keep_paths {
        pairs.into_iter().map(|p| p.0).collect()
    } else {
        Vec::new()
    };
    Ok(SimResult {
        n_paths: cfg.n_paths,
        t_sim,
        x0,
        mean,
        std_error,
        value_prediction: policy.theta1() * x0.powf(policy.utility().gamma()),
        truncation_bound: truncation_bound(policy, model, params, x0, t_sim),
        baseline_mean,
        baseline_std_error,
        difference_std_error,
        min_wealth,
        utilities,
        baseline_utilities,
        paths,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::ShootingConfig;
    use crate::grid::GridConfig;
    use crate::stationary::{fixed_point_theta1, FixedPointConfig};
    use crate::utility::PowerUtility;

    fn demo() -> (ReturnModel, MarketParams, PowerUtility) {
        (
            ReturnModel::discrete(vec![-0.5, 0.2, 0.8], vec![0.1, 0.6, 0.3]).unwrap(),
            MarketParams::new(0.8, 1.0).unwrap(),
            PowerUtility::new(1.0, 0.5).unwrap(),
        )
    }

    #[test]
    fn market_draws_are_reproducible() {
        let (m, p, _) = demo();
        let a = sample_market(&mut path_rng(7, 3), &m, &p, 20.0).unwrap();
        let b = sample_market(&mut path_rng(7, 3), &m, &p, 20.0).unwrap();
        let c = sample_market(&mut path_rng(7, 4), &m, &p, 20.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.trade_times.windows(2).all(|w| w[1] > w[0]));
        assert!(a.trade_times.iter().all(|&t| t > 0.0 && t <= 20.0));
        assert!(sample_market(&mut path_rng(0, 0), &m, &p, 0.0).is_err());
    }

    #[test]
    fn no_trades_gives_the_deterministic_utility() {
        let (m, p, u) = demo();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::with_n(128), &FixedPointConfig::default()).unwrap();
        let pol = Policy::new(&vg, &ShootingConfig::default()).unwrap();
        let x0 = 2.0;
        let path = simulate_path(&MarketDraws::default(), &pol, &m, x0, 15.0, Consumption::Optimal).unwrap();
        let direct = pol.scale(x0).powf(0.5) * pol.template_utility(15.0).unwrap();
        assert_eq!(path.realized_utility, direct);
        assert_eq!(path.wealth, vec![x0]);

        let zero = simulate_path(&MarketDraws::default(), &pol, &m, 0.0, 15.0, Consumption::Optimal).unwrap();
        assert_eq!(zero.realized_utility, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (m, p, u) = demo();
        let vg = fixed_point_theta1(&m, &p, &u, &GridConfig::with_n(128), &FixedPointConfig::default()).unwrap();
        let pol = Policy::new(&vg, &ShootingConfig::default()).unwrap();
        let cfg = SimConfig {
            n_paths: 200,
            seed: 11,
            ..Default::default()
        };
        let one = monte_carlo(
            &vg,
            &pol,
            1.0,
            &SimConfig {
                threads: Some(1),
                ..cfg
            },
        )
        .unwrap();
        let two = monte_carlo(
            &vg,
            &pol,
            1.0,
            &SimConfig {
                threads: Some(2),
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(one, two);
        assert!(one.std_error > 0.0);
        assert!(one.min_wealth >= 0.0);
    }
}
