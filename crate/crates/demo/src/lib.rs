//! Browser bindings: a discrete-return market solved in stationary form, the
//! optimal path between two trades, and a small Monte Carlo check.

use illiquid::bvp::solve_bvp;
use illiquid::market::validate_assumptions;
use illiquid::simulator::monte_carlo;
use illiquid::stationary::fixed_point_theta1;
use illiquid::{
    FixedPointConfig, GridConfig, MarketParams, Policy, PowerUtility, ReturnModel, ShootingConfig, SimConfig,
    ValueFunction, ValueGrid,
};
use wasm_bindgen::prelude::*;

fn js_err(e: illiquid::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A market with finitely many return outcomes, independent of the waiting
/// time, plus its solved value function once `solve` has run.
#[wasm_bindgen]
pub struct Market {
    model: ReturnModel,
    params: MarketParams,
    utility: PowerUtility,
    value: Option<ValueGrid>,
}

#[wasm_bindgen]
impl Market {
    #[wasm_bindgen(constructor)]
    pub fn new(points: Vec<f64>, probs: Vec<f64>, rho: f64, lambda: f64, gamma: f64) -> Result<Market, JsError> {
        Ok(Market {
            model: ReturnModel::discrete(points, probs).map_err(js_err)?,
            params: MarketParams::new(rho, lambda).map_err(js_err)?,
            utility: PowerUtility::new(1.0, gamma).map_err(js_err)?,
            value: None,
        })
    }

    /// Growth-condition report as plain text.
    pub fn check(&self) -> String {
        validate_assumptions(&self.model, &self.params, &self.utility).to_string()
    }

    /// Solves for the value coefficient on a grid of `n` points.
    pub fn solve(&mut self, n: usize) -> Result<Solution, JsError> {
        let grid = GridConfig::with_n(n);
        let v = fixed_point_theta1(
            &self.model,
            &self.params,
            &self.utility,
            &grid,
            &FixedPointConfig::default(),
        )
        .map_err(js_err)?;
        let out = Solution {
            theta1: v.theta1(),
            xi_star: v.xi_star(),
            residual: v.residual(),
            xi: v.xi().to_vec(),
            vbar: v.vbar().to_vec(),
        };
        self.value = Some(v);
        Ok(out)
    }

    fn solved(&self) -> Result<&ValueGrid, JsError> {
        self.value.as_ref().ok_or_else(|| JsError::new("call solve() first"))
    }

    /// Optimal wealth and consumption from `x0` with `a` invested, until the
    /// next trade.
    pub fn path(&self, x0: f64, a: f64) -> Result<PathResult, JsError> {
        let v = self.solved()?;
        let p = solve_bvp(v, x0, a, &ShootingConfig::default()).map_err(js_err)?;
        Ok(PathResult {
            initial_rate: p.initial_rate(),
            floor: p.floor(),
            crossings: p.crossings(),
            s: p.s().to_vec(),
            wealth: p.wealth().to_vec(),
            rate: p.rate().to_vec(),
            baseline: p.baseline(),
        })
    }

    /// Mean realized utility of the optimal policy from unit wealth.
    pub fn simulate(&self, n_paths: usize, seed: u64) -> Result<SimSummary, JsError> {
        let v = self.solved()?;
        let policy = Policy::new(v, &ShootingConfig::default()).map_err(js_err)?;
        let cfg = SimConfig {
            n_paths,
            seed,
            ..SimConfig::default()
        };
        let r = monte_carlo(v, &policy, 1.0, &cfg).map_err(js_err)?;
        Ok(SimSummary {
            mean: r.mean,
            std_error: r.std_error,
            prediction: r.value_prediction,
            truncation_bound: r.truncation_bound,
            baseline_mean: r.baseline_mean,
            utilities: r.utilities,
        })
    }
}

#[wasm_bindgen]
pub struct Solution {
    pub theta1: f64,
    pub xi_star: f64,
    pub residual: f64,
    xi: Vec<f64>,
    vbar: Vec<f64>,
}

#[wasm_bindgen]
impl Solution {
    #[wasm_bindgen(getter)]
    pub fn xi(&self) -> Vec<f64> {
        self.xi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn vbar(&self) -> Vec<f64> {
        self.vbar.clone()
    }
}

#[wasm_bindgen]
pub struct PathResult {
    pub initial_rate: f64,
    pub floor: f64,
    pub crossings: usize,
    s: Vec<f64>,
    wealth: Vec<f64>,
    rate: Vec<f64>,
    baseline: Vec<f64>,
}

#[wasm_bindgen]
impl PathResult {
    #[wasm_bindgen(getter)]
    pub fn s(&self) -> Vec<f64> {
        self.s.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn wealth(&self) -> Vec<f64> {
        self.wealth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> Vec<f64> {
        self.rate.clone()
    }

    /// Wealth when consuming as if no further trade will come.
    #[wasm_bindgen(getter)]
    pub fn baseline(&self) -> Vec<f64> {
        self.baseline.clone()
    }
}

#[wasm_bindgen]
pub struct SimSummary {
    pub mean: f64,
    pub std_error: f64,
    pub prediction: f64,
    pub truncation_bound: f64,
    pub baseline_mean: f64,
    utilities: Vec<f64>,
}

#[wasm_bindgen]
impl SimSummary {
    #[wasm_bindgen(getter)]
    pub fn utilities(&self) -> Vec<f64> {
        self.utilities.clone()
    }
}
