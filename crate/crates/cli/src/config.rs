//! Run configuration, read from a TOML file. Unknown keys are rejected.

use std::path::PathBuf;

use illiquid::{
    FixedPointConfig, GridConfig, MarketParams, PowerUtility, ReturnModel, ShootingConfig, SimConfig, SurfaceConfig,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub bvp: BvpSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BlackScholes,
    Discrete,
    FrozenLognormal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Drift of the lognormal kinds.
    pub b: Option<f64>,
    pub sigma: Option<f64>,
    pub points: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    /// Support bounds `[−zlow, zhigh]` of the discrete kind; defaults come
    /// from the points.
    pub zlow: Option<f64>,
    pub zhigh: Option<f64>,
    pub t0: Option<f64>,
    pub quadrature_nodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub rho: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    #[serde(rename = "K1", default = "one")]
    pub k1: f64,
    #[serde(default = "half")]
    pub gamma: f64,
}

impl Default for UtilitySection {
    fn default() -> Self {
        Self { k1: 1.0, gamma: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n_xi: usize,
    pub xi_max: Option<f64>,
    pub first_step: f64,
    pub t_max: Option<f64>,
    pub dt: f64,
    pub terminal_step: f64,
    pub fp_tol: f64,
    pub omega: f64,
    pub max_iter: usize,
    pub accelerate: bool,
    /// Solve for this coefficient instead of iterating to the fixed point.
    pub theta1: Option<f64>,
    /// Write every `csv_stride`-th time slice of a surface.
    pub csv_stride: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let grid = GridConfig::default();
        let surface = SurfaceConfig::default();
        let fp = FixedPointConfig::default();
        Self {
            n_xi: grid.n,
            xi_max: grid.xi_max,
            first_step: grid.first_step,
            t_max: surface.t_max,
            dt: surface.dt,
            terminal_step: surface.terminal_step,
            fp_tol: fp.tol,
            omega: fp.omega,
            max_iter: fp.max_iter,
            accelerate: fp.accelerate,
            theta1: None,
            csv_stride: 10,
        }
    }
}

/// Allocation of the path command: a number or `"optimal"` (`x0/ξ*`).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AllocationSpec {
    Value(f64),
    Keyword(String),
}

impl Default for AllocationSpec {
    fn default() -> Self {
        AllocationSpec::Keyword("optimal".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BvpSection {
    /// Initial wealth; `None` means `ξ*` (unit optimal allocation).
    pub x0: Option<f64>,
    pub a: AllocationSpec,
    pub horizon: Option<f64>,
    pub step: f64,
    /// Also solve with the return law frozen at this waiting time.
    pub frozen_t0: Option<f64>,
}

impl Default for BvpSection {
    fn default() -> Self {
        Self {
            x0: None,
            a: AllocationSpec::default(),
            horizon: None,
            step: ShootingConfig::default().step,
            frozen_t0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: u64,
    pub n_paths: usize,
    pub t_sim: Option<f64>,
    pub x0: f64,
    pub keep_paths: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            seed: s.seed,
            n_paths: s.n_paths,
            t_sim: s.t_sim,
            x0: 1.0,
            keep_paths: s.keep_paths,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("model.{what} is required for this model kind")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn return_model(&self) -> Result<ReturnModel, CliError> {
        let m = &self.model;
        let model = match m.kind {
            ModelKind::BlackScholes => ReturnModel::black_scholes(need(m.b, "b")?, need(m.sigma, "sigma")?)?,
            ModelKind::FrozenLognormal => {
                ReturnModel::frozen_lognormal(need(m.t0, "t0")?, need(m.b, "b")?, need(m.sigma, "sigma")?)?
            }
            ModelKind::Discrete => {
                let points = m
                    .points
                    .clone()
                    .ok_or_else(|| CliError::Config("model.points is required".into()))?;
                let probs = m
                    .probs
                    .clone()
                    .ok_or_else(|| CliError::Config("model.probs is required".into()))?;
                match (m.zlow, m.zhigh) {
                    (None, None) => ReturnModel::discrete(points, probs)?,
                    (lo, hi) => {
                        let top = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let bottom = -points.iter().copied().fold(f64::INFINITY, f64::min);
                        ReturnModel::discrete_with_bounds(points, probs, lo.unwrap_or(bottom), hi.unwrap_or(top))?
                    }
                }
            }
        };
        Ok(match m.quadrature_nodes {
            Some(n) => model.with_quadrature_nodes(n)?,
            None => model,
        })
    }

    pub fn market_params(&self) -> Result<MarketParams, CliError> {
        Ok(MarketParams::new(self.params.rho, self.params.lambda)?)
    }

    pub fn power_utility(&self) -> Result<PowerUtility, CliError> {
        Ok(PowerUtility::new(self.utility.k1, self.utility.gamma)?)
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig {
            n: self.solver.n_xi,
            xi_max: self.solver.xi_max,
            first_step: self.solver.first_step,
        }
    }

    pub fn surface(&self) -> SurfaceConfig {
        SurfaceConfig {
            grid: self.grid(),
            dt: self.solver.dt,
            t_max: self.solver.t_max,
            terminal_step: self.solver.terminal_step,
        }
    }

    pub fn fixed_point(&self) -> FixedPointConfig {
        FixedPointConfig {
            omega: self.solver.omega,
            tol: self.solver.fp_tol,
            max_iter: self.solver.max_iter,
            accelerate: self.solver.accelerate,
            ..FixedPointConfig::default()
        }
    }

    pub fn shooting(&self) -> ShootingConfig {
        ShootingConfig {
            step: self.bvp.step,
            horizon: self.bvp.horizon,
            ..ShootingConfig::default()
        }
    }

    pub fn simulation(&self, threads: Option<usize>) -> SimConfig {
        SimConfig {
            n_paths: self.sim.n_paths,
            t_sim: self.sim.t_sim,
            seed: self.sim.seed,
            threads,
            keep_paths: self.sim.keep_paths,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[model]\nkind = \"black_scholes\"\nb = 0.4\nsigma = 1.0\n[params]\nrho = 0.2\nlambda = 2.0\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.solver.n_xi, 512);
        assert_eq!(c.utility.gamma, 0.5);
        assert_eq!(c.bvp.a, AllocationSpec::Keyword("optimal".into()));
        assert_eq!(c.output.dir, PathBuf::from("out"));
        c.return_model().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[solver]\nn_x = 3\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_model_fields_are_reported() {
        let c = RunConfig::parse("[model]\nkind = \"black_scholes\"\n[params]\nrho = 0.2\nlambda = 2.0\n").unwrap();
        assert!(matches!(c.return_model(), Err(CliError::Config(_))));
    }
}
