//! The four subcommands. Each returns the process exit status on success.

use std::fs;
use std::path::{Path, PathBuf};

use illiquid::bvp::{solve_bvp, solve_path, ConsumptionPath};
use illiquid::csv::CsvTable;
use illiquid::market::validate_assumptions;
use illiquid::nonstationary::{fixed_point_theta1_ns, solve_surface};
use illiquid::simulator::monte_carlo;
use illiquid::stationary::{fixed_point_theta1, solve_vbar};
use illiquid::{AssumptionFlag, Policy, ReturnKind, UtilityFn, ValueFunction, ValueGrid, ValueSurface};
use sha2::{Digest, Sha256};

use crate::config::{AllocationSpec, RunConfig};
use crate::{CliError, EXIT_BORDERLINE, EXIT_FAIL, EXIT_OK};

/// A parsed configuration plus the command-line overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// SHA-256 of the configuration file, hex encoded.
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl Context {
    pub fn load(
        path: &Path,
        out: Option<PathBuf>,
        seed: Option<u64>,
        threads: Option<usize>,
    ) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = RunConfig::parse(&text)?;
        if let Some(seed) = seed {
            config.sim.seed = seed;
        }
        let config_hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        let out_dir = out.unwrap_or_else(|| config.output.dir.clone());
        Ok(Self {
            config,
            config_hash,
            out_dir,
            threads,
        })
    }

    fn write(&self, name: &str, mut table: CsvTable) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.display().to_string(),
            source,
        })?;
        table.prepend_comment(format!(
            "illiquid {} config_sha256={}",
            env!("CARGO_PKG_VERSION"),
            self.config_hash
        ));
        let path = self.out_dir.join(name);
        table.write(&path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }
}

/// Stationary or time-dependent solution, by the kind of return model.
#[derive(Debug, Clone)]
pub enum Solved {
    Grid(ValueGrid),
    Surface(ValueSurface),
}

impl Solved {
    pub fn value(&self) -> &dyn ValueFunction {
        match self {
            Solved::Grid(g) => g,
            Solved::Surface(s) => s,
        }
    }

    fn table(&self, stride: usize) -> CsvTable {
        match self {
            Solved::Grid(g) => g.to_csv(),
            Solved::Surface(s) => s.to_csv(stride),
        }
    }

    fn residual(&self) -> f64 {
        match self {
            Solved::Grid(g) => g.residual(),
            Solved::Surface(s) => s.residual(),
        }
    }
}

pub fn solve_value(cfg: &RunConfig) -> Result<Solved, CliError> {
    let model = cfg.return_model()?;
    let params = cfg.market_params()?;
    let u = cfg.power_utility()?;
    Ok(match (model.is_stationary(), cfg.solver.theta1) {
        (true, None) => Solved::Grid(fixed_point_theta1(
            &model,
            &params,
            &u,
            &cfg.grid(),
            &cfg.fixed_point(),
        )?),
        (true, Some(theta)) => Solved::Grid(solve_vbar(&model, &params, &u, theta, &cfg.grid())?),
        (false, None) => Solved::Surface(fixed_point_theta1_ns(
            &model,
            &params,
            &u,
            &cfg.surface(),
            &cfg.fixed_point(),
        )?),
        (false, Some(theta)) => Solved::Surface(solve_surface(&model, &params, &u, theta, &cfg.surface())?),
    })
}

pub fn cmd_validate(ctx: &Context) -> Result<u8, CliError> {
    let cfg = &ctx.config;
    let report = validate_assumptions(&cfg.return_model()?, &cfg.market_params()?, &cfg.power_utility()?);
    println!("{report}");
    Ok(match report.flag {
        AssumptionFlag::Pass => EXIT_OK,
        AssumptionFlag::Borderline => EXIT_BORDERLINE,
        AssumptionFlag::Fail => EXIT_FAIL,
    })
}

pub fn cmd_solve(ctx: &Context) -> Result<u8, CliError> {
    let solved = solve_value(&ctx.config)?;
    let v = solved.value();
    let path = ctx.write("value.csv", solved.table(ctx.config.solver.csv_stride))?;
    println!("theta1   = {:.12}", v.theta1());
    println!("xi_star  = {:.12}", v.xi_star());
    println!(
        "pi_star  = {:.12}",
        if v.xi_star().is_finite() {
            1.0 / v.xi_star()
        } else {
            0.0
        }
    );
    println!("residual = {:.3e}", solved.residual());
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn resolve_allocation(alloc: &AllocationSpec, x0: f64, xi_star: f64) -> Result<f64, CliError> {
    match alloc {
        AllocationSpec::Value(a) => Ok(*a),
        AllocationSpec::Keyword(k) if k == "optimal" => Ok(if xi_star.is_finite() { x0 / xi_star } else { 0.0 }),
        AllocationSpec::Keyword(k) => Err(CliError::Config(format!(
            "bvp.a must be a number or \"optimal\", got {k:?}"
        ))),
    }
}

/// `s,Y,c,p,Y0_baseline` without the value-function columns.
fn bare_path_table(p: &ConsumptionPath) -> CsvTable {
    let mut t = CsvTable::new(["s", "Y", "c", "p", "Y0_baseline"]);
    t.comment(format!("theta1={:.16e}", p.theta1()));
    t.comment(format!(
        "x0={:.16e} a={:.16e} floor={:.16e} class={} crossings={}",
        p.x0(),
        p.allocation(),
        p.floor(),
        p.class(),
        p.crossings()
    ));
    let costate = p.costate();
    let base = p.baseline();
    for k in 0..p.s().len() {
        t.push_row(vec![p.s()[k], p.wealth()[k], p.rate()[k], costate[k], base[k]]);
    }
    t
}

pub fn cmd_path(ctx: &Context) -> Result<u8, CliError> {
    let cfg = &ctx.config;
    let solved = solve_value(cfg)?;
    let v = solved.value();
    let x0 = match cfg.bvp.x0 {
        Some(x) => x,
        None if v.xi_star().is_finite() => v.xi_star(),
        None => 1.0,
    };
    let a = resolve_allocation(&cfg.bvp.a, x0, v.xi_star())?;
    let shooting = cfg.shooting();
    let path = solve_bvp(v, x0, a, &shooting)?;
    let written = ctx.write("path.csv", path.to_csv(v)?)?;
    let gap = path.optimality_gap(v)?;
    let fb = path.feedback_mismatch(v)?;
    let max = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    println!("x0 = {x0:.12}, a = {a:.12}, floor = {:.12}", path.floor());
    println!(
        "c0 = {:.12} ({}, wealth at floor by s = {:.4})",
        path.initial_rate(),
        path.class(),
        path.end_time()
    );
    println!("crossings with the no-trade path: {}", path.crossings());
    println!("largest violation of Y >= Y0: {:.3e}", path.baseline_violation());
    println!(
        "max |feedback mismatch| = {:.3e}, max |Fenchel gap| / U(c0) = {:.3e}",
        max(&fb),
        max(&gap) / v.utility().value(path.initial_rate())
    );
    println!("wrote {}", written.display());

    if let Some(t0) = cfg.bvp.frozen_t0 {
        let model = v.model();
        if !matches!(model.kind(), ReturnKind::BlackScholes { .. }) {
            return Err(CliError::Config("bvp.frozen_t0 needs a black_scholes model".into()));
        }
        let frozen = model.frozen_at(t0)?;
        let fpath = solve_path(
            &frozen,
            v.params(),
            v.utility(),
            v.theta1(),
            x0,
            a,
            path.horizon(),
            &shooting,
        )?;
        let fw = ctx.write("path_frozen.csv", bare_path_table(&fpath))?;
        println!(
            "frozen law at t0 = {t0}: c0 = {:.12} (time-dependent law: {:.12})",
            fpath.initial_rate(),
            path.initial_rate()
        );
        println!("wrote {}", fw.display());
    }
    Ok(EXIT_OK)
}

pub fn cmd_simulate(ctx: &Context) -> Result<u8, CliError> {
    let cfg = &ctx.config;
    let solved = solve_value(cfg)?;
    let v = solved.value();
    let policy = Policy::new(v, &cfg.shooting())?;
    let sim = cfg.simulation(ctx.threads);
    let r = monte_carlo(v, &policy, cfg.sim.x0, &sim)?;
    let written = ctx.write("sim.csv", r.to_csv())?;
    println!("{policy}");
    println!(
        "mean realized utility = {:.8} +- {:.2e} (n = {}, T = {:.4})",
        r.mean, r.std_error, r.n_paths, r.t_sim
    );
    println!(
        "theta1 x0^gamma = {:.8}, |difference| = {:.3e}, 3 SE + truncation bound = {:.3e}",
        r.value_prediction,
        r.value_error(),
        3.0 * r.std_error + r.truncation_bound
    );
    println!(
        "constant-rate baseline = {:.8} +- {:.2e} (paired SE {:.2e})",
        r.baseline_mean, r.baseline_std_error, r.difference_std_error
    );
    println!("wrote {}", written.display());
    if cfg.sim.keep_paths {
        let pw = ctx.write("sim_paths.csv", r.paths_csv())?;
        println!("wrote {}", pw.display());
    }
    Ok(EXIT_OK)
}
