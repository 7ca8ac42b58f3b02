//! Command-line front end: solve/figure/simulate/compare/check/
//! reconstruct-value/multi-asset subcommands over the library.
//!
//! Configuration comes from flags, optionally backed by a flat
//! `key = value` file (keys mirror the flag names); flags override file
//! values. All numeric output uses 17-significant-digit serialization, so
//! repeated runs with the same config and seed are byte-identical.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::analytic::AnalyticStrategy;
use crate::checks;
use crate::error::{Error, Result};
use crate::export;
use crate::grid::Grid;
use crate::multi::{apply_var_cap, kelly_portfolio_stats, kelly_weights, scale_to_multi, MultiAssetParams};
use crate::params::{DerivedParams, MarketParams};
use crate::pde::{solve_stop_loss, StopLossProblem};
use crate::sim::{
    compare_strategies, simulate_drawdown, simulate_with_paths, AnalyticPolicy, ConstantFraction,
    SimConfig, Strategy, SurfacePolicy,
};
use crate::surface::StrategySurface;
use crate::value::reconstruct_value;

const DEFAULT_SHARPE: f64 = 1.0;
const DEFAULT_SIGMA: f64 = 0.10;
const DEFAULT_PERIOD: &str = "1m";
const DEFAULT_STOP_DELTA: f64 = 0.05;
const DEFAULT_NZ: usize = 200;
const DEFAULT_PATHS: usize = 10_000;
const DEFAULT_SEED: u64 = 42;
/// Default simulation step density: 250 steps per month.
const STEPS_PER_MONTH: f64 = 250.0;

#[derive(Parser)]
#[command(
    name = "kellystop",
    version,
    about = "Kelly growth-optimal strategy under a periodically reset stop-loss",
    after_help = "Defaults: --sharpe 1.0 --sigma 0.10 --r 0 --period 1m --stop-delta 0.05 \
                  --nz 200 --paths 10000 --seed 42. KELLYSTOP_THREADS caps the worker count."
)]
struct Cli {
    /// Flat key=value config file mirroring the flag names; flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the stop-loss strategy surface and export CSV/JSON.
    Solve(CommonOpts),
    /// Emit plot-ready data tables (figures 1a, 1b, 2a, 2b).
    Figure(FigureOpts),
    /// Monte Carlo expected-log-growth estimate for one strategy.
    Simulate(SimulateOpts),
    /// Rank strategies under common random numbers.
    Compare(CompareOpts),
    /// Run the oracle/residual validation suite.
    Check,
    /// Reconstruct the value curve from a solved surface plane.
    ReconstructValue(ReconstructOpts),
    /// Multi-asset Kelly weights and portfolio statistics.
    MultiAsset(MultiOpts),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Risky-asset drift (1/year).
    #[arg(long)]
    mu: Option<f64>,
    /// Risk-free rate (1/year).
    #[arg(long)]
    r: Option<f64>,
    /// Risky-asset volatility (1/sqrt(year)).
    #[arg(long)]
    sigma: Option<f64>,
    /// Ex-ante Sharpe ratio; with --sigma it implies mu = r + sharpe*sigma.
    #[arg(long)]
    sharpe: Option<f64>,
    /// Period length: e.g. 1m, 2w, 10d, 0.5y (bare numbers are years).
    #[arg(long)]
    period: Option<String>,
    /// Stop distance below period-start wealth: pi_c = 1 - delta.
    #[arg(long)]
    stop_delta: Option<f64>,
    /// Interior z-node count.
    #[arg(long)]
    nz: Option<usize>,
    /// Explicit theta step (default: largest stable step).
    #[arg(long)]
    dtheta: Option<f64>,
    /// Solve horizon in scaled time (default: period/tau).
    #[arg(long)]
    theta_max: Option<f64>,
    /// Output path base or file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict surface export to one format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

#[derive(Args)]
struct FigureOpts {
    /// Which figure data to emit: 1a, 1b, 2a, or 2b.
    #[arg(long)]
    which: Option<String>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SimulateOpts {
    /// Strategy: none|kelly|crra:<eta>|terminal-stop|browne:<b>|
    /// drawdown:<lambda>|surface|surface-capped|kappa:<x>.
    #[arg(long)]
    strategy: Option<String>,
    /// Path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Steps per period (default: 250 per month).
    #[arg(long)]
    steps: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Volatility ceiling for capped strategies.
    #[arg(long)]
    var_cap: Option<f64>,
    /// Optional per-path CSV (path, log_pi_t, stopped).
    #[arg(long)]
    paths_csv: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct CompareOpts {
    /// Comma-separated strategy list (see simulate --strategy).
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    var_cap: Option<f64>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct ReconstructOpts {
    /// Theta plane to reconstruct from (default: the solve horizon).
    #[arg(long)]
    theta: Option<f64>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct MultiOpts {
    /// Comma-separated excess drifts, e.g. 0.1,0.2.
    #[arg(long)]
    excess: Option<String>,
    /// Covariance rows separated by ';', entries by ',':
    /// e.g. "0.04,0;0,0.04".
    #[arg(long)]
    cov: Option<String>,
    /// Scalar fraction of the Kelly portfolio to expand into allocations.
    #[arg(long)]
    u: Option<f64>,
    /// Volatility ceiling applied to u before scaling.
    #[arg(long)]
    var_cap: Option<f64>,
    #[command(flatten)]
    common: CommonOpts,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return 0;
            }
            let first_line = e.to_string().lines().next().unwrap_or("bad usage").to_string();
            eprintln!("error: usage: {first_line}");
            return 2;
        }
    };
    init_thread_pool();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', "; ");
            eprintln!("error: {}: {}", e.kind(), msg);
            1
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("KELLYSTOP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Parse a period length: trailing y/m/w/d selects the unit (years,
/// months = 1/12 yr, weeks = 7/365 yr, days = 1/365 yr); a bare number is
/// years.
pub fn parse_period(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Config("empty period".into()));
    }
    let (num, unit): (&str, char) = match s.chars().last().unwrap() {
        c @ ('y' | 'm' | 'w' | 'd') => (&s[..s.len() - 1], c),
        _ => (s, 'y'),
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse period '{s}'")))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("period must be positive, got '{s}'")));
    }
    Ok(match unit {
        'y' => v,
        'm' => v / 12.0,
        'w' => v * 7.0 / 365.0,
        'd' => v / 365.0,
        _ => unreachable!(),
    })
}

/// Flat key=value config file; '#' starts a comment.
fn load_config(path: Option<&Path>) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    let Some(path) = path else {
        return Ok(map);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "config line {} is not 'key = value': '{raw}'",
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    file: HashMap<String, String>,
}

impl Resolver {
    fn get<T: std::str::FromStr>(&self, key: &str, cli: Option<T>) -> Result<Option<T>> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{v}'"))),
            None => Ok(None),
        }
    }
}

/// Everything the solver/simulator pipelines need, resolved from flags,
/// config file, and defaults.
struct RunConfig {
    market: MarketParams,
    dp: DerivedParams,
    period_years: f64,
    pi_c: f64,
    nz: usize,
    dtheta: Option<f64>,
    theta_max: f64,
    out: Option<PathBuf>,
    format: Option<String>,
}

impl RunConfig {
    fn resolve(r: &Resolver, c: &CommonOpts) -> Result<Self> {
        let mu = r.get("mu", c.mu)?;
        let rate = r.get("r", c.r)?.unwrap_or(0.0);
        let sigma = r.get("sigma", c.sigma)?.unwrap_or(DEFAULT_SIGMA);
        let sharpe = r.get("sharpe", c.sharpe)?;
        let market = match (mu, sharpe) {
            (Some(mu), None) => MarketParams::new(mu, rate, sigma)?,
            (Some(mu), Some(s)) => {
                // Explicit drift wins; a redundant sharpe must agree.
                let m = MarketParams::new(mu, rate, sigma)?;
                if (m.derive().sharpe() - s).abs() > 1e-12 * s.abs().max(1.0) {
                    return Err(Error::Config(
                        "both --mu and --sharpe given and they disagree".into(),
                    ));
                }
                m
            }
            (None, Some(s)) => MarketParams::from_sharpe(s, sigma, rate)?,
            (None, None) => MarketParams::from_sharpe(DEFAULT_SHARPE, sigma, rate)?,
        };
        let dp = market.derive();

        let period_str = r
            .get("period", c.period.clone())?
            .unwrap_or_else(|| DEFAULT_PERIOD.to_string());
        let period_years = parse_period(&period_str)?;

        let stop_delta = r.get("stop-delta", c.stop_delta)?.unwrap_or(DEFAULT_STOP_DELTA);
        if !(stop_delta > 0.0 && stop_delta < 1.0) {
            return Err(Error::Config(format!(
                "stop-delta must lie in (0, 1), got {stop_delta}"
            )));
        }

        let nz = r.get("nz", c.nz)?.unwrap_or(DEFAULT_NZ);
        let dtheta = r.get("dtheta", c.dtheta)?;
        let theta_max = match r.get("theta-max", c.theta_max)? {
            Some(t) => t,
            None => dp.theta(period_years),
        };
        if !(theta_max > 0.0) {
            return Err(Error::Config(format!(
                "theta-max must be positive, got {theta_max}"
            )));
        }

        Ok(Self {
            market,
            dp,
            period_years,
            pi_c: 1.0 - stop_delta,
            nz,
            dtheta,
            theta_max,
            out: r.get("out", c.out.clone())?,
            format: r.get("format", c.format.clone())?,
        })
    }

    /// The stop-loss boundary conditions assume u in [0, 1], which needs a
    /// positive risk premium.
    fn require_long_kelly(&self) -> Result<()> {
        if self.dp.alpha_k() <= 0.0 {
            return Err(Error::Domain(
                "the stop-loss solver requires mu > r (positive risk premium)".into(),
            ));
        }
        Ok(())
    }

    fn build_grid(&self) -> Result<Grid> {
        match self.dtheta {
            Some(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("dtheta must be positive, got {dt}")));
                }
                let ntheta = (self.theta_max / dt).ceil().max(1.0) as usize;
                Grid::new(self.nz, dt, ntheta)
            }
            None => Grid::with_horizon(self.nz, self.theta_max),
        }
    }

    fn solve_surface(&self) -> Result<StrategySurface> {
        self.require_long_kelly()?;
        solve_stop_loss(&StopLossProblem::new(self.build_grid()?))
    }

    fn default_steps(&self) -> usize {
        (STEPS_PER_MONTH * 12.0 * self.period_years).round().max(1.0) as usize
    }

    fn out_base(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn execute(cli: Cli) -> Result<()> {
    let resolver = Resolver {
        file: load_config(cli.config.as_deref())?,
    };
    match cli.cmd {
        Cmd::Solve(opts) => cmd_solve(&resolver, &opts),
        Cmd::Figure(opts) => cmd_figure(&resolver, &opts),
        Cmd::Simulate(opts) => cmd_simulate(&resolver, &opts),
        Cmd::Compare(opts) => cmd_compare(&resolver, &opts),
        Cmd::Check => cmd_check(),
        Cmd::ReconstructValue(opts) => cmd_reconstruct(&resolver, &opts),
        Cmd::MultiAsset(opts) => cmd_multi(&resolver, &opts),
    }
}

fn cmd_solve(r: &Resolver, opts: &CommonOpts) -> Result<()> {
    let cfg = RunConfig::resolve(r, opts)?;
    let surface = cfg.solve_surface()?;
    let base = cfg.out_base("surface");
    let fmt = cfg.format.as_deref();

    if fmt != Some("json") {
        let path = base.with_extension("csv");
        export::write_surface_csv(&mut create(&path)?, &surface)?;
        println!("wrote {}", path.display());
    }
    if fmt != Some("csv") {
        let path = base.with_extension("json");
        export::write_surface_json(&mut create(&path)?, &surface, &cfg.market, &cfg.dp, cfg.pi_c)?;
        println!("wrote {}", path.display());
    }
    println!(
        "solved nz={} ntheta={} theta_max={} stability_ratio={}",
        surface.grid().nz(),
        surface.grid().ntheta(),
        export::fmt_f64(surface.grid().theta_max()),
        export::fmt_f64(surface.grid().stability_ratio()),
    );
    Ok(())
}

/// The four delta-slices of the one-month figure.
const FIG1B_DELTAS: [f64; 4] = [0.01, 0.05, 0.10, 0.20];
/// Theta values of the asymptote figure.
const FIG2A_THETAS: [f64; 4] = [0.01, 0.1, 0.5, 2.0];
const FIG2B_Z: f64 = 0.85;

fn cmd_figure(r: &Resolver, opts: &FigureOpts) -> Result<()> {
    let which = r
        .get("which", opts.which.clone())?
        .ok_or_else(|| Error::Config("figure needs --which {1a|1b|2a|2b}".into()))?;
    let mut cfg = RunConfig::resolve(r, &opts.common)?;

    match which.as_str() {
        "1a" => {
            // Full (z, theta, u) table on the unit square.
            cfg.theta_max = 1.0;
            let surface = cfg.solve_surface()?;
            let path = cfg.out_base("fig1a").with_extension("csv");
            export::write_surface_csv(&mut create(&path)?, &surface)?;
            println!("wrote {}", path.display());
        }
        "1b" => {
            // u vs weeks-to-reset at four distances above the stop.
            let surface = cfg.solve_surface()?;
            let path = cfg.out_base("fig1b").with_extension("csv");
            let mut w = create(&path)?;
            writeln!(
                w,
                "weeks_to_reset,u_delta_1pct,u_delta_5pct,u_delta_10pct,u_delta_20pct"
            )?;
            let weeks_per_year = 365.0 / 7.0;
            for &theta in surface.thetas() {
                let weeks = theta * cfg.dp.tau() * weeks_per_year;
                let mut row = vec![export::fmt_f64(weeks)];
                for &delta in &FIG1B_DELTAS {
                    row.push(export::fmt_f64(surface.value_at(1.0 - delta, theta)));
                }
                writeln!(w, "{}", row.join(","))?;
            }
            println!("wrote {}", path.display());
        }
        "2a" => {
            // u vs z at fixed thetas, plus the exact 1 - z reference.
            cfg.theta_max = cfg.theta_max.max(*FIG2A_THETAS.last().unwrap());
            let surface = cfg.solve_surface()?;
            let path = cfg.out_base("fig2a").with_extension("csv");
            let mut w = create(&path)?;
            writeln!(
                w,
                "z,u_theta_0p01,u_theta_0p1,u_theta_0p5,u_theta_2,ref_one_minus_z"
            )?;
            let grid = surface.grid();
            for i in 0..grid.n_nodes() {
                let z = grid.z_node(i);
                let mut row = vec![export::fmt_f64(z)];
                for &theta in &FIG2A_THETAS {
                    row.push(export::fmt_f64(surface.value_at(z, theta)));
                }
                row.push(export::fmt_f64(1.0 - z));
                writeln!(w, "{}", row.join(","))?;
            }
            println!("wrote {}", path.display());
        }
        "2b" => {
            // u vs theta at z = 0.85, plus the asymptote.
            cfg.theta_max = cfg.theta_max.max(2.0);
            let surface = cfg.solve_surface()?;
            let path = cfg.out_base("fig2b").with_extension("csv");
            let mut w = create(&path)?;
            writeln!(w, "theta,u,ref_one_minus_z")?;
            for &theta in surface.thetas() {
                writeln!(
                    w,
                    "{},{},{}",
                    export::fmt_f64(theta),
                    export::fmt_f64(surface.value_at(FIG2B_Z, theta)),
                    export::fmt_f64(1.0 - FIG2B_Z)
                )?;
            }
            println!("wrote {}", path.display());
        }
        other => {
            return Err(Error::Config(format!(
                "unknown figure id '{other}' (expected 1a, 1b, 2a, or 2b)"
            )));
        }
    }
    Ok(())
}

/// Parsed strategy token.
enum StrategySpec {
    Zero,
    Kelly,
    Crra(f64),
    TerminalStop,
    Browne(f64),
    Drawdown(f64),
    Surface { kappa: f64, capped: bool },
}

fn parse_strategy(token: &str) -> Result<StrategySpec> {
    let t = token.trim();
    let parse_param = |t: &str, prefix: &str| -> Result<f64> {
        t[prefix.len()..]
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse parameter in '{t}'")))
    };
    Ok(match t {
        "none" | "zero" => StrategySpec::Zero,
        "kelly" => StrategySpec::Kelly,
        "terminal-stop" => StrategySpec::TerminalStop,
        "surface" | "solved" => StrategySpec::Surface {
            kappa: 1.0,
            capped: false,
        },
        "surface-capped" | "capped" => StrategySpec::Surface {
            kappa: 1.0,
            capped: true,
        },
        "quarter" => StrategySpec::Surface {
            kappa: 0.25,
            capped: false,
        },
        "half" => StrategySpec::Surface {
            kappa: 0.5,
            capped: false,
        },
        "double" => StrategySpec::Surface {
            kappa: 2.0,
            capped: false,
        },
        _ if t.starts_with("crra:") => StrategySpec::Crra(parse_param(t, "crra:")?),
        _ if t.starts_with("browne:") => StrategySpec::Browne(parse_param(t, "browne:")?),
        _ if t.starts_with("drawdown:") => StrategySpec::Drawdown(parse_param(t, "drawdown:")?),
        _ if t.starts_with("kappa:") => StrategySpec::Surface {
            kappa: parse_param(t, "kappa:")?,
            capped: false,
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown strategy '{t}' (try none, kelly, crra:<eta>, terminal-stop, \
                 browne:<b>, drawdown:<lambda>, surface, surface-capped, kappa:<x>)"
            )));
        }
    })
}

fn spec_needs_surface(spec: &StrategySpec) -> bool {
    matches!(spec, StrategySpec::Surface { .. })
}

fn build_strategy<'a>(
    spec: &StrategySpec,
    cfg: &RunConfig,
    surface: Option<&'a StrategySurface>,
    var_cap: Option<f64>,
) -> Result<Box<dyn Strategy + 'a>> {
    Ok(match *spec {
        StrategySpec::Zero => Box::new(ConstantFraction(0.0)),
        StrategySpec::Kelly => Box::new(ConstantFraction(cfg.dp.alpha_k())),
        StrategySpec::Crra(eta) => Box::new(AnalyticPolicy {
            strategy: AnalyticStrategy::Crra { eta },
            dp: cfg.dp,
            period_end: cfg.period_years,
        }),
        StrategySpec::TerminalStop => Box::new(AnalyticPolicy {
            strategy: AnalyticStrategy::TerminalStop { pi_c: cfg.pi_c },
            dp: cfg.dp,
            period_end: cfg.period_years,
        }),
        StrategySpec::Browne(b) => Box::new(AnalyticPolicy {
            strategy: AnalyticStrategy::BrowneTarget { b },
            dp: cfg.dp,
            period_end: cfg.period_years,
        }),
        StrategySpec::Drawdown(_) => {
            return Err(Error::Config(
                "drawdown runs through its own simulator (simulate --strategy drawdown:<lambda>)"
                    .into(),
            ));
        }
        StrategySpec::Surface { kappa, capped } => {
            let u_cap = if capped {
                let sigma_max = var_cap.ok_or_else(|| {
                    Error::Config("surface-capped needs --var-cap <sigma_max>".into())
                })?;
                Some(apply_var_cap(1.0, sigma_max, cfg.dp.sharpe()))
            } else {
                None
            };
            Box::new(SurfacePolicy {
                surface: surface.expect("surface solved for surface-backed strategy"),
                dp: cfg.dp,
                pi_c: cfg.pi_c,
                period_end: cfg.period_years,
                kappa,
                u_cap,
            })
        }
    })
}

fn cmd_simulate(r: &Resolver, opts: &SimulateOpts) -> Result<()> {
    let cfg = RunConfig::resolve(r, &opts.common)?;
    let token = r
        .get("strategy", opts.strategy.clone())?
        .unwrap_or_else(|| "surface".to_string());
    let spec = parse_strategy(&token)?;
    let sim_cfg = SimConfig {
        n_paths: r.get("paths", opts.paths)?.unwrap_or(DEFAULT_PATHS),
        n_steps: r.get("steps", opts.steps)?.unwrap_or_else(|| cfg.default_steps()),
        seed: r.get("seed", opts.seed)?.unwrap_or(DEFAULT_SEED),
        period: cfg.period_years,
        pi_c: match spec {
            // The stop applies to the stop-aware strategies; the
            // unconstrained references run without absorption.
            StrategySpec::Zero | StrategySpec::Kelly | StrategySpec::Crra(_) => 0.0,
            StrategySpec::Browne(_) | StrategySpec::Drawdown(_) => 0.0,
            _ => cfg.pi_c,
        },
    };
    let var_cap = r.get("var-cap", opts.var_cap)?;

    let (result, paths) = if let StrategySpec::Drawdown(lambda) = spec {
        let dd = simulate_drawdown(&sim_cfg, &cfg.dp, lambda)?;
        println!(
            "max drawdown-constraint violation: {}",
            export::fmt_f64(dd.max_violation)
        );
        (dd.sim, Vec::new())
    } else {
        let surface = if spec_needs_surface(&spec) {
            Some(cfg.solve_surface()?)
        } else {
            None
        };
        let strategy = build_strategy(&spec, &cfg, surface.as_ref(), var_cap)?;
        simulate_with_paths(&sim_cfg, &cfg.dp, strategy.as_ref())?
    };

    let path = cfg.out_base("simresult").with_extension("json");
    export::write_sim_json(
        &mut create(&path)?,
        &result,
        &token,
        sim_cfg.n_steps,
        sim_cfg.period,
        sim_cfg.pi_c,
    )?;
    println!("wrote {}", path.display());
    println!(
        "mean_log_growth={} std_error={} stop_hit_rate={}",
        export::fmt_f64(result.mean_log_growth),
        export::fmt_f64(result.std_error),
        export::fmt_f64(result.stop_hit_rate),
    );

    if let Some(paths_csv) = &opts.paths_csv {
        if paths.is_empty() {
            return Err(Error::Config(
                "per-path export is not available for the drawdown simulator".into(),
            ));
        }
        let mut w = create(paths_csv)?;
        writeln!(w, "path,log_pi_t,stopped")?;
        for (i, (lp, hit)) in paths.iter().enumerate() {
            writeln!(w, "{},{},{}", i, export::fmt_f64(*lp), u8::from(*hit))?;
        }
        println!("wrote {}", paths_csv.display());
    }
    Ok(())
}

fn cmd_compare(r: &Resolver, opts: &CompareOpts) -> Result<()> {
    let cfg = RunConfig::resolve(r, &opts.common)?;
    let list = r
        .get("strategies", opts.strategies.clone())?
        .unwrap_or_else(|| "surface,half,double".to_string());
    let tokens: Vec<String> = list
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if tokens.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two strategies (comma-separated)".into(),
        ));
    }
    let specs: Vec<StrategySpec> = tokens
        .iter()
        .map(|t| parse_strategy(t))
        .collect::<Result<_>>()?;
    if specs.iter().any(|s| matches!(s, StrategySpec::Drawdown(_))) {
        return Err(Error::Config(
            "drawdown cannot join a shared-randomness comparison (it carries its own state)"
                .into(),
        ));
    }

    let sim_cfg = SimConfig {
        n_paths: r.get("paths", opts.paths)?.unwrap_or(DEFAULT_PATHS),
        n_steps: r.get("steps", opts.steps)?.unwrap_or_else(|| cfg.default_steps()),
        seed: r.get("seed", opts.seed)?.unwrap_or(DEFAULT_SEED),
        period: cfg.period_years,
        pi_c: cfg.pi_c,
    };
    let var_cap = r.get("var-cap", opts.var_cap)?;

    let surface = if specs.iter().any(spec_needs_surface) {
        Some(cfg.solve_surface()?)
    } else {
        None
    };
    let strategies: Vec<Box<dyn Strategy + '_>> = specs
        .iter()
        .map(|s| build_strategy(s, &cfg, surface.as_ref(), var_cap))
        .collect::<Result<_>>()?;
    let named: Vec<(String, &dyn Strategy)> = tokens
        .iter()
        .cloned()
        .zip(strategies.iter().map(|b| b.as_ref()))
        .collect();

    let cmp = compare_strategies(&sim_cfg, &cfg.dp, &named)?;
    let path = cfg.out_base("comparison").with_extension("csv");
    export::write_comparison_csv(&mut create(&path)?, &cmp)?;
    println!("wrote {}", path.display());
    for i in 0..cmp.len() {
        println!(
            "{} {} mean={}",
            i + 1,
            cmp.names[i],
            export::fmt_f64(cmp.results[i].mean_log_growth)
        );
    }
    Ok(())
}

fn cmd_check() -> Result<()> {
    let outcomes = checks::run_all();
    let mut failed = 0usize;
    for o in &outcomes {
        println!(
            "{} {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} oracle checks failed")));
    }
    Ok(())
}

fn cmd_reconstruct(r: &Resolver, opts: &ReconstructOpts) -> Result<()> {
    let cfg = RunConfig::resolve(r, &opts.common)?;
    let surface = cfg.solve_surface()?;
    let theta = r
        .get("theta", opts.theta)?
        .unwrap_or_else(|| surface.theta_max());

    // Anchor convention: J = 0 at the z = 1/2 node (mid-grid).
    let anchor_pi = cfg.pi_c / 0.5;
    let curve = reconstruct_value(&surface, theta, cfg.pi_c, (anchor_pi, 0.0))?;
    if let Some(zt) = curve.truncated_at_z {
        println!(
            "domain truncated at z = {} (strategy at floor)",
            export::fmt_f64(zt)
        );
    }

    let path = cfg.out_base("value_curve").with_extension("csv");
    export::write_value_curve_csv(&mut create(&path)?, &curve)?;
    println!("wrote {} ({} nodes)", path.display(), curve.pi.len());
    Ok(())
}

fn cmd_multi(r: &Resolver, opts: &MultiOpts) -> Result<()> {
    let excess_str = r
        .get("excess", opts.excess.clone())?
        .ok_or_else(|| Error::Config("multi-asset needs --excess, e.g. 0.1,0.2".into()))?;
    let cov_str = r
        .get("cov", opts.cov.clone())?
        .ok_or_else(|| Error::Config("multi-asset needs --cov, e.g. \"0.04,0;0,0.04\"".into()))?;

    let excess: Vec<f64> = excess_str
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse excess entry '{v}'")))
        })
        .collect::<Result<_>>()?;
    let cov: Vec<Vec<f64>> = cov_str
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("cannot parse covariance entry '{v}'")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mp = MultiAssetParams::new(excess, cov)?;
    let weights = kelly_weights(&mp)?;
    let stats = kelly_portfolio_stats(&mp)?;

    let u = r.get("u", opts.u)?;
    let var_cap = r.get("var-cap", opts.var_cap)?;
    let scaled = match u {
        Some(mut u) => {
            if let Some(sigma_max) = var_cap {
                // The Kelly portfolio's Sharpe ratio equals its volatility.
                u = apply_var_cap(u, sigma_max, stats.sigma_k());
            }
            Some((u, scale_to_multi(u, &weights)))
        }
        None => None,
    };

    let base = cfg_out_base(r, &opts.common);
    let path = base.with_extension("json");
    export::write_multi_json(
        &mut create(&path)?,
        &weights,
        &stats,
        scaled.as_ref().map(|(u, a)| (*u, a.as_slice())),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cfg_out_base(r: &Resolver, c: &CommonOpts) -> PathBuf {
    r.get("out", c.out.clone())
        .ok()
        .flatten()
        .unwrap_or_else(|| PathBuf::from("multi"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_units() {
        assert!((parse_period("1m").unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((parse_period("2w").unwrap() - 14.0 / 365.0).abs() < 1e-15);
        assert!((parse_period("10d").unwrap() - 10.0 / 365.0).abs() < 1e-15);
        assert!((parse_period("0.5y").unwrap() - 0.5).abs() < 1e-15);
        assert!((parse_period("2").unwrap() - 2.0).abs() < 1e-15);
        assert!(parse_period("-1m").is_err());
        assert!(parse_period("abc").is_err());
        assert!(parse_period("").is_err());
    }

    #[test]
    fn strategy_tokens() {
        assert!(matches!(parse_strategy("none").unwrap(), StrategySpec::Zero));
        assert!(matches!(parse_strategy("kelly").unwrap(), StrategySpec::Kelly));
        assert!(matches!(
            parse_strategy("kappa:0.75").unwrap(),
            StrategySpec::Surface { capped: false, .. }
        ));
        assert!(matches!(
            parse_strategy("surface-capped").unwrap(),
            StrategySpec::Surface { capped: true, .. }
        ));
        match parse_strategy("crra:-1.5").unwrap() {
            StrategySpec::Crra(eta) => assert_eq!(eta, -1.5),
            _ => panic!(),
        }
        assert!(parse_strategy("bogus").is_err());
    }

    #[test]
    fn config_file_parsing() {
        let dir = std::env::temp_dir().join("kellystop_cli_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        fs::write(&path, "mu = 0.08\nr = 0.02 # comment\n\n# full-line comment\nnz = 50\n")
            .unwrap();
        let map = load_config(Some(&path)).unwrap();
        assert_eq!(map.get("mu").unwrap(), "0.08");
        assert_eq!(map.get("r").unwrap(), "0.02");
        assert_eq!(map.get("nz").unwrap(), "50");
        fs::write(&path, "not a pair\n").unwrap();
        assert!(load_config(Some(&path)).is_err());
    }

    #[test]
    fn resolver_precedence() {
        let mut file = HashMap::new();
        file.insert("nz".to_string(), "77".to_string());
        let r = Resolver { file };
        // CLI wins over file.
        assert_eq!(r.get("nz", Some(10usize)).unwrap(), Some(10));
        // File fills in when CLI absent.
        assert_eq!(r.get::<usize>("nz", None).unwrap(), Some(77));
        // Absent everywhere.
        assert_eq!(r.get::<usize>("paths", None).unwrap(), None);
    }
}
