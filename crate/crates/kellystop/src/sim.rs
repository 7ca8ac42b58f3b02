//! Monte Carlo simulation of the controlled discounted wealth process with
//! stop-loss absorption, common-random-number strategy comparison, and the
//! drawdown-constrained (high-water mark) variant.
//!
//! Wealth is discounted and normalized to 1 at the period start, so the
//! risk-free drift never appears: per step the fraction alpha is frozen at
//! the step-start state and the wealth multiplied by the exact lognormal
//! increment exp((alpha (mu - r) - alpha^2 sigma^2/2) dt + alpha sigma
//! sqrt(dt) xi).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analytic::{eval_strategy, AnalyticStrategy, MarketState};
use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::surface::StrategySurface;

/// Name of the random number generator recorded in results: one ChaCha8
/// stream per path, derived from (seed, path index), so results do not
/// depend on how paths are distributed over workers.
pub const RNG_ALGORITHM: &str = "chacha8-stream-per-path";

/// Strategies whose magnitude exceeds this are treated as corrupted.
const ALPHA_LIMIT: f64 = 1e6;

/// A rule mapping the step-start state to a fraction of wealth in the
/// risky asset.
pub trait Strategy: Sync {
    fn alpha(&self, pi: f64, t: f64) -> Result<f64>;
}

/// Constant fraction (0 for all-cash, alpha_k for free Kelly, ...).
#[derive(Debug, Clone, Copy)]
pub struct ConstantFraction(pub f64);

impl Strategy for ConstantFraction {
    fn alpha(&self, _pi: f64, _t: f64) -> Result<f64> {
        Ok(self.0)
    }
}

/// Closed-form strategy adapter. The drawdown variant is not evaluable
/// here (it needs the running maximum; use [`simulate_drawdown`]).
pub struct AnalyticPolicy {
    pub strategy: AnalyticStrategy,
    pub dp: DerivedParams,
    pub period_end: f64,
}

impl Strategy for AnalyticPolicy {
    fn alpha(&self, pi: f64, t: f64) -> Result<f64> {
        eval_strategy(
            &self.strategy,
            &MarketState::new(pi, t),
            &self.dp,
            self.period_end,
        )
    }
}

/// Solved-surface strategy: alpha = kappa * alpha_k * u(z, theta), with an
/// optional cap on the scaled fraction (VaR-style ceiling). Queries left
/// of the grid clamp to the z = 0 boundary.
pub struct SurfacePolicy<'a> {
    pub surface: &'a StrategySurface,
    pub dp: DerivedParams,
    pub pi_c: f64,
    pub period_end: f64,
    /// Multiplier on the scaled strategy (1.0 = the solved strategy).
    pub kappa: f64,
    /// Optional ceiling on the scaled fraction u.
    pub u_cap: Option<f64>,
}

impl Strategy for SurfacePolicy<'_> {
    fn alpha(&self, pi: f64, t: f64) -> Result<f64> {
        if !(pi > 0.0) {
            return Err(Error::Domain(format!("pi must be positive, got {pi}")));
        }
        let z = self.pi_c / pi;
        let theta = self.dp.theta(self.period_end - t);
        let mut u = self.kappa * self.surface.value_at(z, theta);
        if let Some(cap) = self.u_cap {
            u = u.min(cap);
        }
        Ok(self.dp.alpha_k() * u)
    }
}

/// Simulation setup. `pi_c = 0` disables the stop.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Period length in years.
    pub period: f64,
    /// Stop level relative to the period-start wealth of 1.
    pub pi_c: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if !(0.0..1.0).contains(&self.pi_c) {
            return Err(Error::InvalidParameter(format!(
                "stop level must satisfy 0 <= pi_c < 1, got {}",
                self.pi_c
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the expected log growth over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Sample mean of log pi_T (nats per period).
    pub mean_log_growth: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Fraction of paths absorbed at the stop.
    pub stop_hit_rate: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// RNG algorithm identifier for reproducibility.
    pub rng: &'static str,
}

fn market_coeffs(dp: &DerivedParams) -> (f64, f64) {
    // sigma = s / alpha_k, mu - r = s^2 / alpha_k; both recover the signs
    // correctly for short-Kelly markets.
    let s = dp.sharpe();
    let ak = dp.alpha_k();
    (s * s / ak, s / ak)
}

#[inline]
fn lognormal_step(pi: f64, alpha: f64, excess: f64, sigma: f64, dt: f64, sqdt: f64, xi: f64) -> f64 {
    pi * ((alpha * excess - 0.5 * alpha * alpha * sigma * sigma) * dt
        + alpha * sigma * sqdt * xi)
        .exp()
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Per-path terminal outcomes for one strategy; the building block shared
/// by `simulate` and `compare_strategies`.
fn run_paths(
    cfg: &SimConfig,
    dp: &DerivedParams,
    strategy: &dyn Strategy,
) -> Result<Vec<(f64, bool)>> {
    cfg.validate()?;
    let (excess, sigma) = market_coeffs(dp);
    let dt = cfg.period / cfg.n_steps as f64;
    let sqdt = dt.sqrt();

    (0..cfg.n_paths)
        .into_par_iter()
        .map(|ipath| {
            let mut rng = path_rng(cfg.seed, ipath);
            let mut pi = 1.0f64;
            let mut hit = false;
            for k in 0..cfg.n_steps {
                let t = k as f64 * dt;
                let alpha = strategy.alpha(pi, t)?;
                if !alpha.is_finite() || alpha.abs() > ALPHA_LIMIT {
                    return Err(Error::Numerical(format!(
                        "strategy returned alpha = {alpha} (path {ipath}, step {k}, pi = {pi}, t = {t})"
                    )));
                }
                let xi: f64 = rng.sample(StandardNormal);
                pi = lognormal_step(pi, alpha, excess, sigma, dt, sqdt, xi);
                if !pi.is_finite() {
                    return Err(Error::Numerical(format!(
                        "wealth overflowed (path {ipath}, step {k}, alpha = {alpha})"
                    )));
                }
                if cfg.pi_c > 0.0 && pi <= cfg.pi_c {
                    // Absorbed: risk drops to zero, discounted wealth
                    // stays at the stop for the rest of the period.
                    pi = cfg.pi_c;
                    hit = true;
                    break;
                }
            }
            Ok((pi.ln(), hit))
        })
        .collect()
}

fn summarize(cfg: &SimConfig, outcomes: &[(f64, bool)]) -> SimResult {
    let n = outcomes.len();
    let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n as f64;
    let var = if n > 1 {
        outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let hits = outcomes.iter().filter(|o| o.1).count();
    SimResult {
        mean_log_growth: mean,
        std_error: (var / n as f64).sqrt(),
        stop_hit_rate: hits as f64 / n as f64,
        n_paths: n,
        seed: cfg.seed,
        rng: RNG_ALGORITHM,
    }
}

/// Simulate one strategy over independent periods and estimate the
/// expected log growth.
pub fn simulate(cfg: &SimConfig, dp: &DerivedParams, strategy: &dyn Strategy) -> Result<SimResult> {
    let outcomes = run_paths(cfg, dp, strategy)?;
    Ok(summarize(cfg, &outcomes))
}

/// As [`simulate`], additionally returning the per-path terminal log
/// wealth and stop flag (for path-level exports).
pub fn simulate_with_paths(
    cfg: &SimConfig,
    dp: &DerivedParams,
    strategy: &dyn Strategy,
) -> Result<(SimResult, Vec<(f64, bool)>)> {
    let outcomes = run_paths(cfg, dp, strategy)?;
    let result = summarize(cfg, &outcomes);
    Ok((result, outcomes))
}

/// Result of a shared-random-numbers comparison, ranked by mean log
/// growth (best first). Per-path outcomes are retained so pairwise
/// standard errors of the growth differences can be computed.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub names: Vec<String>,
    pub results: Vec<SimResult>,
    logs: Vec<Vec<f64>>,
}

impl Comparison {
    /// Mean and standard error of the per-path log-growth difference
    /// between ranked entries i and j (common random numbers make this
    /// the right error for ranking).
    pub fn paired_diff(&self, i: usize, j: usize) -> (f64, f64) {
        let a = &self.logs[i];
        let b = &self.logs[j];
        let n = a.len();
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        (mean, (var / n as f64).sqrt())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Run every strategy over identical per-path random streams and rank by
/// estimated mean log growth.
pub fn compare_strategies(
    cfg: &SimConfig,
    dp: &DerivedParams,
    strategies: &[(String, &dyn Strategy)],
) -> Result<Comparison> {
    if strategies.len() < 2 {
        return Err(Error::InvalidParameter(
            "comparison needs at least two strategies".into(),
        ));
    }
    let mut entries: Vec<(String, SimResult, Vec<f64>)> = Vec::with_capacity(strategies.len());
    for (name, strat) in strategies {
        let outcomes = run_paths(cfg, dp, *strat)?;
        let result = summarize(cfg, &outcomes);
        entries.push((
            name.clone(),
            result,
            outcomes.into_iter().map(|o| o.0).collect(),
        ));
    }
    entries.sort_by(|a, b| b.1.mean_log_growth.total_cmp(&a.1.mean_log_growth));
    let mut names = Vec::new();
    let mut results = Vec::new();
    let mut logs = Vec::new();
    for (n, r, l) in entries {
        names.push(n);
        results.push(r);
        logs.push(l);
    }
    Ok(Comparison {
        names,
        results,
        logs,
    })
}

/// Drawdown simulation outcome: the growth estimate plus the worst
/// observed constraint slack.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawdownResult {
    pub sim: SimResult,
    /// max over paths and steps of (lambda m - pi)/m, zero when the
    /// constraint held everywhere. Positive values are discretization
    /// slack: the continuous-time strategy never crosses.
    pub max_violation: f64,
}

/// Simulate the drawdown-constrained strategy
/// alpha = alpha_k (1 - lambda m / pi) with the running maximum m updated
/// each step. In `sim.stop_hit_rate` it reports the fraction of paths
/// that ever violated the floor (a discretization artifact).
pub fn simulate_drawdown(cfg: &SimConfig, dp: &DerivedParams, lambda: f64) -> Result<DrawdownResult> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "drawdown fraction must lie in [0, 1), got {lambda}"
        )));
    }
    let (excess, sigma) = market_coeffs(dp);
    let alpha_k = dp.alpha_k();
    let dt = cfg.period / cfg.n_steps as f64;
    let sqdt = dt.sqrt();

    let outcomes: Result<Vec<(f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|ipath| {
            let mut rng = path_rng(cfg.seed, ipath);
            let mut pi = 1.0f64;
            let mut m = 1.0f64;
            let mut worst = 0.0f64;
            for _ in 0..cfg.n_steps {
                let alpha = alpha_k * (1.0 - lambda * m / pi);
                let xi: f64 = rng.sample(StandardNormal);
                pi = lognormal_step(pi, alpha, excess, sigma, dt, sqdt, xi);
                if !pi.is_finite() {
                    return Err(Error::Numerical(format!(
                        "wealth overflowed on drawdown path {ipath}"
                    )));
                }
                if pi > m {
                    m = pi;
                }
                let viol = (lambda * m - pi) / m;
                if viol > worst {
                    worst = viol;
                }
            }
            Ok((pi.ln(), worst))
        })
        .collect();
    let outcomes = outcomes?;

    let n = outcomes.len();
    let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n as f64;
    let var = if n > 1 {
        outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let violated = outcomes.iter().filter(|o| o.1 > 0.0).count();
    let max_violation = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    Ok(DrawdownResult {
        sim: SimResult {
            mean_log_growth: mean,
            std_error: (var / n as f64).sqrt(),
            stop_hit_rate: violated as f64 / n as f64,
            n_paths: n,
            seed: cfg.seed,
            rng: RNG_ALGORITHM,
        },
        max_violation,
    })
}
