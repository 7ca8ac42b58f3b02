//! Oracle and residual check suite behind the `check` subcommand: every
//! residual operator is exercised against every applicable closed-form
//! solution, plus the transform identities and the multi-asset identities.

use crate::analytic::{
    eval_strategy, eval_value, separable_f, separable_ode_residual, AnalyticStrategy, MarketState,
};
use crate::multi::{apply_var_cap, kelly_portfolio_stats, kelly_weights, MultiAssetParams};
use crate::normal;
use crate::params::{DerivedParams, MarketParams};
use crate::pde::{pde_residual_alpha, pde_residual_gamma};
use crate::value::{
    hjb_residual, legendre_transform, lt06_residual, lt_linear_pde_residual, strategy_from_value,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Residuals below this are treated as exact-to-roundoff: convergence
/// order is meaningless on pure cancellation noise.
const ROUNDOFF_FLOOR: f64 = 1e-6;

/// Least-squares slope of log|residual| against log h over a halving
/// ladder, together with the largest residual seen. Ladders start at
/// h = 1e-2 * scale and halve five times, staying inside [1e-4, 1e-2] of
/// the coordinate scale.
pub fn measure_order(mut residual_at: impl FnMut(f64) -> f64, scale: f64) -> (f64, f64) {
    let mut logs_h = Vec::new();
    let mut logs_r = Vec::new();
    let mut max_r: f64 = 0.0;
    for k in 0..6 {
        let h = 1e-2 * scale / 2f64.powi(k);
        let r = residual_at(h).abs();
        max_r = max_r.max(r);
        if r > 0.0 {
            logs_h.push(h.ln());
            logs_r.push(r.ln());
        }
    }
    if logs_h.len() < 2 {
        return (f64::NAN, max_r);
    }
    let n = logs_h.len() as f64;
    let mx = logs_h.iter().sum::<f64>() / n;
    let my = logs_r.iter().sum::<f64>() / n;
    let sxy: f64 = logs_h
        .iter()
        .zip(&logs_r)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let sxx: f64 = logs_h.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxy / sxx, max_r)
}

fn order_check(name: &str, residual_at: impl FnMut(f64) -> f64, scale: f64) -> CheckOutcome {
    let (order, max_r) = measure_order(residual_at, scale);
    if max_r <= ROUNDOFF_FLOOR {
        return CheckOutcome::new(
            name,
            true,
            format!("residual at roundoff floor (max {max_r:.2e})"),
        );
    }
    CheckOutcome::new(
        name,
        order >= 1.9,
        format!("measured order {order:.2} (max residual {max_r:.2e})"),
    )
}

fn market() -> (MarketParams, DerivedParams) {
    let mp = MarketParams::new(0.10, 0.0, 0.10).unwrap();
    let dp = mp.derive();
    (mp, dp)
}

fn strategy_pde_checks(out: &mut Vec<CheckOutcome>) {
    let (mp, dp) = market();
    let sigma = mp.sigma();
    let period = 1.0;

    // Constant (free Kelly): identically zero.
    let rep = pde_residual_alpha(|_, _| dp.alpha_k(), sigma, (1.5, 0.5), 1e-3, 1e-3);
    out.push(CheckOutcome::new(
        "alpha_pde/free_kelly_constant",
        rep.residual == 0.0,
        format!("residual {:e}", rep.residual),
    ));

    // Terminal stop: solved exactly by the stencil up to cancellation.
    let pi_c = 1.0;
    let a_ts = move |pi: f64, _t: f64| dp.alpha_k() * (1.0 - pi_c / pi);
    out.push(order_check(
        "alpha_pde/terminal_stop",
        |h| pde_residual_alpha(a_ts, sigma, (2.0, 0.5), h, h).residual,
        1.0,
    ));

    // Browne: genuine O(h^2) decay.
    let b = 2.0;
    let a_br = move |pi: f64, t: f64| {
        eval_strategy(
            &AnalyticStrategy::BrowneTarget { b },
            &MarketState::new(pi, t),
            &dp,
            period,
        )
        .unwrap()
    };
    out.push(order_check(
        "alpha_pde/browne",
        |h| pde_residual_alpha(&a_br, sigma, (1.0, 0.5), h * b, h * period).residual,
        1.0,
    ));

    // Invested-amount form: CPPI is exact, Browne is O(h^2), pi^2 is not a
    // solution.
    let g_cppi = move |pi: f64, _t: f64| dp.alpha_k() * (pi - pi_c);
    let rep = pde_residual_gamma(g_cppi, sigma, (2.0, 0.5), 1e-4, 1e-4);
    out.push(CheckOutcome::new(
        "gamma_pde/terminal_stop_cppi",
        rep.residual == 0.0,
        format!("residual {:e}", rep.residual),
    ));
    let g_br = move |pi: f64, t: f64| pi * a_br(pi, t);
    out.push(order_check(
        "gamma_pde/browne",
        |h| pde_residual_gamma(&g_br, sigma, (1.0, 0.5), h * b, h * period).residual,
        1.0,
    ));
    let rep = pde_residual_gamma(|pi, _| pi * pi, sigma, (1.5, 0.5), 1e-5, 1e-5);
    let expected = sigma * sigma * 1.5f64.powi(4);
    out.push(CheckOutcome::new(
        "gamma_pde/pi_squared_rejected",
        (rep.residual - expected).abs() <= 1e-4 * expected,
        format!("residual {} vs sigma^2 pi^4 = {expected}", rep.residual),
    ));
}

fn hjb_checks(out: &mut Vec<CheckOutcome>) {
    let (_, dp) = market();
    let period = 1.0;
    let cases: [(&str, AnalyticStrategy, (f64, f64)); 3] = [
        ("hjb/kelly_value", AnalyticStrategy::FreeKelly, (1.5, 0.5)),
        (
            "hjb/terminal_stop",
            AnalyticStrategy::TerminalStop { pi_c: 0.5 },
            (1.5, 0.5),
        ),
        (
            "hjb/crra_eta_-1",
            AnalyticStrategy::Crra { eta: -1.0 },
            (1.5, 0.5),
        ),
    ];
    for (name, v, pt) in cases {
        let j = move |pi: f64, t: f64| eval_value(&v, pi, t, &dp, period).unwrap();
        out.push(order_check(
            name,
            |h| hjb_residual(&j, &dp, pt, h, h).unwrap(),
            1.0,
        ));
    }

    // Strategy recovered from each value function matches the closed form.
    let variants = [
        AnalyticStrategy::FreeKelly,
        AnalyticStrategy::Crra { eta: -1.0 },
        AnalyticStrategy::TerminalStop { pi_c: 0.5 },
        AnalyticStrategy::BrowneTarget { b: 2.0 },
    ];
    let mut worst: f64 = 0.0;
    for v in variants {
        let j = move |pi: f64, t: f64| eval_value(&v, pi, t, &dp, period).unwrap();
        let a_fd = strategy_from_value(j, &dp, (1.2, 0.4), 1e-4).unwrap();
        let a = eval_strategy(&v, &MarketState::new(1.2, 0.4), &dp, period).unwrap();
        worst = worst.max((a_fd - a).abs() / a.abs().max(1.0));
    }
    out.push(CheckOutcome::new(
        "hjb/strategy_from_value_matches",
        worst < 1e-5,
        format!("worst relative deviation {worst:.2e}"),
    ));

    // Ratio relation from the alpha-to-value link:
    // (d_pi J)/(d_t J) = -2 / ((mu - r) alpha pi).
    let (mp, dp) = market();
    let mut worst: f64 = 0.0;
    for v in [
        AnalyticStrategy::FreeKelly,
        AnalyticStrategy::TerminalStop { pi_c: 0.5 },
        AnalyticStrategy::Crra { eta: -1.0 },
    ] {
        let j = move |pi: f64, t: f64| eval_value(&v, pi, t, &dp, period).unwrap();
        let (pi, t, h) = (1.4, 0.3, 1e-5);
        let d_pi = (j(pi + h, t) - j(pi - h, t)) / (2.0 * h);
        let d_t = (j(pi, t + h) - j(pi, t - h)) / (2.0 * h);
        let alpha = eval_strategy(&v, &MarketState::new(pi, t), &dp, period).unwrap();
        let lhs = d_pi / d_t;
        let rhs = -2.0 / (mp.excess() * alpha * pi);
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    out.push(CheckOutcome::new(
        "hjb/alpha2value_ratio",
        worst < 1e-6,
        format!("worst relative deviation {worst:.2e}"),
    ));
}

fn separable_checks(out: &mut Vec<CheckOutcome>) {
    let f = |z: f64| separable_f(z).unwrap();
    let r = separable_ode_residual(f, 2.0, 2.0, 1e-4).unwrap();
    out.push(CheckOutcome::new(
        "separable_ode/browne_shape_lambda2",
        r.abs() < 1e-5,
        format!("residual {r:.2e}"),
    ));
    let r = separable_ode_residual(f, 1.0, 2.0, 1e-4).unwrap();
    out.push(CheckOutcome::new(
        "separable_ode/wrong_lambda_rejected",
        r.abs() > 0.1,
        format!("residual {r:.4} stays away from zero"),
    ));

    // Browne equals the separable scaling across a (z, theta) grid.
    let (mp, dp) = market();
    let (b, period) = (2.0, 1.0);
    let mut worst: f64 = 0.0;
    for iz in 1..=8 {
        let z = 1.0 + 0.35 * iz as f64;
        for it in 1..=6 {
            let theta = 0.05 + 0.15 * it as f64;
            let t = period - theta * dp.tau();
            if t <= 0.0 {
                continue;
            }
            let pi = b / z;
            let via_eval = eval_strategy(
                &AnalyticStrategy::BrowneTarget { b },
                &MarketState::new(pi, t),
                &dp,
                period,
            )
            .unwrap();
            let direct = (b / pi) * normal::pdf(normal::inv_cdf(pi / b))
                / (mp.sigma() * (period - t).sqrt());
            worst = worst.max((via_eval - direct).abs());
        }
    }
    out.push(CheckOutcome::new(
        "separable/browne_scaling_agreement",
        worst < 1e-10,
        format!("worst absolute deviation {worst:.2e}"),
    ));
}

fn legendre_checks(out: &mut Vec<CheckOutcome>) {
    let (_, dp) = market();
    let period = 1.0;
    let tau = dp.tau();

    // Free-Kelly and terminal-stop closed-form pairs on a pi grid.
    let pairs: Vec<(&str, Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64, f64) -> f64>)> = vec![
        (
            "free_kelly",
            Box::new(move |pi: f64, t: f64| pi.ln() + (period - t) / tau),
            Box::new(move |p: f64, t: f64| 1.0 + p.ln() - (period - t) / tau),
        ),
        (
            "terminal_stop",
            Box::new(move |pi: f64, t: f64| (pi - 0.5).ln() + (period - t) / tau),
            Box::new(move |p: f64, t: f64| 1.0 + 0.5 * p + p.ln() - (period - t) / tau),
        ),
    ];

    for (label, j, k_closed) in pairs {
        let t0 = 0.4;
        let pi: Vec<f64> = (0..160).map(|i| 0.8 + 0.025 * i as f64).collect();
        let jv: Vec<f64> = pi.iter().map(|&x| j(x, t0)).collect();
        let (p, k) = legendre_transform(&pi, &jv).unwrap();

        // Identity J + K = p pi and agreement with the closed-form K.
        let mut worst_identity: f64 = 0.0;
        let mut worst_closed: f64 = 0.0;
        for i in 0..pi.len() {
            worst_identity = worst_identity.max((jv[i] + k[i] - p[i] * pi[i]).abs());
            worst_closed = worst_closed.max((k[i] - k_closed(p[i], t0)).abs());
        }
        out.push(CheckOutcome::new(
            &format!("legendre/{label}_identity"),
            worst_identity < 1e-12,
            format!("sup |J + K - p pi| = {worst_identity:.2e}"),
        ));
        out.push(CheckOutcome::new(
            &format!("legendre/{label}_matches_closed_form"),
            worst_closed < 2e-3,
            format!("sup |K - closed| = {worst_closed:.2e}"),
        ));

        // Involution: transforming (p, K) returns the original samples.
        let (pi_back, j_back) = legendre_transform(&p, &k).unwrap();
        let m = pi.len();
        let mut worst_inv: f64 = 0.0;
        for i in 3..m - 3 {
            worst_inv = worst_inv.max((pi_back[i] - pi[i]).abs().max((j_back[i] - jv[i]).abs()));
        }
        out.push(CheckOutcome::new(
            &format!("legendre/{label}_involution"),
            worst_inv < 5e-3,
            format!("sup interior deviation {worst_inv:.2e}"),
        ));

        // Curvature reciprocity d2J/dpi2 * d2K/dp2 = 1 at matched points.
        let h = 1e-4;
        let pi0 = 1.6;
        let d2j = (j(pi0 + h, t0) - 2.0 * j(pi0, t0) + j(pi0 - h, t0)) / (h * h);
        let p0 = (j(pi0 + h, t0) - j(pi0 - h, t0)) / (2.0 * h);
        let d2k =
            (k_closed(p0 + h, t0) - 2.0 * k_closed(p0, t0) + k_closed(p0 - h, t0)) / (h * h);
        let recip = d2j * d2k;
        out.push(CheckOutcome::new(
            &format!("legendre/{label}_curvature_reciprocity"),
            (recip - 1.0).abs() < 1e-5,
            format!("d2J * d2K = {recip}"),
        ));

        // Time-slope antisymmetry d_t J + d_t K = 0 at matched points.
        let dtj = (j(pi0, t0 + h) - j(pi0, t0 - h)) / (2.0 * h);
        let dtk = (k_closed(p0, t0 + h) - k_closed(p0, t0 - h)) / (2.0 * h);
        out.push(CheckOutcome::new(
            &format!("legendre/{label}_time_antisymmetry"),
            (dtj + dtk).abs() < 1e-10,
            format!("d_t J + d_t K = {:e}", dtj + dtk),
        ));

        // Linear PDE residual for the transformed value function.
        out.push(order_check(
            &format!("legendre/{label}_lt_pde"),
            |hh| lt_linear_pde_residual(&k_closed, &dp, (1.1, t0), hh, hh),
            1.0,
        ));
    }

    // Transformed-investment equation: phi = alpha_k/p covers both the
    // free-Kelly pair (p = 1/pi) and the terminal-stop pair
    // (p = 1/(pi - pi_c)); constants solve it too.
    let ak = dp.alpha_k();
    let r = lt06_residual(move |p, _| ak / p, &dp, (0.9, 0.4), 1e-5, 1e-5);
    out.push(CheckOutcome::new(
        "legendre/lt06_phi_reciprocal",
        r.abs() < 1e-4,
        format!("residual {r:.2e}"),
    ));
    let r = lt06_residual(|_, _| 1.7, &dp, (0.9, 0.4), 1e-5, 1e-5);
    out.push(CheckOutcome::new(
        "legendre/lt06_constant",
        r == 0.0,
        format!("residual {r:e}"),
    ));
}

fn multi_checks(out: &mut Vec<CheckOutcome>) {
    let mp = MultiAssetParams::new(vec![0.1, 0.2], vec![vec![0.04, 0.0], vec![0.0, 0.04]])
        .unwrap();
    let w = kelly_weights(&mp).unwrap();
    out.push(CheckOutcome::new(
        "multi/diagonal_weights",
        (w[0] - 2.5).abs() < 1e-12 && (w[1] - 5.0).abs() < 1e-12,
        format!("weights ({}, {})", w[0], w[1]),
    ));
    let stats = kelly_portfolio_stats(&mp).unwrap();
    out.push(CheckOutcome::new(
        "multi/mu_equals_variance",
        stats.mu_k == stats.var_k && (stats.mu_k - 1.25).abs() < 1e-12,
        format!("mu_k = {}, var_k = {}", stats.mu_k, stats.var_k),
    ));
    out.push(CheckOutcome::new(
        "multi/self_allocation_unity",
        stats.self_allocation() == 1.0,
        format!("mu_k / sigma_k^2 = {}", stats.self_allocation()),
    ));
    out.push(CheckOutcome::new(
        "multi/var_cap",
        apply_var_cap(1.0, 0.30, 1.0) == 0.3,
        "u = 1 capped to 0.3 at sigma_max = 0.30, s = 1".to_string(),
    ));
}

/// Run the full oracle/residual suite.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    strategy_pde_checks(&mut out);
    hjb_checks(&mut out);
    separable_checks(&mut out);
    legendre_checks(&mut out);
    multi_checks(&mut out);
    out
}
