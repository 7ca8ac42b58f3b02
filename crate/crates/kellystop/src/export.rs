//! Bit-stable data export. Every float is written with 17 significant
//! digits, which round-trips f64 exactly, so identical runs produce
//! byte-identical files.

use std::io::Write;

use crate::error::Result;
use crate::multi::KellyPortfolioStats;
use crate::params::{DerivedParams, MarketParams};
use crate::sim::{Comparison, SimResult};
use crate::surface::StrategySurface;
use crate::value::ValueCurve;

/// 17 significant digits: one leading digit plus 16 after the point.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Market + derived parameter block shared by the JSON documents.
fn params_json(mp: &MarketParams, dp: &DerivedParams) -> String {
    format!(
        "{{\"mu\":{},\"r\":{},\"sigma\":{},\"alpha_k\":{},\"sharpe\":{},\"tau\":{}}}",
        fmt_f64(mp.mu()),
        fmt_f64(mp.r()),
        fmt_f64(mp.sigma()),
        fmt_f64(dp.alpha_k()),
        fmt_f64(dp.sharpe()),
        fmt_f64(dp.tau()),
    )
}

/// Surface CSV: header `z,theta,u`, rows ordered plane by plane
/// (row-major by theta).
pub fn write_surface_csv<W: Write>(w: &mut W, surface: &StrategySurface) -> Result<()> {
    writeln!(w, "z,theta,u")?;
    let grid = surface.grid();
    for (j, &theta) in surface.thetas().iter().enumerate() {
        for i in 0..grid.n_nodes() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(grid.z_node(i)),
                fmt_f64(theta),
                fmt_f64(surface.node(j, i))
            )?;
        }
    }
    Ok(())
}

/// Surface JSON: {params, grid, values} with solver metadata.
pub fn write_surface_json<W: Write>(
    w: &mut W,
    surface: &StrategySurface,
    mp: &MarketParams,
    dp: &DerivedParams,
    pi_c: f64,
) -> Result<()> {
    let grid = surface.grid();
    write!(
        w,
        "{{\"params\":{},\"pi_c\":{},\"problem\":{},\"grid\":{{\"nz\":{},\"dz\":{},\"dtheta\":{},\"ntheta\":{},\"theta_max\":{},\"stability_ratio\":{}}},\"values\":{{\"thetas\":[",
        params_json(mp, dp),
        fmt_f64(pi_c),
        json_str(surface.kind().as_str()),
        grid.nz(),
        fmt_f64(grid.dz()),
        fmt_f64(grid.dtheta()),
        grid.ntheta(),
        fmt_f64(grid.theta_max()),
        fmt_f64(grid.stability_ratio()),
    )?;
    for (j, &theta) in surface.thetas().iter().enumerate() {
        if j > 0 {
            write!(w, ",")?;
        }
        write!(w, "{}", fmt_f64(theta))?;
    }
    write!(w, "],\"u\":[")?;
    for j in 0..surface.n_planes() {
        if j > 0 {
            write!(w, ",")?;
        }
        write!(w, "[")?;
        let plane = surface.plane(j);
        for (i, v) in plane.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", fmt_f64(*v))?;
        }
        write!(w, "]")?;
    }
    writeln!(w, "]}}}}")?;
    Ok(())
}

/// Simulation result JSON, including the run configuration needed to
/// reproduce it.
pub fn write_sim_json<W: Write>(
    w: &mut W,
    result: &SimResult,
    strategy_label: &str,
    n_steps: usize,
    period: f64,
    pi_c: f64,
) -> Result<()> {
    writeln!(
        w,
        "{{\"strategy\":{},\"mean_log_growth\":{},\"std_error\":{},\"stop_hit_rate\":{},\"n_paths\":{},\"n_steps\":{},\"period_years\":{},\"pi_c\":{},\"seed\":{},\"rng\":{}}}",
        json_str(strategy_label),
        fmt_f64(result.mean_log_growth),
        fmt_f64(result.std_error),
        fmt_f64(result.stop_hit_rate),
        result.n_paths,
        n_steps,
        fmt_f64(period),
        fmt_f64(pi_c),
        result.seed,
        json_str(result.rng),
    )?;
    Ok(())
}

/// Ranked comparison table CSV with paired differences against the leader.
pub fn write_comparison_csv<W: Write>(w: &mut W, cmp: &Comparison) -> Result<()> {
    writeln!(
        w,
        "rank,strategy,mean_log_growth,std_error,stop_hit_rate,diff_vs_best,paired_se_vs_best"
    )?;
    for i in 0..cmp.len() {
        let r = &cmp.results[i];
        let (diff, se) = if i == 0 {
            (0.0, 0.0)
        } else {
            cmp.paired_diff(0, i)
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            i + 1,
            cmp.names[i],
            fmt_f64(r.mean_log_growth),
            fmt_f64(r.std_error),
            fmt_f64(r.stop_hit_rate),
            fmt_f64(diff),
            fmt_f64(se)
        )?;
    }
    Ok(())
}

/// Value curve CSV: header `pi,J`.
pub fn write_value_curve_csv<W: Write>(w: &mut W, curve: &ValueCurve) -> Result<()> {
    writeln!(w, "pi,J")?;
    for (pi, j) in curve.pi.iter().zip(&curve.j) {
        writeln!(w, "{},{}", fmt_f64(*pi), fmt_f64(*j))?;
    }
    Ok(())
}

/// Multi-asset weights and Kelly portfolio stats JSON.
pub fn write_multi_json<W: Write>(
    w: &mut W,
    weights: &[f64],
    stats: &KellyPortfolioStats,
    scaled: Option<(f64, &[f64])>,
) -> Result<()> {
    write!(w, "{{\"kelly_weights\":[")?;
    for (i, v) in weights.iter().enumerate() {
        if i > 0 {
            write!(w, ",")?;
        }
        write!(w, "{}", fmt_f64(*v))?;
    }
    write!(
        w,
        "],\"mu_k\":{},\"var_k\":{},\"sigma_k\":{},\"self_allocation\":{}",
        fmt_f64(stats.mu_k),
        fmt_f64(stats.var_k),
        fmt_f64(stats.sigma_k()),
        fmt_f64(stats.self_allocation()),
    )?;
    if let Some((u, alloc)) = scaled {
        write!(w, ",\"u\":{},\"allocation\":[", fmt_f64(u))?;
        for (i, v) in alloc.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", fmt_f64(*v))?;
        }
        write!(w, "]")?;
    }
    writeln!(w, "}}")?;
    Ok(())
}
