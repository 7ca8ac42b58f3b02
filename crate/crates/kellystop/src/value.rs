//! Value-function machinery: HJB residuals, recovery of the strategy from
//! a value function and of the value function from a solved strategy
//! surface, and the Legendre-transform apparatus that linearizes the HJB.

use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::surface::StrategySurface;

/// Second derivatives smaller than this are treated as singular in the
/// residual and strategy-recovery operators.
const CURVATURE_FLOOR: f64 = 1e-10;

/// Relative tolerance for the strict-monotonicity checks on
/// finite-difference slopes.
const MONOTONE_TOL: f64 = 1e-12;

/// Value curve J(pi) at a fixed time, defined up to an additive constant
/// and pinned by the anchor (pi_ref, j_ref).
#[derive(Debug, Clone)]
pub struct ValueCurve {
    pub pi: Vec<f64>,
    pub j: Vec<f64>,
    pub anchor: (f64, f64),
    /// Largest z node whose strategy value fell below the reconstruction
    /// floor, if the domain had to be truncated there.
    pub truncated_at_z: Option<f64>,
}

impl ValueCurve {
    /// Strictly increasing and concave in pi (finite-difference slopes
    /// positive and strictly decreasing).
    pub fn validate(&self) -> Result<()> {
        if self.pi.len() < 3 {
            return Err(Error::InvalidParameter(
                "value curve needs at least three nodes".into(),
            ));
        }
        let mut prev_slope = f64::INFINITY;
        for w in self.pi.windows(2).zip(self.j.windows(2)) {
            let (pw, jw) = w;
            let slope = (jw[1] - jw[0]) / (pw[1] - pw[0]);
            if !(slope > 0.0) {
                return Err(Error::Numerical(format!(
                    "value curve not strictly increasing near pi = {}",
                    pw[0]
                )));
            }
            if slope >= prev_slope * (1.0 + MONOTONE_TOL) {
                return Err(Error::Numerical(format!(
                    "value curve not concave near pi = {}",
                    pw[0]
                )));
            }
            prev_slope = slope;
        }
        Ok(())
    }
}

/// Transformed value function sampled on the dual grid: p = dJ/dpi nodes,
/// K values with J + K = p*pi, and the transformed investment
/// phi(p, t) = gamma(pi, t).
#[derive(Debug, Clone)]
pub struct TransformPair {
    pub p: Vec<f64>,
    pub k: Vec<f64>,
    pub phi: Vec<f64>,
}

impl TransformPair {
    /// Build from samples of J and gamma on a pi grid. Requires the slopes
    /// p to come out strictly positive and strictly decreasing in pi.
    pub fn from_samples(pi: &[f64], j: &[f64], gamma: &[f64]) -> Result<Self> {
        if pi.len() != j.len() || pi.len() != gamma.len() || pi.len() < 3 {
            return Err(Error::InvalidParameter(
                "transform needs equal-length pi/J/gamma samples (>= 3)".into(),
            ));
        }
        let (p, k) = legendre_transform(pi, j)?;
        for w in p.windows(2) {
            if !(w[0] > 0.0) || w[1] >= w[0] * (1.0 - MONOTONE_TOL) {
                return Err(Error::Singular(
                    "slopes p must be strictly positive and strictly decreasing in pi".into(),
                ));
            }
        }
        Ok(Self {
            p,
            k,
            phi: gamma.to_vec(),
        })
    }
}

fn d1_central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn d2_central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Central-difference residual of the value-function HJB
/// d_t J - (alpha_k^2 sigma^2 / 2) (d_pi J)^2 / d_pi^2 J. The coefficient
/// equals 1/tau.
pub fn hjb_residual<F>(j: F, dp: &DerivedParams, point: (f64, f64), h_pi: f64, h_t: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let (pi, t) = point;
    let dt = d1_central(|x| j(pi, x), t, h_t);
    let d1 = d1_central(|x| j(x, t), pi, h_pi);
    let d2 = d2_central(|x| j(x, t), pi, h_pi);
    if !d2.is_finite() || d2.abs() < CURVATURE_FLOOR {
        return Err(Error::Singular(format!(
            "second derivative {d2} below threshold at pi = {pi}"
        )));
    }
    Ok(dt - d1 * d1 / d2 / dp.tau())
}

/// Recover the optimal fraction from a value function:
/// alpha = -alpha_k (d_pi J) / (pi d_pi^2 J).
pub fn strategy_from_value<F>(
    j: F,
    dp: &DerivedParams,
    point: (f64, f64),
    h_pi: f64,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let (pi, t) = point;
    let d1 = d1_central(|x| j(x, t), pi, h_pi);
    let d2 = d2_central(|x| j(x, t), pi, h_pi);
    if !d2.is_finite() || d2.abs() < CURVATURE_FLOOR {
        return Err(Error::Singular(format!(
            "second derivative {d2} below threshold at pi = {pi}"
        )));
    }
    Ok(-dp.alpha_k() * d1 / (pi * d2))
}

/// Strategy values below this floor truncate the reconstruction domain
/// (the integrand 1/(u pi) diverges as u -> 0).
pub const RECONSTRUCT_U_FLOOR: f64 = 1e-8;

/// Reconstruct the value curve J(pi) from one theta plane of a solved
/// strategy surface.
///
/// The slope relation d(log d_pi J)/d_pi = -1/(u pi) is integrated in
/// log-pi coordinates, where it reads d(log p pi)/d(log pi) = 1 - 1/u.
/// Working with q = log(p pi) regularizes the z -> 0 end: q(0) = 0 is the
/// free-Kelly normalization p pi -> 1 far above the stop, the natural
/// boundary value for log-type objectives. J then follows from
/// dJ/d(log pi) = p pi by a second trapezoid pass, and the additive
/// constant is fixed by the anchor.
pub fn reconstruct_value(
    surface: &StrategySurface,
    theta: f64,
    pi_c: f64,
    anchor: (f64, f64),
) -> Result<ValueCurve> {
    if !(pi_c > 0.0) {
        return Err(Error::Domain(format!("pi_c must be positive, got {pi_c}")));
    }
    let u = surface.plane_at(theta)?;
    let grid = surface.grid();
    let n = grid.n_nodes();
    let dz = grid.dz();

    // Truncate at the last node with u above the floor.
    let mut imax = n - 1;
    for (i, &ui) in u.iter().enumerate().skip(1) {
        if ui < RECONSTRUCT_U_FLOOR {
            imax = i - 1;
            break;
        }
    }
    if imax < 3 {
        return Err(Error::Numerical(
            "strategy vanishes too close to the far boundary to reconstruct a curve".into(),
        ));
    }
    let truncated_at_z = if imax < n - 1 {
        Some(grid.z_node(imax))
    } else {
        None
    };

    // q_i = log(p_i pi_i) by trapezoid integration of
    // dq/dz = (1 - u)/(u z); the z = 0 limit of the integrand is the
    // one-sided slope estimate (1 - u_1)/dz.
    let mut integrand = vec![0.0; imax + 1];
    integrand[0] = (1.0 - u[1]) / dz;
    for i in 1..=imax {
        let z = grid.z_node(i);
        integrand[i] = (1.0 - u[i]) / (u[i] * z);
    }
    let mut q = vec![0.0; imax + 1];
    for i in 1..=imax {
        q[i] = q[i - 1] + 0.5 * (integrand[i - 1] + integrand[i]) * dz;
    }

    // Node i = 0 sits at pi = infinity; the curve starts at i = 1.
    // Build in ascending pi (descending z).
    let m = imax; // number of curve nodes
    let mut pi_nodes = vec![0.0; m];
    let mut ppi = vec![0.0; m]; // p * pi at each node
    for i in 1..=imax {
        let idx = imax - i;
        let z = grid.z_node(i);
        pi_nodes[idx] = pi_c / z;
        ppi[idx] = q[i].exp();
    }

    // dJ/dx = p pi with x = log pi.
    let mut j = vec![0.0; m];
    for k in 1..m {
        let dx = pi_nodes[k].ln() - pi_nodes[k - 1].ln();
        j[k] = j[k - 1] + 0.5 * (ppi[k] + ppi[k - 1]) * dx;
    }

    // Shift so that J(pi_ref) = j_ref, interpolating linearly in log pi.
    let (pi_ref, j_ref) = anchor;
    if pi_ref < pi_nodes[0] || pi_ref > pi_nodes[m - 1] {
        return Err(Error::Domain(format!(
            "anchor pi = {pi_ref} outside reconstructed range [{}, {}]",
            pi_nodes[0],
            pi_nodes[m - 1]
        )));
    }
    let pos = pi_nodes.partition_point(|&p| p < pi_ref).clamp(1, m - 1);
    let (p0, p1) = (pi_nodes[pos - 1], pi_nodes[pos]);
    let w = (pi_ref.ln() - p0.ln()) / (p1.ln() - p0.ln());
    let j_at_ref = j[pos - 1] * (1.0 - w) + j[pos] * w;
    let shift = j_ref - j_at_ref;
    for v in &mut j {
        *v += shift;
    }

    let curve = ValueCurve {
        pi: pi_nodes,
        j,
        anchor,
        truncated_at_z,
    };
    curve.validate()?;
    Ok(curve)
}

/// Three-point Lagrange derivative estimates on a (possibly nonuniform)
/// strictly monotone grid; second-order accurate including the endpoints.
fn slopes_3pt(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let m = i.clamp(1, n - 2);
        let (x0, x1, x2) = (x[m - 1], x[m], x[m + 1]);
        let (f0, f1, f2) = (f[m - 1], f[m], f[m + 1]);
        let xi = x[i];
        out[i] = f0 * (2.0 * xi - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + f1 * (2.0 * xi - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + f2 * (2.0 * xi - x0 - x1) / ((x2 - x0) * (x2 - x1));
    }
    out
}

/// Numerical Legendre transform of sampled strictly convex or strictly
/// concave data: returns (p, g) with p the finite-difference slopes and
/// g(p) = p*x - f(x). Applying the transform to its own output recovers
/// the input to O(h^2).
pub fn legendre_transform(x: &[f64], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if n < 3 || f.len() != n {
        return Err(Error::InvalidParameter(
            "legendre transform needs >= 3 equal-length samples".into(),
        ));
    }
    if !(x.windows(2).all(|w| w[1] > w[0]) || x.windows(2).all(|w| w[1] < w[0])) {
        return Err(Error::InvalidParameter(
            "sample abscissae must be strictly monotone".into(),
        ));
    }
    let p = slopes_3pt(x, f);
    // Strict monotonicity of the slopes (either direction) is what makes
    // p = f'(x) invertible.
    let increasing = p.windows(2).all(|w| w[1] > w[0] * (1.0 + MONOTONE_TOL.copysign(w[0])));
    let decreasing = p.windows(2).all(|w| w[1] < w[0] * (1.0 - MONOTONE_TOL.copysign(w[0])));
    if !(increasing || decreasing) {
        return Err(Error::Singular(
            "finite-difference slopes are not strictly monotone; transform undefined".into(),
        ));
    }
    let g = p
        .iter()
        .zip(x.iter().zip(f.iter()))
        .map(|(&pi, (&xi, &fi))| pi * xi - fi)
        .collect();
    Ok((p, g))
}

/// Central-difference residual of the transformed (linear) HJB
/// d_t K + (sigma^2 alpha_k^2 / 2) p^2 d_p^2 K; the coefficient is 1/tau.
pub fn lt_linear_pde_residual<F>(
    k: F,
    dp: &DerivedParams,
    point: (f64, f64),
    h_p: f64,
    h_t: f64,
) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let (p, t) = point;
    let dt = d1_central(|x| k(p, x), t, h_t);
    let d2 = d2_central(|x| k(x, t), p, h_p);
    dt + p * p * d2 / dp.tau()
}

/// Central-difference residual of the linear equation for the transformed
/// investment: d_t phi + (sigma^2 alpha_k^2 / 2) d_p(p^2 d_p phi).
pub fn lt06_residual<F>(
    phi: F,
    dp: &DerivedParams,
    point: (f64, f64),
    h_p: f64,
    h_t: f64,
) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let (p, t) = point;
    let dt = d1_central(|x| phi(p, x), t, h_t);
    let d1 = d1_central(|x| phi(x, t), p, h_p);
    let d2 = d2_central(|x| phi(x, t), p, h_p);
    dt + (2.0 * p * d1 + p * p * d2) / dp.tau()
}

/// Defect of the slope relation phi = -alpha_k p d_p^2 K linking the
/// transformed investment to the transformed value function.
pub fn lt05_defect<F, G>(phi: F, k: G, dp: &DerivedParams, point: (f64, f64), h_p: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let (p, t) = point;
    let d2k = d2_central(|x| k(x, t), p, h_p);
    phi(p, t) - (-dp.alpha_k() * p * d2k)
}
