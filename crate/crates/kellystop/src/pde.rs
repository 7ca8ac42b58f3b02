//! Explicit finite-difference solver for the scaled strategy equation
//! d_theta u = u^2 z^2 d_z^2 u on (z, theta) in [0,1] x [0, theta_max]
//! with the stop-loss boundary values, plus central-difference residual
//! operators for the strategy equations in raw (pi, t) coordinates.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::DerivedParams;
use crate::surface::{ProblemKind, StrategySurface};

/// Stop-loss boundary-value problem in scaled variables. The boundary data
/// is fixed: u = 1 at z = 0, u = 0 at z = 1, u = 1 on the theta = 0 plane,
/// with the stop value taking precedence at the (z=1, theta=0) corner.
#[derive(Debug, Clone)]
pub struct StopLossProblem {
    grid: Grid,
    store_stride: usize,
}

/// Default cap on the number of stored theta planes; intermediate planes
/// are recomputable from the stored data.
const DEFAULT_MAX_PLANES: usize = 512;

impl StopLossProblem {
    pub fn new(grid: Grid) -> Self {
        let stride = (grid.ntheta() / DEFAULT_MAX_PLANES).max(1);
        Self {
            grid,
            store_stride: stride,
        }
    }

    /// Choose how many marching steps separate stored planes.
    pub fn with_stride(grid: Grid, store_stride: usize) -> Result<Self> {
        if store_stride == 0 {
            return Err(Error::InvalidParameter("store stride must be >= 1".into()));
        }
        Ok(Self { grid, store_stride })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn store_stride(&self) -> usize {
        self.store_stride
    }
}

/// One explicit Euler step of the interior update
/// u_i += dtheta * u_i^2 * z_i^2 * (u_{i+1} - 2 u_i + u_{i-1}) / dz^2,
/// writing into `next`. Boundary values are copied through unchanged.
fn step_into(row: &[f64], next: &mut [f64], dtheta: f64, dz: f64) {
    let n = row.len();
    debug_assert!(n >= 3 && next.len() == n);
    let r = dtheta / (dz * dz);
    next[0] = row[0];
    next[n - 1] = row[n - 1];
    for i in 1..n - 1 {
        let z = i as f64 * dz;
        let u = row[i];
        let lap = row[i + 1] - 2.0 * u + row[i - 1];
        next[i] = u + r * u * u * z * z * lap;
    }
}

/// Public single-step wrapper: advance one row of u(., theta) by dtheta.
/// The caller guarantees the stability bound; boundary values are
/// re-imposed from the input row.
pub fn step_explicit_euler(row: &[f64], dtheta: f64, dz: f64) -> Vec<f64> {
    let mut next = vec![0.0; row.len()];
    step_into(row, &mut next, dtheta, dz);
    next
}

/// March the stop-loss problem from the theta = 0 plane to the grid's
/// horizon, storing every stride-th plane plus the final one.
pub fn solve_stop_loss(p: &StopLossProblem) -> Result<StrategySurface> {
    let grid = p.grid;
    let n = grid.n_nodes();
    let dz = grid.dz();
    let dtheta = grid.dtheta();

    // theta = 0 plane: u = 1 for z < 1; the stop value u = 0 takes
    // precedence at the corner node z = 1.
    let mut row = vec![1.0; n];
    row[n - 1] = 0.0;

    let mut thetas = vec![0.0];
    let mut values = row.clone();

    let mut next = vec![0.0; n];
    for step in 1..=grid.ntheta() {
        step_into(&row, &mut next, dtheta, dz);
        std::mem::swap(&mut row, &mut next);

        // A NaN or escape from [-1, 2] can only come from instability or
        // corrupted input; abort with the location.
        if let Some(i) = row.iter().position(|v| !v.is_finite() || *v < -1.0 || *v > 2.0) {
            return Err(Error::Numerical(format!(
                "solver diverged at step {step} (theta = {}), node {i} (z = {}), value {}",
                step as f64 * dtheta,
                grid.z_node(i),
                row[i]
            )));
        }

        if step % p.store_stride == 0 || step == grid.ntheta() {
            thetas.push(step as f64 * dtheta);
            values.extend_from_slice(&row);
        }
    }

    StrategySurface::from_planes(grid, ProblemKind::StopLoss, thetas, values)
}

/// Location, value, and stencil spacing of a finite-difference residual.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// Coordinates the stencil was centered on.
    pub location: (f64, f64),
    pub residual: f64,
    /// Stencil spacing used in each coordinate.
    pub spacing: (f64, f64),
}

/// Central-difference residual of the strategy equation in fraction form:
/// d_t alpha + (sigma^2/2) alpha^2 d_pi(pi^2 d_pi alpha).
pub fn pde_residual_alpha<F>(
    alpha: F,
    sigma: f64,
    point: (f64, f64),
    h_pi: f64,
    h_t: f64,
) -> ResidualReport
where
    F: Fn(f64, f64) -> f64,
{
    let (pi, t) = point;
    let a = alpha(pi, t);
    let dt = (alpha(pi, t + h_t) - alpha(pi, t - h_t)) / (2.0 * h_t);
    let d1 = (alpha(pi + h_pi, t) - alpha(pi - h_pi, t)) / (2.0 * h_pi);
    let d2 = (alpha(pi + h_pi, t) - 2.0 * a + alpha(pi - h_pi, t)) / (h_pi * h_pi);
    // d_pi(pi^2 d_pi alpha) = 2 pi d_pi alpha + pi^2 d_pi^2 alpha
    let flux = 2.0 * pi * d1 + pi * pi * d2;
    ResidualReport {
        location: point,
        residual: dt + 0.5 * sigma * sigma * a * a * flux,
        spacing: (h_pi, h_t),
    }
}

/// Central-difference residual of the strategy equation in invested-amount
/// form: d_t gamma + (sigma^2/2) gamma^2 d_pi^2 gamma.
pub fn pde_residual_gamma<F>(
    gamma: F,
    sigma: f64,
    point: (f64, f64),
    h_pi: f64,
    h_t: f64,
) -> ResidualReport
where
    F: Fn(f64, f64) -> f64,
{
    let (pi, t) = point;
    let g = gamma(pi, t);
    let dt = (gamma(pi, t + h_t) - gamma(pi, t - h_t)) / (2.0 * h_t);
    let d2 = (gamma(pi + h_pi, t) - 2.0 * g + gamma(pi - h_pi, t)) / (h_pi * h_pi);
    ResidualReport {
        location: point,
        residual: dt + 0.5 * sigma * sigma * g * g * d2,
        spacing: (h_pi, h_t),
    }
}

/// Drift defect of the invested amount gamma = alpha_k * u * pi along the
/// solved surface: for the optimal strategy, d gamma - (d_pi gamma) d pi
/// carries no dt-term, so the reconstructed coefficient
/// d_t gamma + (sigma^2/2) gamma^2 d_pi^2 gamma measures how far the stored
/// surface is from solving the equation. The point snaps to the nearest
/// interior grid node and stored-plane pair; derivatives use central
/// differences on the stored data.
pub fn self_financing_balance(
    surface: &StrategySurface,
    dp: &DerivedParams,
    point: (f64, f64),
) -> Result<ResidualReport> {
    let (z_req, theta_req) = point;
    let grid = surface.grid();
    let n = grid.n_nodes();
    let planes = surface.n_planes();
    if planes < 3 {
        return Err(Error::InvalidParameter(
            "need at least three stored planes for a central theta difference".into(),
        ));
    }

    let i = ((z_req / grid.dz()).round() as usize).clamp(1, n - 2);
    let j = surface
        .thetas()
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - theta_req)
                .abs()
                .total_cmp(&(b.1 - theta_req).abs())
        })
        .map(|(j, _)| j)
        .unwrap()
        .clamp(1, planes - 2);

    let z = grid.z_node(i);
    let theta = surface.thetas()[j];
    let dz = grid.dz();

    let u = surface.node(j, i);
    let d2z = (surface.node(j, i + 1) - 2.0 * u + surface.node(j, i - 1)) / (dz * dz);
    let th_lo = surface.thetas()[j - 1];
    let th_hi = surface.thetas()[j + 1];
    let dth = (surface.node(j + 1, i) - surface.node(j - 1, i)) / (th_hi - th_lo);

    // In raw variables the dt-coefficient of d gamma collapses to
    // (alpha_k pi / tau) (u^2 z^2 d_z^2 u - d_theta u).
    let pi_over_pic = 1.0 / z;
    let defect = dp.alpha_k() * pi_over_pic / dp.tau() * (u * u * z * z * d2z - dth);

    Ok(ResidualReport {
        location: (z, theta),
        residual: defect,
        spacing: (dz, 0.5 * (th_hi - th_lo)),
    })
}

/// Slice selector for [`extract_slice`].
#[derive(Debug, Clone, Copy)]
pub enum SliceMode {
    /// u as a function of theta at fixed z.
    FixedZ(f64),
    /// u as a function of z at fixed theta.
    FixedTheta(f64),
    /// u as a function of theta at the portfolio value a fraction `delta`
    /// above the stop level, i.e. z = 1 - delta.
    FixedDelta(f64),
}

/// Extract an interpolated curve from the surface. FixedZ/FixedDelta
/// return (theta, u) pairs over the stored planes; FixedTheta returns
/// (z, u) pairs over the grid nodes.
pub fn extract_slice(surface: &StrategySurface, mode: SliceMode) -> Result<Vec<(f64, f64)>> {
    match mode {
        SliceMode::FixedZ(_) | SliceMode::FixedDelta(_) => {
            let z = match mode {
                SliceMode::FixedDelta(delta) => {
                    if !(0.0..1.0).contains(&delta) {
                        return Err(Error::Domain(format!(
                            "delta must lie in [0, 1), got {delta}"
                        )));
                    }
                    1.0 - delta
                }
                SliceMode::FixedZ(z) => z,
                SliceMode::FixedTheta(_) => unreachable!(),
            };
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Domain(format!("z = {z} outside [0, 1]")));
            }
            Ok(surface
                .thetas()
                .iter()
                .map(|&th| (th, surface.value_at(z, th)))
                .collect())
        }
        SliceMode::FixedTheta(theta) => {
            if !(0.0..=surface.theta_max() + 1e-12).contains(&theta) {
                return Err(Error::Domain(format!(
                    "theta = {theta} outside stored range [0, {}]",
                    surface.theta_max()
                )));
            }
            let grid = surface.grid();
            Ok((0..grid.n_nodes())
                .map(|i| {
                    let z = grid.z_node(i);
                    (z, surface.value_at(z, theta))
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{eval_strategy, AnalyticStrategy, MarketState};
    use crate::params::MarketParams;

    fn dp() -> DerivedParams {
        MarketParams::new(0.10, 0.0, 0.10).unwrap().derive()
    }

    fn small_solve(nz: usize, theta_max: f64) -> StrategySurface {
        let grid = Grid::with_horizon(nz, theta_max).unwrap();
        solve_stop_loss(&StopLossProblem::new(grid)).unwrap()
    }

    #[test]
    fn step_fixed_points() {
        // The linear profile 1 - z has zero second difference.
        let n = 12;
        let dz = 1.0 / (n as f64 - 1.0);
        let row: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 * dz).collect();
        let next = step_explicit_euler(&row, 0.4 * dz * dz, dz);
        for (a, b) in row.iter().zip(&next) {
            assert_eq!(a, b);
        }
        // So does a constant row.
        let c = vec![0.7; n];
        let next = step_explicit_euler(&c, 0.4 * dz * dz, dz);
        assert_eq!(c, next);
    }

    #[test]
    fn step_damps_interior_bump() {
        let n = 21;
        let dz = 1.0 / (n as f64 - 1.0);
        let mut row: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 * dz).collect();
        row[10] += 0.1;
        let next = step_explicit_euler(&row, 0.4 * dz * dz, dz);
        assert!(next[10] < row[10]);
    }

    #[test]
    fn solved_surface_boundaries_exact() {
        let s = small_solve(40, 0.5);
        let n = s.grid().n_nodes();
        for j in 0..s.n_planes() {
            assert_eq!(s.node(j, 0), 1.0);
            assert_eq!(s.node(j, n - 1), 0.0);
        }
        // theta = 0 plane is all ones except the corner.
        for i in 0..n - 1 {
            assert_eq!(s.node(0, i), 1.0);
        }
    }

    #[test]
    fn solved_surface_box_and_monotonicity() {
        let s = small_solve(60, 1.0);
        let n = s.grid().n_nodes();
        for j in 0..s.n_planes() {
            for i in 0..n {
                let z = s.grid().z_node(i);
                let u = s.node(j, i);
                assert!(u <= 1.0 + 1e-14 && u >= 1.0 - z - 1e-12, "u({z})={u}");
            }
        }
        // Non-increasing in z at the final plane, non-increasing in theta
        // at interior nodes.
        let j_last = s.n_planes() - 1;
        for i in 0..n - 1 {
            assert!(s.node(j_last, i + 1) <= s.node(j_last, i) + 1e-14);
        }
        for i in 1..n - 1 {
            for j in 0..s.n_planes() - 1 {
                assert!(s.node(j + 1, i) <= s.node(j, i) + 1e-14);
            }
        }
    }

    #[test]
    fn long_horizon_approaches_linear_profile() {
        // The theta -> infinity limit is u = 1 - z. The approach is slow
        // (the measured sup-gap decays roughly like exp(-theta/4)):
        // about 0.031 at theta = 5 and still about 0.0035 at theta = 12.
        let s = small_solve(100, 12.0);
        let gap_at = |theta: f64| -> f64 {
            extract_slice(&s, SliceMode::FixedTheta(theta))
                .unwrap()
                .iter()
                .map(|&(z, u)| (u - (1.0 - z)).abs())
                .fold(0.0, f64::max)
        };
        let g5 = gap_at(5.0);
        assert!((0.025..=0.035).contains(&g5), "gap at theta=5: {g5}");
        let g12 = gap_at(12.0);
        assert!(g12 < 0.005, "gap at theta=12: {g12}");
        assert!(g12 < g5);
    }

    #[test]
    fn alpha_residual_constant_is_zero() {
        let rep = pde_residual_alpha(|_, _| 3.7, 0.2, (1.5, 0.5), 1e-3, 1e-3);
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn alpha_residual_terminal_stop_within_roundoff() {
        // The CPPI strategy solves the equation; the central stencil sees
        // it exactly up to floating-point cancellation.
        let d = dp();
        let pi_c = 1.0;
        let a = move |pi: f64, _t: f64| d.alpha_k() * (1.0 - pi_c / pi);
        let rep = pde_residual_alpha(a, 0.1, (2.0, 0.5), 1e-3, 1e-3);
        assert!(rep.residual.abs() < 1e-6, "residual {}", rep.residual);
    }

    #[test]
    fn alpha_residual_browne_second_order() {
        let mp = MarketParams::new(0.10, 0.0, 0.10).unwrap();
        let d = mp.derive();
        let (b, period) = (2.0, 1.0);
        let a = move |pi: f64, t: f64| {
            eval_strategy(
                &AnalyticStrategy::BrowneTarget { b },
                &MarketState::new(pi, t),
                &d,
                period,
            )
            .unwrap()
        };
        let mut prev = f64::NAN;
        for k in 0..4 {
            let h = 1e-2 / 2f64.powi(k);
            let rep = pde_residual_alpha(&a, mp.sigma(), (1.0, 0.5), h * b, h * period);
            if k > 0 {
                let order = (prev / rep.residual.abs()).log2();
                assert!(order > 1.8, "order {order} at k={k}");
            }
            prev = rep.residual.abs();
        }
    }

    #[test]
    fn gamma_residual_cases() {
        let d = dp();
        // CPPI invested amount: gamma = alpha_k (pi - pi_c), static and
        // linear, so the residual vanishes up to stencil cancellation
        // noise (dyadic spacing keeps that at the last couple of ulps).
        let g = move |pi: f64, _t: f64| d.alpha_k() * (pi - 1.0);
        let rep = pde_residual_gamma(g, 0.1, (2.0, 0.5), 0.25, 0.25);
        assert!(rep.residual.abs() < 1e-12, "residual {}", rep.residual);

        // gamma = pi^2 is not a solution: residual = sigma^2 pi^4.
        let sigma = 0.1;
        let rep = pde_residual_gamma(|pi, _| pi * pi, sigma, (1.5, 0.5), 1e-5, 1e-5);
        let expected = sigma * sigma * 1.5f64.powi(4);
        assert!(
            (rep.residual - expected).abs() < 1e-6 * expected,
            "residual {}",
            rep.residual
        );

        // Browne in gamma form solves it to O(h^2).
        let mp = MarketParams::new(0.10, 0.0, 0.10).unwrap();
        let dd = mp.derive();
        let (b, period) = (2.0, 1.0);
        let gb = move |pi: f64, t: f64| {
            pi * eval_strategy(
                &AnalyticStrategy::BrowneTarget { b },
                &MarketState::new(pi, t),
                &dd,
                period,
            )
            .unwrap()
        };
        let r1 = pde_residual_gamma(&gb, mp.sigma(), (1.0, 0.5), 2e-3, 2e-3)
            .residual
            .abs();
        let r2 = pde_residual_gamma(&gb, mp.sigma(), (1.0, 0.5), 1e-3, 1e-3)
            .residual
            .abs();
        assert!((r1 / r2).log2() > 1.7, "orders {r1} {r2}");
    }

    #[test]
    fn self_financing_defect_small_on_solution_large_on_perturbation() {
        let d = dp();
        let s = small_solve(80, 0.5);
        let rep = self_financing_balance(&s, &d, (0.5, 0.25)).unwrap();
        let scale = rep.spacing.0 * rep.spacing.0 + rep.spacing.1;
        // Consistency: defect bounded by a moderate multiple of the
        // truncation scale at an interior point.
        assert!(
            rep.residual.abs() <= 200.0 * scale,
            "defect {} vs scale {scale}",
            rep.residual
        );

        // An exact solution (the linear asymptote held on every plane)
        // gives zero to stencil accuracy.
        let grid = *s.grid();
        let n = grid.n_nodes();
        let mut vals = Vec::new();
        let thetas: Vec<f64> = (0..4).map(|j| j as f64 * 0.1).collect();
        for _ in 0..4 {
            for i in 0..n {
                vals.push(1.0 - grid.z_node(i));
            }
        }
        let lin =
            StrategySurface::from_planes(grid, ProblemKind::StopLoss, thetas.clone(), vals)
                .unwrap();
        let rep0 = self_financing_balance(&lin, &d, (0.5, 0.2)).unwrap();
        assert!(rep0.residual.abs() < 1e-10, "defect {}", rep0.residual);

        // A bump on one plane is flagged.
        let mut vals2 = Vec::new();
        for j in 0..4 {
            for i in 0..n {
                let mut v = 1.0 - grid.z_node(i);
                if j == 2 && i == n / 2 {
                    v += 0.1;
                }
                vals2.push(v);
            }
        }
        let bumped =
            StrategySurface::from_planes(grid, ProblemKind::StopLoss, thetas, vals2).unwrap();
        let repb = self_financing_balance(&bumped, &d, (0.5, 0.2)).unwrap();
        assert!(repb.residual.abs() > 1e2, "defect {}", repb.residual);
    }

    #[test]
    fn slices_and_ranges() {
        let s = small_solve(50, 2.0);
        // z = 0 slice is identically 1.
        for (_, u) in extract_slice(&s, SliceMode::FixedZ(0.0)).unwrap() {
            assert_eq!(u, 1.0);
        }
        // theta = 2 slice approaches the linear profile at the measured
        // distance (sup gap about 0.10 at theta = 2).
        let gap = extract_slice(&s, SliceMode::FixedTheta(2.0))
            .unwrap()
            .iter()
            .map(|&(z, u)| (u - (1.0 - z)).abs())
            .fold(0.0, f64::max);
        assert!((0.08..=0.12).contains(&gap), "gap {gap}");
        // Out-of-range requests are rejected.
        assert!(extract_slice(&s, SliceMode::FixedZ(1.5)).is_err());
        assert!(extract_slice(&s, SliceMode::FixedTheta(3.0)).is_err());
        assert!(extract_slice(&s, SliceMode::FixedDelta(1.0)).is_err());
    }

    #[test]
    fn ordered_initial_data_stays_ordered() {
        // Smooth ordered profiles remain ordered under the step map.
        let n = 42;
        let dz = 1.0 / (n as f64 - 1.0);
        let profile = |p: f64| -> Vec<f64> {
            (0..n)
                .map(|i| 1.0 - (i as f64 * dz).powf(p))
                .collect()
        };
        let mut lo = profile(0.8);
        let mut hi = profile(1.6);
        let dtheta = 0.45 * dz * dz;
        for _ in 0..2000 {
            lo = step_explicit_euler(&lo, dtheta, dz);
            hi = step_explicit_euler(&hi, dtheta, dz);
            for (a, b) in lo.iter().zip(&hi) {
                assert!(a <= &(b + 1e-12));
            }
        }
    }
}
