//! Multi-asset free Kelly portfolio and the scalar projection onto it,
//! plus the VaR-style cap on the scaled strategy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Excess-drift vector mu_k - r and covariance matrix C_kl =
/// sigma_k sigma_l rho_kl of the risky assets (annualized).
#[derive(Debug, Clone)]
pub struct MultiAssetParams {
    excess: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Relative residual tolerance for the Kelly-weight linear solve.
const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

impl MultiAssetParams {
    /// Validates shape, symmetry, and positive definiteness (via Cholesky).
    pub fn new(excess: Vec<f64>, cov_rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = excess.len();
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one asset".into()));
        }
        if cov_rows.len() != n || cov_rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "covariance must be {n}x{n} to match the excess vector"
            )));
        }
        if excess.iter().any(|v| !v.is_finite())
            || cov_rows.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "multi-asset parameters must be finite".into(),
            ));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| cov_rows[i][j]);
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "covariance matrix is not positive definite".into(),
            ));
        }
        Ok(Self {
            excess: DVector::from_vec(excess),
            cov,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.excess.len()
    }

    pub fn excess(&self) -> Vec<f64> {
        self.excess.iter().copied().collect()
    }
}

/// Free Kelly weight vector alpha_K = C^{-1} (mu - r), with the solve
/// verified to a relative residual of 1e-10.
pub fn kelly_weights(mp: &MultiAssetParams) -> Result<Vec<f64>> {
    let lu = mp.cov.clone().lu();
    let w = lu.solve(&mp.excess).ok_or_else(|| {
        Error::Numerical("covariance solve failed despite positive definiteness".into())
    })?;
    let residual = (&mp.cov * &w - &mp.excess).norm();
    if residual > SOLVE_RESIDUAL_TOL * mp.excess.norm() {
        return Err(Error::Numerical(format!(
            "Kelly weight solve residual {residual} exceeds tolerance"
        )));
    }
    Ok(w.iter().copied().collect())
}

/// Drift and variance of the free Kelly portfolio. Both equal
/// (mu - r)^T C^{-1} (mu - r); the struct stores the single computed value
/// under both names so the defining identity mu_K = sigma_K^2 is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KellyPortfolioStats {
    pub mu_k: f64,
    pub var_k: f64,
}

impl KellyPortfolioStats {
    pub fn sigma_k(&self) -> f64 {
        self.var_k.sqrt()
    }

    /// Kelly-optimal allocation into the Kelly portfolio itself:
    /// mu_K / sigma_K^2, identically 1 for a nondegenerate portfolio.
    pub fn self_allocation(&self) -> f64 {
        if self.var_k == 0.0 {
            0.0
        } else {
            self.mu_k / self.var_k
        }
    }
}

pub fn kelly_portfolio_stats(mp: &MultiAssetParams) -> Result<KellyPortfolioStats> {
    let w = kelly_weights(mp)?;
    let quad: f64 = mp.excess.iter().zip(&w).map(|(e, wi)| e * wi).sum();
    if quad < 0.0 {
        return Err(Error::Numerical(format!(
            "quadratic form came out negative ({quad}) for a positive definite covariance"
        )));
    }
    Ok(KellyPortfolioStats {
        mu_k: quad,
        var_k: quad,
    })
}

/// Expand a scalar fraction of the Kelly portfolio into per-asset
/// allocations: u * alpha_K.
pub fn scale_to_multi(u: f64, weights: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| u * w).collect()
}

/// Cap the scaled strategy at the volatility ceiling: min(u, sigma_max/s).
/// Idempotent.
pub fn apply_var_cap(u: f64, sigma_max: f64, sharpe: f64) -> f64 {
    assert!(sigma_max > 0.0, "sigma_max must be positive");
    assert!(sharpe > 0.0, "sharpe must be positive");
    u.min(sigma_max / sharpe)
}
