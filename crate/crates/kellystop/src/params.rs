//! Market parameters and the derived Kelly quantities.
//!
//! All rates are annualized: drifts in 1/year, volatility in 1/sqrt(year).

use crate::error::{Error, Result};

/// Single risky asset market: drift `mu`, risk-free rate `r`, volatility
/// `sigma`. Construction rejects `sigma <= 0` and the degenerate `mu == r`
/// (both the Kelly fraction scaling and the characteristic time are
/// undefined there).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    mu: f64,
    r: f64,
    sigma: f64,
}

impl MarketParams {
    pub fn new(mu: f64, r: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !r.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "market parameters must be finite (mu={mu}, r={r}, sigma={sigma})"
            )));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if mu == r {
            return Err(Error::InvalidParameter(format!(
                "mu == r ({mu}) is degenerate: Kelly fraction and characteristic time undefined"
            )));
        }
        Ok(Self { mu, r, sigma })
    }

    /// Build from an ex-ante Sharpe ratio instead of a drift: mu = r + s*sigma.
    pub fn from_sharpe(sharpe: f64, sigma: f64, r: f64) -> Result<Self> {
        if !sharpe.is_finite() || sharpe == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sharpe must be finite and nonzero, got {sharpe}"
            )));
        }
        Self::new(r + sharpe * sigma, r, sigma)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Excess drift mu - r.
    pub fn excess(&self) -> f64 {
        self.mu - self.r
    }

    pub fn derive(&self) -> DerivedParams {
        let sharpe = (self.mu - self.r) / self.sigma;
        let alpha_k = (self.mu - self.r) / (self.sigma * self.sigma);
        let tau = 2.0 / (sharpe * sharpe);
        DerivedParams {
            alpha_k,
            sharpe,
            tau,
        }
    }
}

/// Quantities derived from the market: the free Kelly fraction
/// `alpha_k = (mu-r)/sigma^2`, the ex-ante Sharpe ratio `s = (mu-r)/sigma`,
/// and the characteristic time `tau = 2/s^2` (years).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    alpha_k: f64,
    sharpe: f64,
    tau: f64,
}

impl DerivedParams {
    pub fn alpha_k(&self) -> f64 {
        self.alpha_k
    }
    pub fn sharpe(&self) -> f64 {
        self.sharpe
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Scaled time remaining: theta = (T - t)/tau.
    pub fn theta(&self, time_to_end: f64) -> f64 {
        time_to_end / self.tau
    }
}

/// Validated convenience wrapper mirroring the module-level operation.
pub fn derive_params(p: &MarketParams) -> DerivedParams {
    p.derive()
}
