//! Uniform solver grid on z in [0, 1] with the explicit-scheme stability
//! bound enforced at construction.

use crate::error::{Error, Result};

/// Stability limit for the explicit Euler scheme. The effective diffusion
/// coefficient u^2 z^2 stays in [0, 1] for the stop-loss problem, so the
/// inclusive bound dtheta/dz^2 <= 0.5 is safe.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Rectangular grid: `nz` interior nodes uniform on [0, 1]
/// (dz = 1/(nz+1), node i at i*dz for i = 0..nz+1), marched `ntheta`
/// steps of size `dtheta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nz: usize,
    dtheta: f64,
    ntheta: usize,
}

impl Grid {
    pub fn new(nz: usize, dtheta: f64, ntheta: usize) -> Result<Self> {
        if nz == 0 {
            return Err(Error::InvalidParameter("nz must be >= 1".into()));
        }
        if ntheta == 0 {
            return Err(Error::InvalidParameter("ntheta must be >= 1".into()));
        }
        if !(dtheta > 0.0) || !dtheta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dtheta must be positive and finite, got {dtheta}"
            )));
        }
        let dz = 1.0 / (nz as f64 + 1.0);
        let ratio = dtheta / (dz * dz);
        if ratio > STABILITY_LIMIT {
            return Err(Error::Unstable {
                ratio,
                limit: STABILITY_LIMIT,
            });
        }
        Ok(Self { nz, dtheta, ntheta })
    }

    /// Build a grid reaching `theta_max` at the largest stable step:
    /// dtheta is set from the stability limit, then shrunk so an integer
    /// number of steps lands exactly on `theta_max`.
    pub fn with_horizon(nz: usize, theta_max: f64) -> Result<Self> {
        if !(theta_max > 0.0) || !theta_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta_max must be positive and finite, got {theta_max}"
            )));
        }
        if nz == 0 {
            return Err(Error::InvalidParameter("nz must be >= 1".into()));
        }
        let dz = 1.0 / (nz as f64 + 1.0);
        let dtheta_cap = STABILITY_LIMIT * dz * dz;
        let ntheta = (theta_max / dtheta_cap).ceil().max(1.0) as usize;
        let dtheta = theta_max / ntheta as f64;
        Grid::new(nz, dtheta, ntheta)
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// Total node count including both boundaries.
    pub fn n_nodes(&self) -> usize {
        self.nz + 2
    }

    pub fn dz(&self) -> f64 {
        1.0 / (self.nz as f64 + 1.0)
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn theta_max(&self) -> f64 {
        self.dtheta * self.ntheta as f64
    }

    pub fn z_node(&self, i: usize) -> f64 {
        i as f64 * self.dz()
    }

    pub fn stability_ratio(&self) -> f64 {
        let dz = self.dz();
        self.dtheta / (dz * dz)
    }
}
