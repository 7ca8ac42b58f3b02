//! Discretized scaled strategy u(z, theta) on a rectangular grid.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Which boundary-value problem a surface solves. Stop-loss surfaces carry
/// the extra invariants u in [0, 1], u(0, theta) = 1, u(1, theta) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    StopLoss,
    Target,
    Generic,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::StopLoss => "stop_loss",
            ProblemKind::Target => "target",
            ProblemKind::Generic => "generic",
        }
    }
}

/// Scaled strategy values u(z_i, theta_j) stored on a subset of the time
/// planes visited by the solver (every stride-th plane plus the final one).
/// Values are fractions of the free Kelly strategy.
#[derive(Debug, Clone)]
pub struct StrategySurface {
    grid: Grid,
    kind: ProblemKind,
    thetas: Vec<f64>,
    values: Vec<f64>, // row-major: plane-index * n_nodes + node-index
}

impl StrategySurface {
    /// Assemble a surface from stored planes, validating the invariants for
    /// the given problem kind.
    pub fn from_planes(
        grid: Grid,
        kind: ProblemKind,
        thetas: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.n_nodes();
        if thetas.is_empty() || values.len() != thetas.len() * n {
            return Err(Error::InvalidParameter(format!(
                "surface shape mismatch: {} planes x {} nodes != {} values",
                thetas.len(),
                n,
                values.len()
            )));
        }
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "stored theta planes must be strictly increasing".into(),
            ));
        }
        let s = Self {
            grid,
            kind,
            thetas,
            values,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("surface contains non-finite values".into()));
        }
        if self.kind == ProblemKind::StopLoss {
            let n = self.grid.n_nodes();
            for (j, theta) in self.thetas.iter().enumerate() {
                let row = &self.values[j * n..(j + 1) * n];
                if row[0] != 1.0 || row[n - 1] != 0.0 {
                    return Err(Error::Numerical(format!(
                        "stop-loss boundary values violated at theta={theta}: u(0)={}, u(1)={}",
                        row[0],
                        row[n - 1]
                    )));
                }
                if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Numerical(format!(
                        "stop-loss values outside [0,1] at theta={theta}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Stored theta planes, ascending; the first is theta = 0.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn n_planes(&self) -> usize {
        self.thetas.len()
    }

    pub fn theta_max(&self) -> f64 {
        *self.thetas.last().unwrap()
    }

    /// Node values of one stored plane.
    pub fn plane(&self, j: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[j * n..(j + 1) * n]
    }

    /// Value at grid node (i, plane j).
    pub fn node(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid.n_nodes() + i]
    }

    /// Bilinear interpolation in (z, theta). Queries outside the stored
    /// rectangle clamp to its edge: z below 0 reads the z=0 boundary
    /// (portfolio far above the reference level), z above 1 the stop
    /// boundary, theta beyond the last stored plane reads that plane.
    pub fn value_at(&self, z: f64, theta: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        let theta = theta.clamp(0.0, self.theta_max());
        let n = self.grid.n_nodes();

        // Bracketing stored planes.
        let (j0, j1, wt) = match self.thetas.binary_search_by(|t| t.total_cmp(&theta)) {
            Ok(j) => (j, j, 0.0),
            Err(k) => {
                let j1 = k.min(self.thetas.len() - 1);
                let j0 = j1.saturating_sub(1);
                let span = self.thetas[j1] - self.thetas[j0];
                let w = if span > 0.0 {
                    (theta - self.thetas[j0]) / span
                } else {
                    0.0
                };
                (j0, j1, w)
            }
        };

        let x = z / self.grid.dz();
        let i0 = (x.floor() as usize).min(n - 2);
        let fz = (x - i0 as f64).clamp(0.0, 1.0);

        let at = |j: usize| {
            let row = &self.values[j * n..(j + 1) * n];
            row[i0] * (1.0 - fz) + row[i0 + 1] * fz
        };
        at(j0) * (1.0 - wt) + at(j1) * wt
    }

    /// Plane values interpolated at an arbitrary theta (linear between the
    /// bracketing stored planes), returned per grid node.
    pub fn plane_at(&self, theta: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.theta_max() + 1e-12).contains(&theta) {
            return Err(Error::Domain(format!(
                "theta = {theta} outside stored range [0, {}]",
                self.theta_max()
            )));
        }
        let n = self.grid.n_nodes();
        Ok((0..n)
            .map(|i| self.value_at(self.grid.z_node(i), theta))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_surface() -> StrategySurface {
        // Two planes over nz=3: u = 1-z at theta=0 and u = (1-z)/2 at theta=1.
        let grid = Grid::new(3, 0.01, 100).unwrap();
        let z: Vec<f64> = (0..5).map(|i| grid.z_node(i)).collect();
        let mut vals = Vec::new();
        for &s in &[1.0, 0.5] {
            for &zi in &z {
                vals.push((1.0 - zi) * s);
            }
        }
        StrategySurface::from_planes(grid, ProblemKind::Generic, vec![0.0, 1.0], vals).unwrap()
    }

    #[test]
    fn bilinear_interpolation() {
        let s = toy_surface();
        assert!((s.value_at(0.5, 0.0) - 0.5).abs() < 1e-15);
        assert!((s.value_at(0.5, 1.0) - 0.25).abs() < 1e-15);
        assert!((s.value_at(0.5, 0.5) - 0.375).abs() < 1e-15);
        // off-node in z
        assert!((s.value_at(0.125, 0.0) - 0.875).abs() < 1e-15);
    }

    #[test]
    fn clamping_outside_rectangle() {
        let s = toy_surface();
        assert_eq!(s.value_at(-0.5, 0.0), 1.0);
        assert_eq!(s.value_at(2.0, 0.0), 0.0);
        assert!((s.value_at(0.5, 5.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stop_loss_validation() {
        let grid = Grid::new(3, 0.01, 10).unwrap();
        // Correct boundaries pass.
        let good = vec![1.0, 0.9, 0.6, 0.3, 0.0];
        assert!(StrategySurface::from_planes(
            grid,
            ProblemKind::StopLoss,
            vec![0.0],
            good
        )
        .is_ok());
        // Wrong boundary value fails.
        let bad = vec![0.9, 0.9, 0.6, 0.3, 0.0];
        assert!(StrategySurface::from_planes(
            grid,
            ProblemKind::StopLoss,
            vec![0.0],
            bad
        )
        .is_err());
        // Out-of-box value fails.
        let bad2 = vec![1.0, 1.2, 0.6, 0.3, 0.0];
        assert!(StrategySurface::from_planes(
            grid,
            ProblemKind::StopLoss,
            vec![0.0],
            bad2
        )
        .is_err());
    }
}
