//! Change of variables between raw portfolio state (pi, t) and the scaled
//! coordinates (z, theta) used by the solver: z = pi_c/pi is the reciprocal
//! portfolio value relative to the reference level, theta = (T - t)/tau the
//! time remaining in characteristic-time units.

use crate::error::{Error, Result};
use crate::params::DerivedParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledState {
    pub z: f64,
    pub theta: f64,
}

/// Map (pi, t) to scaled coordinates. Requires pi > 0, pi_c > 0 and
/// 0 <= t <= period_end.
pub fn to_scaled(
    pi: f64,
    t: f64,
    pi_c: f64,
    period_end: f64,
    dp: &DerivedParams,
) -> Result<ScaledState> {
    if !(pi > 0.0) {
        return Err(Error::Domain(format!("pi must be positive, got {pi}")));
    }
    if !(pi_c > 0.0) {
        return Err(Error::Domain(format!("pi_c must be positive, got {pi_c}")));
    }
    if !(0.0..=period_end).contains(&t) {
        return Err(Error::Domain(format!(
            "t = {t} outside the period [0, {period_end}]"
        )));
    }
    Ok(ScaledState {
        z: pi_c / pi,
        theta: (period_end - t) / dp.tau(),
    })
}

/// Inverse of [`to_scaled`]. Rejects z = 0 (infinite portfolio value).
pub fn from_scaled(
    st: &ScaledState,
    pi_c: f64,
    period_end: f64,
    dp: &DerivedParams,
) -> Result<(f64, f64)> {
    if !(st.z > 0.0) {
        return Err(Error::Domain(format!(
            "z must be positive to invert the scaling, got {}",
            st.z
        )));
    }
    if st.theta < 0.0 {
        return Err(Error::Domain(format!("theta must be >= 0, got {}", st.theta)));
    }
    Ok((pi_c / st.z, period_end - st.theta * dp.tau()))
}
