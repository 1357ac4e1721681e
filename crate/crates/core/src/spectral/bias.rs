use crate::config::RadarConfig;
use crate::error::{Error, Result};

/// Range and angle bias of a decoupled 2D frequency estimator for a single
/// target at incidence angle `theta`:
///
/// ```text
/// r_b = (M − 1)·λ/8 · sinθ
/// θ_b = asin((1 + B/(2f_c))·sinθ) − θ
/// ```
pub fn bias_prediction(config: &RadarConfig, theta: f64) -> Result<(f64, f64)> {
    if !theta.is_finite() || theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InvalidArgument(format!("angle {theta} rad is outside (-pi/2, pi/2)")));
    }
    let s = theta.sin();
    let stretched = (1.0 + config.bandwidth() / (2.0 * config.carrier())) * s;
    if stretched.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "angle bias undefined at {:.3} deg: asin argument {stretched} exceeds 1",
            theta.to_degrees()
        )));
    }
    let m = config.virtual_elements() as f64;
    let range_bias = (m - 1.0) * config.wavelength() / 8.0 * s;
    Ok((range_bias, stretched.asin() - theta))
}
