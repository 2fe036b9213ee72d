//! Closed-form physical primitives: steering vectors, path loss, digital
//! frequencies, and unit conversions.
//!
//! All angles are in radians, all powers linear (watts), all distances in
//! meters. Decibel values exist only at the configuration boundary.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform-linear-array steering vector `[1, e^{jw}, ..., e^{j(n-1)w}]`.
///
/// `omega` is the per-element digital frequency in radians.
pub fn steering_vector(omega: f64, n: usize) -> Result<DVector<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "steering vector needs at least one element".into(),
        ));
    }
    Ok(DVector::from_fn(n, |m, _| {
        Complex64::from_polar(1.0, m as f64 * omega)
    }))
}

/// Distance-dependent path loss `c_ref * (d / d_ref)^(-alpha)` as a linear
/// power gain.
pub fn path_loss(distance_m: f64, cfg: &SystemConfig) -> Result<f64> {
    if distance_m <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss undefined for non-positive distance {distance_m}"
        )));
    }
    Ok(cfg.ref_gain * (distance_m / cfg.ref_distance_m).powf(-cfg.path_loss_exponent))
}

/// The four digital frequencies of a point target, one per data dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalFrequencies {
    /// Angle-dependent transmit frequency (per transmit element).
    pub transmit: f64,
    /// Angle-dependent receive frequency (per receive element).
    pub receive: f64,
    /// Range-dependent frequency (per subcarrier).
    pub range: f64,
    /// Velocity-dependent frequency (per symbol slot).
    pub velocity: f64,
}

/// Digital frequencies of a target at `theta_rad` / `range_m` /
/// `velocity_mps` under the configured carrier and array geometry.
pub fn digital_frequencies(
    theta_rad: f64,
    range_m: f64,
    velocity_mps: f64,
    cfg: &SystemConfig,
) -> DigitalFrequencies {
    let c = SPEED_OF_LIGHT;
    let two_pi = std::f64::consts::TAU;
    DigitalFrequencies {
        transmit: two_pi * cfg.tx_spacing_m * theta_rad.sin() * cfg.carrier_freq_hz / c,
        receive: -two_pi * cfg.rx_spacing_m * theta_rad.sin() * cfg.carrier_freq_hz / c,
        range: -two_pi * cfg.subcarrier_spacing_hz * 2.0 * range_m / c,
        velocity: 2.0 * two_pi * cfg.total_symbol_duration_s * velocity_mps * cfg.carrier_freq_hz
            / c,
    }
}

/// Decibels to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to decibels.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steering_vector_zero_frequency_is_all_ones() {
        let a = steering_vector(0.0, 4).unwrap();
        for m in 0..4 {
            assert_eq!(a[m], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn steering_vector_half_turn() {
        let a = steering_vector(std::f64::consts::PI, 2).unwrap();
        assert_relative_eq!(a[0].re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(a[1].re, -1.0, max_relative = 1e-15);
        assert!(a[1].im.abs() < 1e-15);
    }

    #[test]
    fn steering_vector_quarter_turn() {
        let a = steering_vector(std::f64::consts::FRAC_PI_2, 3).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((a[2] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_vector_rejects_empty() {
        assert!(steering_vector(1.0, 0).is_err());
    }

    #[test]
    fn steering_vector_norm_is_element_count() {
        // Squared norm is exactly n for any frequency.
        for (i, omega) in [-3.7, -0.4, 0.0, 0.9, 2.2, 11.0].iter().enumerate() {
            let n = 1 + i * 3;
            let a = steering_vector(*omega, n).unwrap();
            assert_relative_eq!(a.norm_squared(), n as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn path_loss_reference_point() {
        let cfg = SystemConfig::paper();
        // Reference profile: -30 dB at the 1 m reference distance.
        assert_relative_eq!(path_loss(1.0, &cfg).unwrap(), 1.0e-3, max_relative = 1e-12);
        assert_relative_eq!(
            path_loss(cfg.ref_distance_m, &cfg).unwrap(),
            cfg.ref_gain,
            max_relative = 1e-12
        );
    }

    #[test]
    fn path_loss_direct_evaluation() {
        let mut cfg = SystemConfig::paper();
        cfg.path_loss_exponent = 2.6;
        cfg.ref_gain = 1.0e-3;
        cfg.ref_distance_m = 1.0;
        // Independent scalar oracle: 1e-3 * 10^(-2.6).
        let expected = 1.0e-3 * 10f64.powf(-2.6);
        assert_relative_eq!(path_loss(10.0, &cfg).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(path_loss(10.0, &cfg).unwrap(), 2.5119e-6, max_relative = 1e-4);
    }

    #[test]
    fn path_loss_rejects_non_positive_distance() {
        let cfg = SystemConfig::paper();
        assert!(path_loss(0.0, &cfg).is_err());
        assert!(path_loss(-3.0, &cfg).is_err());
    }

    #[test]
    fn digital_frequencies_vanish_at_zero() {
        let cfg = SystemConfig::paper();
        let f = digital_frequencies(0.0, 10.0, 0.0, &cfg);
        assert_eq!(f.transmit, 0.0);
        assert_eq!(f.receive, 0.0);
        assert_eq!(f.velocity, 0.0);
    }

    #[test]
    fn range_frequency_matches_scalar_oracle() {
        let cfg = SystemConfig::paper();
        // Independent scalar evaluation with c = 299 792 458 m/s.
        let expected = -std::f64::consts::TAU * 120.0e3 * 2.0 * 75.0 / 299_792_458.0;
        let f = digital_frequencies(0.3, 75.0, 5.0, &cfg);
        assert_relative_eq!(f.range, expected, max_relative = 1e-12);
        assert_relative_eq!(f.range, -0.377252, max_relative = 1e-5);
    }

    #[test]
    fn frequencies_odd_in_angle_linear_in_range_and_velocity() {
        let cfg = SystemConfig::paper();
        for k in 0..20 {
            let theta = -1.4 + 0.15 * k as f64;
            let d = 1.0 + 7.0 * k as f64;
            let v = -25.0 + 2.5 * k as f64;
            let f = digital_frequencies(theta, d, v, &cfg);
            let g = digital_frequencies(-theta, d, v, &cfg);
            assert_relative_eq!(f.transmit, -g.transmit, max_relative = 1e-12);
            assert_relative_eq!(f.receive, -g.receive, max_relative = 1e-12);
            let h = digital_frequencies(theta, 2.0 * d, 2.0 * v, &cfg);
            assert_relative_eq!(h.range, 2.0 * f.range, max_relative = 1e-12);
            assert_relative_eq!(h.velocity, 2.0 * f.velocity, max_relative = 1e-12);
        }
    }

    #[test]
    fn db_round_trip() {
        for x in [1e-9, 3.16e-4, 1.0, 2.0, 517.3] {
            assert_relative_eq!(db_to_linear(linear_to_db(x)), x, max_relative = 1e-12);
        }
        for db in [-60.0, -30.0, 0.0, 10.0] {
            assert_relative_eq!(linear_to_db(db_to_linear(db)), db, max_relative = 1e-12);
        }
        assert_relative_eq!(dbm_to_watts(-60.0), 1e-9, max_relative = 1e-12);
        assert_relative_eq!(watts_to_dbm(1e-9), -60.0, max_relative = 1e-12);
    }
}
