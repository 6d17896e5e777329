//! Boundary unit conversions.
//!
//! Internally every rate and frequency is an angular rate in rad/s and every
//! field is in tesla. Files, reports and the command line use GHz for
//! frequencies, MHz for rates, Hz for single-spin couplings and mT for
//! fields; these helpers are the only place the factor 2π appears.

use std::f64::consts::TAU;

pub fn ghz_to_rad(f_ghz: f64) -> f64 {
    f_ghz * 1e9 * TAU
}

pub fn rad_to_ghz(omega: f64) -> f64 {
    omega / TAU / 1e9
}

pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    f_mhz * 1e6 * TAU
}

pub fn rad_to_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

pub fn hz_to_rad(f_hz: f64) -> f64 {
    f_hz * TAU
}

pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn mt_to_t(b_mt: f64) -> f64 {
    b_mt * 1e-3
}

pub fn t_to_mt(b_t: f64) -> f64 {
    b_t * 1e3
}

/// `10·log10(p)`.
pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angular_round_trips() {
        for f in [0.0, 1.0, 5.9, 123.456] {
            assert!((rad_to_ghz(ghz_to_rad(f)) - f).abs() <= 1e-15 * f.max(1.0));
            assert!((rad_to_mhz(mhz_to_rad(f)) - f).abs() <= 1e-15 * f.max(1.0));
            assert!((rad_to_hz(hz_to_rad(f)) - f).abs() <= 1e-15 * f.max(1.0));
        }
    }

    #[test]
    fn db() {
        assert_eq!(power_to_db(1.0), 0.0);
        assert!((power_to_db(0.5) + 3.0103).abs() < 1e-4);
        assert!((db_to_power(-30.0) - 1e-3).abs() < 1e-15);
    }
}
