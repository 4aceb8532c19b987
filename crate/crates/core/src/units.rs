//! Physical constants and unit conversions.
//!
//! All internal quantities are SI angular units: angular frequencies in rad/s,
//! times in seconds. Configuration surfaces use suffixed keys (kHz, ns, us,
//! tesla) and convert exactly once at the boundary.

/// 2*pi, the conversion between ordinary and angular frequency.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Gyromagnetic ratio of 13C divided by 2*pi, in Hz per tesla.
pub const GAMMA_C13_HZ_PER_T: f64 = 10.7084e6;

/// Convert a frequency given in kHz (ordinary) to rad/s (angular).
pub fn khz_to_rad_per_s(khz: f64) -> f64 {
    TWO_PI * 1.0e3 * khz
}

/// Convert an angular frequency in rad/s back to ordinary kHz.
pub fn rad_per_s_to_khz(omega: f64) -> f64 {
    omega / (TWO_PI * 1.0e3)
}

/// Nuclear Larmor angular frequency (rad/s) of 13C at a given static field.
pub fn larmor_from_field(b_tesla: f64) -> f64 {
    TWO_PI * GAMMA_C13_HZ_PER_T * b_tesla
}

/// Microseconds to seconds.
pub fn us(x: f64) -> f64 {
    x * 1.0e-6
}

/// Nanoseconds to seconds.
pub fn ns(x: f64) -> f64 {
    x * 1.0e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn khz_round_trip() {
        let w = khz_to_rad_per_s(431.5);
        assert_relative_eq!(w, TWO_PI * 431.5e3, max_relative = 1e-15);
        assert_relative_eq!(rad_per_s_to_khz(w), 431.5, max_relative = 1e-15);
    }

    #[test]
    fn larmor_at_reference_fields() {
        // 0.0403 T puts the 13C Larmor frequency at ~431.5 kHz.
        assert_relative_eq!(
            rad_per_s_to_khz(larmor_from_field(0.0403)),
            431.5,
            max_relative = 2e-4
        );
        // Doubling the field doubles the frequency exactly.
        assert_relative_eq!(
            larmor_from_field(0.0806),
            2.0 * larmor_from_field(0.0403),
            max_relative = 1e-15
        );
    }

    #[test]
    fn time_helpers() {
        assert_relative_eq!(us(1.1587), 1.1587e-6, max_relative = 1e-15);
        assert_relative_eq!(ns(0.5), 0.5e-9, max_relative = 1e-15);
    }
}
