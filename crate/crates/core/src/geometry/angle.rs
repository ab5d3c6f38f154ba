use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Maps a grasp angle onto the unit circle as `(cos 2phi, sin 2phi)`.
pub fn encode_angle(phi: f64) -> Result<(f64, f64)> {
    if !phi.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    let (s, c) = (2.0 * phi).sin_cos();
    Ok((c, s))
}

/// Inverse of [`encode_angle`]; the result lies in `[-pi/2, pi/2)`.
pub fn decode_angle(c: f64, s: f64) -> Result<f64> {
    if !c.is_finite() || !s.is_finite() {
        return Err(Error::NonFinite("angle vector"));
    }
    if c == 0.0 && s == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok(wrap_half_pi(0.5 * s.atan2(c)))
}

/// Wraps any finite angle into `[-pi/2, pi/2)` (period pi).
pub fn wrap_half_pi(phi: f64) -> f64 {
    let mut x = (phi + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if x >= FRAC_PI_2 {
        x -= PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn encode_examples() {
        let (c, s) = encode_angle(0.0).unwrap();
        assert_eq!((c, s), (1.0, 0.0));
        let (c, s) = encode_angle(FRAC_PI_4).unwrap();
        assert!(c.abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
        let (c, s) = encode_angle(-FRAC_PI_4).unwrap();
        assert!(c.abs() < 1e-15 && (s + 1.0).abs() < 1e-15);
        assert!(encode_angle(f64::NAN).is_err());
        assert!(encode_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_angle(1.0, 0.0).unwrap(), 0.0);
        assert!((decode_angle(0.0, 1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((decode_angle(0.0, -1.0).unwrap() + FRAC_PI_4).abs() < 1e-15);
        assert!(matches!(decode_angle(0.0, 0.0), Err(Error::UndefinedAngle)));
    }

    #[test]
    fn decode_wraps_positive_half_pi() {
        // atan2(+0, -1) = pi, halved to pi/2, which must wrap to -pi/2.
        assert_eq!(decode_angle(-1.0, 0.0).unwrap(), -FRAC_PI_2);
        assert_eq!(decode_angle(-1.0, -0.0).unwrap(), -FRAC_PI_2);
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_half_pi(FRAC_PI_2), -FRAC_PI_2);
        assert_eq!(wrap_half_pi(-FRAC_PI_2), -FRAC_PI_2);
        assert!((wrap_half_pi(PI + 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unit_norm() {
        for k in 0..100 {
            let phi = -FRAC_PI_2 + k as f64 * PI / 100.0;
            let (c, s) = encode_angle(phi).unwrap();
            assert!((c * c + s * s - 1.0).abs() < 1e-12);
        }
    }
}
