use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Point-in-ellipse test for offset `(dx, dy)` from the center, with the
/// semi-axis `a` along `theta`. A zero semi-axis admits only points exactly
/// on the other axis.
#[inline]
pub fn in_ellipse(dx: f64, dy: f64, theta: f64, a: f64, b: f64) -> bool {
    let (s, c) = theta.sin_cos();
    let x = dx * c + dy * s;
    let y = -dx * s + dy * c;
    let term = |coord: f64, semi: f64| {
        if semi > 0.0 {
            (coord / semi).powi(2)
        } else if coord == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    term(x, a) + term(y, b) <= 1.0 + 1e-12
}

/// Rasterizes a rotated ellipse: a pixel is set iff its center passes
/// [`in_ellipse`]. Only the ellipse's bounding box is scanned.
pub fn rasterize_ellipse(
    center: (f64, f64),
    theta: f64,
    a: f64,
    b: f64,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    if ![center.0, center.1, theta, a, b].iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("ellipse parameters"));
    }
    if a < 0.0 || b < 0.0 {
        return Err(Error::InvalidArgument(format!("negative semi-axes ({a}, {b})")));
    }
    let mut out = BinaryMask::filled(width, height, false);
    let (s, c) = theta.sin_cos();
    let ex = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
    let ey = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
    let clamp = |x: f64, hi: usize| x.max(0.0).min(hi as f64 - 1.0);
    if width == 0 || height == 0 || center.0 + ex < 0.0 || center.1 + ey < 0.0 {
        return Ok(out);
    }
    let u0 = clamp((center.0 - ex).floor() - 1.0, width) as usize;
    let u1 = clamp((center.0 + ex).ceil() + 1.0, width) as usize;
    let v0 = clamp((center.1 - ey).floor() - 1.0, height) as usize;
    let v1 = clamp((center.1 + ey).ceil() + 1.0, height) as usize;
    for v in v0..=v1 {
        for u in u0..=u1 {
            if in_ellipse(u as f64 - center.0, v as f64 - center.1, theta, a, b) {
                *out.at_mut(u, v) = true;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn circle_matches_integer_disk() {
        for r in [0i64, 1, 3, 5, 7, 10] {
            for theta in [0.0, 0.3, 1.1, -0.7] {
                let m = rasterize_ellipse((16.0, 16.0), theta, r as f64, r as f64, 33, 33).unwrap();
                let oracle = BinaryMask::from_fn(33, 33, |u, v| {
                    let (du, dv) = (u as i64 - 16, v as i64 - 16);
                    du * du + dv * dv <= r * r
                });
                assert_eq!(m, oracle, "r={r} theta={theta}");
            }
        }
    }

    #[test]
    fn zero_axes_give_center_pixel() {
        let m = rasterize_ellipse((3.0, 4.0), 0.4, 0.0, 0.0, 8, 8).unwrap();
        assert_eq!(m.count(), 1);
        assert!(*m.at(3, 4));
    }

    #[test]
    fn quarter_turn_swaps_extents() {
        let extents = |m: &BinaryMask| {
            let pts: Vec<_> = m.iter_indexed().filter(|(_, _, &b)| b).map(|(u, v, _)| (u, v)).collect();
            let du = pts.iter().map(|p| p.0).max().unwrap() - pts.iter().map(|p| p.0).min().unwrap();
            let dv = pts.iter().map(|p| p.1).max().unwrap() - pts.iter().map(|p| p.1).min().unwrap();
            (du, dv)
        };
        let a = rasterize_ellipse((20.0, 20.0), 0.0, 9.0, 4.0, 41, 41).unwrap();
        let b = rasterize_ellipse((20.0, 20.0), FRAC_PI_2, 9.0, 4.0, 41, 41).unwrap();
        let (au, av) = extents(&a);
        let (bu, bv) = extents(&b);
        assert_eq!((au, av), (bv, bu));
    }

    #[test]
    fn clipped_at_the_border() {
        let m = rasterize_ellipse((0.0, 0.0), 0.0, 5.0, 5.0, 10, 10).unwrap();
        assert!(*m.at(0, 0) && *m.at(5, 0) && !*m.at(6, 0));
        let off = rasterize_ellipse((-20.0, -20.0), 0.0, 5.0, 5.0, 10, 10).unwrap();
        assert_eq!(off.count(), 0);
    }
}
