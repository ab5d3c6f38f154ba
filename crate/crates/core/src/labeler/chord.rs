use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Spacing of samples along each cast ray, in pixels.
pub const RAY_STEP_PX: f64 = 0.5;

/// Default angular resolution of the chord search (1 degree).
pub const DEFAULT_CHORD_STEP: f64 = PI / 180.0;

/// The shortest boundary-to-boundary segment through a grasp center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordResult {
    pub center: (usize, usize),
    /// Direction of the chord, radians in `[-pi/2, pi/2)`.
    pub theta: f64,
    /// Distance between the two endpoints, pixels.
    pub length: f64,
    /// Last in-mask samples along `theta` and `theta + pi`.
    pub endpoints: [(f64, f64); 2],
}

/// Distance from `center` to the last in-mask sample along `(dx, dy)`,
/// stepping [`RAY_STEP_PX`] at a time until the first sample off the mask.
pub fn ray_extent(mask: &BinaryMask, center: (f64, f64), dir: (f64, f64)) -> f64 {
    let mut last = 0.0;
    let mut k = 1u32;
    loop {
        let t = k as f64 * RAY_STEP_PX;
        let x = center.0 + t * dir.0;
        let y = center.1 + t * dir.1;
        let inside = mask.get((x + 0.5).floor() as i64, (y + 0.5).floor() as i64) == Some(&true);
        if !inside {
            return last;
        }
        last = t;
        k += 1;
    }
}

/// Chord `(t_forward, t_backward)` through `center` along `theta`.
pub fn chord_extents(mask: &BinaryMask, center: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (ray_extent(mask, center, (c, s)), ray_extent(mask, center, (-c, -s)))
}

/// Searches directions `-pi/2 + k * step` for the shortest chord through
/// `center`.
///
/// Several directions usually share the minimal (half-pixel quantized)
/// length. The winner is the middle direction of the longest circular run
/// of minimal directions (lower middle for even runs, earliest run on
/// ties); if every direction is minimal the smallest angle wins.
pub fn shortest_chord(mask: &BinaryMask, center: (usize, usize), step: f64) -> Result<ChordResult> {
    if !step.is_finite() || step <= 0.0 || step > FRAC_PI_2 {
        return Err(Error::InvalidArgument(format!("chord step {step}")));
    }
    if mask.get(center.0 as i64, center.1 as i64) != Some(&true) {
        return Err(Error::InvalidCenter {
            u: center.0,
            v: center.1,
        });
    }
    let c = (center.0 as f64, center.1 as f64);
    let n = ((PI / step) - 1e-9).ceil() as usize;
    let candidates: Vec<(f64, f64, f64)> = (0..n)
        .map(|k| {
            let theta = -FRAC_PI_2 + k as f64 * step;
            let (fwd, back) = chord_extents(mask, c, theta);
            (theta, fwd, back)
        })
        .collect();
    let min_len = candidates.iter().map(|&(_, f, b)| f + b).fold(f64::INFINITY, f64::min);
    let is_min: Vec<bool> = candidates.iter().map(|&(_, f, b)| f + b == min_len).collect();
    let pick = plateau_middle(&is_min);
    let (theta, fwd, back) = candidates[pick];
    let (s, co) = theta.sin_cos();
    Ok(ChordResult {
        center,
        theta,
        length: fwd + back,
        endpoints: [(c.0 + fwd * co, c.1 + fwd * s), (c.0 - back * co, c.1 - back * s)],
    })
}

/// Index at the middle of the longest circular run of `true` values.
pub(crate) fn plateau_middle(flags: &[bool]) -> usize {
    let n = flags.len();
    let Some(gap) = flags.iter().position(|&f| !f) else {
        return 0;
    };
    // Walk once around the circle starting just after a `false`.
    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut run: Option<(usize, usize)> = None;
    for j in 1..=n {
        let i = (gap + j) % n;
        if flags[i] {
            run = Some(match run {
                Some((s, l)) => (s, l + 1),
                None => (i, 1),
            });
        } else if let Some(r) = run.take() {
            best = pick_run(best, r, n);
        }
    }
    if let Some(r) = run {
        best = pick_run(best, r, n);
    }
    let (start, len) = best.expect("at least one minimal direction");
    (start + (len - 1) / 2) % n
}

fn pick_run(best: Option<(usize, usize)>, run: (usize, usize), n: usize) -> Option<(usize, usize)> {
    match best {
        None => Some(run),
        Some(b) if run.1 > b.1 || (run.1 == b.1 && run.0 % n < b.0 % n) => Some(run),
        keep => keep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: usize, h: usize, rect_w: usize, rect_h: usize) -> (BinaryMask, (usize, usize)) {
        let u0 = (w - rect_w) / 2;
        let v0 = (h - rect_h) / 2;
        let m = BinaryMask::from_fn(w, h, |u, v| (u0..u0 + rect_w).contains(&u) && (v0..v0 + rect_h).contains(&v));
        (m, (u0 + rect_w / 2, v0 + rect_h / 2))
    }

    #[test]
    fn wide_rectangle_is_cut_horizontally() {
        // 11 wide, 21 tall: shortest chord runs along u
        let (m, c) = rect_mask(41, 41, 11, 21);
        let r = shortest_chord(&m, c, DEFAULT_CHORD_STEP).unwrap();
        assert!(r.theta.abs() < 1e-12, "theta {}", r.theta);
        assert!((r.length - 11.0).abs() <= 1.0);
    }

    #[test]
    fn tall_rectangle_is_cut_vertically() {
        let (m, c) = rect_mask(41, 41, 21, 11);
        let r = shortest_chord(&m, c, DEFAULT_CHORD_STEP).unwrap();
        assert_eq!(r.theta, -FRAC_PI_2);
        assert!((r.length - 11.0).abs() <= 1.0);
    }

    #[test]
    fn disk_chord_is_a_diameter() {
        for radius in [5i64, 10, 15] {
            let m = BinaryMask::from_fn(48, 48, |u, v| {
                let (du, dv) = (u as i64 - 24, v as i64 - 24);
                du * du + dv * dv <= radius * radius
            });
            let r = shortest_chord(&m, (24, 24), DEFAULT_CHORD_STEP).unwrap();
            assert!((r.length - 2.0 * radius as f64).abs() <= 1.0, "r={radius} len={}", r.length);
        }
    }

    #[test]
    fn endpoints_are_consistent() {
        let (m, c) = rect_mask(41, 41, 9, 25);
        let r = shortest_chord(&m, c, DEFAULT_CHORD_STEP).unwrap();
        let [a, b] = r.endpoints;
        let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        assert!((d - r.length).abs() < 1e-9);
        for p in [a, b] {
            assert!(*m.at(p.0.round() as usize, p.1.round() as usize));
        }
    }

    #[test]
    fn center_must_be_inside() {
        let (m, _) = rect_mask(20, 20, 5, 5);
        assert!(matches!(
            shortest_chord(&m, (0, 0), DEFAULT_CHORD_STEP),
            Err(Error::InvalidCenter { .. })
        ));
        assert!(shortest_chord(&m, (10, 10), 0.0).is_err());
    }

    #[test]
    fn plateau_middle_rules() {
        assert_eq!(plateau_middle(&[true, true, true]), 0);
        assert_eq!(plateau_middle(&[false, true, true, true, false]), 2);
        assert_eq!(plateau_middle(&[false, true, true, false]), 1);
        // run wrapping around the end: indices 4, 0, 1 -> middle is 0
        assert_eq!(plateau_middle(&[true, true, false, false, true]), 0);
        // two runs of equal length: the earlier one wins
        assert_eq!(plateau_middle(&[true, false, false, true, false]), 0);
    }
}
