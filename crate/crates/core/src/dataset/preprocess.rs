use std::collections::VecDeque;

use super::{Observation, Sample};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::maps::GraspMaps;

/// Maps values affinely onto `[0, 1]`; a constant buffer maps to zeros.
pub fn normalize_minmax(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    normalize_minmax_in_place(&mut out);
    out
}

pub fn normalize_minmax_in_place(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        values.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let span = hi - lo;
    values.iter_mut().for_each(|x| *x = (*x - lo) / span);
}

const INPAINT_TOL: f64 = 1e-5;

/// Fills invalid pixels by 4-neighbor diffusion. Holes are first seeded
/// outward from the measured support, then relaxed Gauss-Seidel style.
pub fn inpaint_depth(depth: &Grid<f64>, validity: &Grid<bool>) -> Result<Grid<f64>> {
    depth.ensure_same_shape(validity, "depth/validity")?;
    let (w, h) = depth.dims();
    if !validity.as_slice().iter().any(|&v| v) {
        return Err(Error::Uninpaintable);
    }
    let mut out = depth.clone();
    let mut known: Vec<bool> = validity.as_slice().to_vec();
    let holes: Vec<usize> = (0..w * h).filter(|&i| !known[i]).collect();
    if holes.is_empty() {
        return Ok(out);
    }
    let neighbors = |i: usize| {
        let (u, v) = (i % w, i / w);
        let mut n = [usize::MAX; 4];
        if u > 0 {
            n[0] = i - 1;
        }
        if u + 1 < w {
            n[1] = i + 1;
        }
        if v > 0 {
            n[2] = i - w;
        }
        if v + 1 < h {
            n[3] = i + w;
        }
        n
    };

    // Onion-peel seeding in breadth-first order from the measured pixels.
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut queued = known.clone();
    for &i in &holes {
        if neighbors(i).iter().any(|&n| n != usize::MAX && known[n]) {
            queue.push_back(i);
            queued[i] = true;
        }
    }
    let data = out.as_mut_slice();
    while let Some(i) = queue.pop_front() {
        let (mut sum, mut cnt) = (0.0, 0usize);
        for n in neighbors(i) {
            if n != usize::MAX && known[n] {
                sum += data[n];
                cnt += 1;
            }
        }
        data[i] = sum / cnt as f64;
        known[i] = true;
        for n in neighbors(i) {
            if n != usize::MAX && !queued[n] {
                queued[n] = true;
                queue.push_back(n);
            }
        }
    }

    let max_iter = 10 * w.max(h);
    for _ in 0..max_iter {
        let mut max_change: f64 = 0.0;
        for &i in &holes {
            let (mut sum, mut cnt) = (0.0, 0usize);
            for n in neighbors(i) {
                if n != usize::MAX {
                    sum += data[n];
                    cnt += 1;
                }
            }
            if cnt == 0 {
                continue;
            }
            let next = sum / cnt as f64;
            max_change = max_change.max((next - data[i]).abs());
            data[i] = next;
        }
        if max_change < INPAINT_TOL {
            break;
        }
    }
    for &i in &holes {
        if !(data[i] > 0.0) {
            data[i] = f64::MIN_POSITIVE;
        }
    }
    Ok(out)
}

/// Source coordinate for output index `x` under pixel-center alignment.
fn source_coord(x: usize, n_in: usize, n_out: usize) -> f64 {
    let s = n_in as f64 / n_out as f64;
    ((x as f64 + 0.5) * s - 0.5).clamp(0.0, (n_in - 1) as f64)
}

fn nearest_index(x: usize, n_in: usize, n_out: usize) -> usize {
    let s = n_in as f64 / n_out as f64;
    (((x as f64 + 0.5) * s).floor() as usize).min(n_in - 1)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

struct Taps {
    i0: usize,
    i1: usize,
    t: f64,
}

fn taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    (0..n_out)
        .map(|x| {
            let s = source_coord(x, n_in, n_out);
            let i0 = s.floor() as usize;
            Taps {
                i0,
                i1: (i0 + 1).min(n_in - 1),
                t: s - i0 as f64,
            }
        })
        .collect()
}

/// Bilinear resize with pixel-center alignment. Same-size input is copied.
pub fn resize_bilinear(src: &Grid<f64>, width: usize, height: usize) -> Grid<f64> {
    if src.dims() == (width, height) {
        return src.clone();
    }
    let (tx, ty) = (taps(src.width(), width), taps(src.height(), height));
    Grid::from_fn(width, height, |u, v| {
        let (a, b) = (&tx[u], &ty[v]);
        let top = lerp(*src.at(a.i0, b.i0), *src.at(a.i1, b.i0), a.t);
        let bot = lerp(*src.at(a.i0, b.i1), *src.at(a.i1, b.i1), a.t);
        lerp(top, bot, b.t)
    })
}

fn resize_rgb(src: &Grid<[f64; 3]>, width: usize, height: usize) -> Grid<[f64; 3]> {
    if src.dims() == (width, height) {
        return src.clone();
    }
    let (tx, ty) = (taps(src.width(), width), taps(src.height(), height));
    Grid::from_fn(width, height, |u, v| {
        let (a, b) = (&tx[u], &ty[v]);
        let mut px = [0.0; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let top = lerp(src.at(a.i0, b.i0)[c], src.at(a.i1, b.i0)[c], a.t);
            let bot = lerp(src.at(a.i0, b.i1)[c], src.at(a.i1, b.i1)[c], a.t);
            *out = lerp(top, bot, b.t);
        }
        px
    })
}

pub fn resize_nearest<T: Clone>(src: &Grid<T>, width: usize, height: usize) -> Grid<T> {
    if src.dims() == (width, height) {
        return src.clone();
    }
    Grid::from_fn(width, height, |u, v| {
        src.at(nearest_index(u, src.width(), width), nearest_index(v, src.height(), height))
            .clone()
    })
}

/// Bilinear resize that only blends measured pixels. Validity follows the
/// nearest-neighbor rule.
pub fn resize_depth(
    depth: &Grid<f64>,
    validity: &Grid<bool>,
    width: usize,
    height: usize,
) -> (Grid<f64>, Grid<bool>) {
    if depth.dims() == (width, height) {
        return (depth.clone(), validity.clone());
    }
    let valid_out = resize_nearest(validity, width, height);
    let (tx, ty) = (taps(depth.width(), width), taps(depth.height(), height));
    let depth_out = Grid::from_fn(width, height, |u, v| {
        if !*valid_out.at(u, v) {
            return 0.0;
        }
        let (a, b) = (&tx[u], &ty[v]);
        let corners = [
            (a.i0, b.i0, (1.0 - a.t) * (1.0 - b.t)),
            (a.i1, b.i0, a.t * (1.0 - b.t)),
            (a.i0, b.i1, (1.0 - a.t) * b.t),
            (a.i1, b.i1, a.t * b.t),
        ];
        let (mut sum, mut wsum) = (0.0, 0.0);
        for (x, y, wt) in corners {
            if *validity.at(x, y) {
                sum += wt * depth.at(x, y);
                wsum += wt;
            }
        }
        if wsum > 0.0 {
            sum / wsum
        } else {
            *depth.at(
                nearest_index(u, depth.width(), width),
                nearest_index(v, depth.height(), height),
            )
        }
    });
    (depth_out, valid_out)
}

pub fn resize_observation(obs: &Observation, width: usize, height: usize) -> Result<Observation> {
    let camera = obs.camera.resized(width, height)?;
    let (depth, validity) = resize_depth(&obs.depth, &obs.validity, width, height);
    Ok(Observation {
        rgb: resize_rgb(&obs.rgb, width, height),
        depth,
        validity,
        camera,
    })
}

/// Resizes every buffer of a sample. Ground-truth maps are resampled with
/// nearest neighbor so they keep their value sets.
pub fn resize_sample(sample: &Sample, width: usize, height: usize) -> Result<Sample> {
    let m = &sample.maps;
    Ok(Sample {
        observation: resize_observation(&sample.observation, width, height)?,
        mask: resize_nearest(&sample.mask, width, height),
        maps: GraspMaps {
            quality: resize_nearest(&m.quality, width, height),
            cos2: resize_nearest(&m.cos2, width, height),
            sin2: resize_nearest(&m.sin2, width, height),
            width: resize_nearest(&m.width, width, height),
        },
        depth_gt: resize_bilinear(&sample.depth_gt, width, height),
        depth_gt_valid: resize_nearest(&sample.depth_gt_valid, width, height),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_minmax(&[3.0; 5]), vec![0.0; 5]);
        assert_eq!(normalize_minmax(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        let bytes: Vec<f64> = (0..=255).map(f64::from).collect();
        for (i, x) in normalize_minmax(&bytes).iter().enumerate() {
            assert_abs_diff_eq!(*x, i as f64 / 255.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn inpaint_identity_and_hole() {
        let d = Grid::from_fn(6, 5, |u, v| 0.5 + 0.01 * (u + v) as f64);
        let all = Grid::filled(6, 5, true);
        assert_eq!(inpaint_depth(&d, &all).unwrap(), d);

        let mut d = Grid::filled(7, 7, 0.42);
        let mut valid = Grid::filled(7, 7, true);
        *d.at_mut(3, 3) = 0.0;
        *valid.at_mut(3, 3) = false;
        let out = inpaint_depth(&d, &valid).unwrap();
        assert_abs_diff_eq!(*out.at(3, 3), 0.42, epsilon = 1e-5);

        let none = Grid::filled(4, 4, false);
        assert!(matches!(inpaint_depth(&d.map(|_| 1.0).clone(), &none), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            inpaint_depth(&Grid::filled(4, 4, 1.0), &none),
            Err(Error::Uninpaintable)
        ));
    }

    #[test]
    fn inpaint_large_hole_is_bounded_by_support() {
        let d = Grid::from_fn(16, 16, |u, _| 0.5 + 0.01 * u as f64);
        let valid = Grid::from_fn(16, 16, |u, v| !(3..13).contains(&u) || !(3..13).contains(&v));
        let out = inpaint_depth(&d, &valid).unwrap();
        for (i, (&z, &ok)) in out.as_slice().iter().zip(valid.as_slice()).enumerate() {
            if ok {
                assert_eq!(z, d.as_slice()[i]);
            }
            assert!((0.5..=0.65).contains(&z));
        }
    }

    #[test]
    fn resize_examples() {
        let g = Grid::from_fn(8, 8, |u, v| (u * 8 + v) as f64);
        assert_eq!(resize_bilinear(&g, 8, 8), g);
        let c = Grid::filled(16, 16, 0.3);
        assert!(resize_bilinear(&c, 8, 8).as_slice().iter().all(|&x| x == 0.3));
        let m = Grid::from_fn(9, 7, |u, v| (u + v) % 3 == 0);
        let r = resize_nearest(&m, 4, 5);
        assert_eq!(r.dims(), (4, 5));
    }

    #[test]
    fn depth_resize_ignores_holes() {
        let d = Grid::from_fn(4, 4, |u, _| if u % 2 == 0 { 0.5 } else { 0.0 });
        let valid = d.map(|&z| z > 0.0);
        let (out, ov) = resize_depth(&d, &valid, 2, 2);
        for (z, ok) in out.as_slice().iter().zip(ov.as_slice()) {
            if *ok {
                assert_eq!(*z, 0.5);
            }
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(xs in prop::collection::vec(-1e6f64..1e6, 1..64)) {
            let once = normalize_minmax(&xs);
            prop_assert!(once.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert_eq!(normalize_minmax(&once), once);
        }

        #[test]
        fn inpaint_preserves_support(
            vals in prop::collection::vec((0.2f64..1.5, prop::bool::weighted(0.6)), 48)
        ) {
            prop_assume!(vals.iter().any(|v| v.1));
            let d = Grid::from_vec(8, 6, vals.iter().map(|v| if v.1 { v.0 } else { 0.0 }).collect()).unwrap();
            let valid = Grid::from_vec(8, 6, vals.iter().map(|v| v.1).collect()).unwrap();
            let out = inpaint_depth(&d, &valid).unwrap();
            for i in 0..48 {
                if vals[i].1 {
                    prop_assert_eq!(out.as_slice()[i], d.as_slice()[i]);
                }
                prop_assert!(out.as_slice()[i] > 0.0);
            }
        }

        #[test]
        fn nearest_mask_stays_binary(bits in prop::collection::vec(any::<bool>(), 100), w in 1usize..20, h in 1usize..20) {
            let m = Grid::from_vec(10, 10, bits).unwrap();
            let r = resize_nearest(&m, w, h);
            let count = r.as_slice().iter().filter(|&&b| b).count();
            prop_assert!(count <= w * h);
            prop_assert_eq!(r.dims(), (w, h));
        }
    }
}
