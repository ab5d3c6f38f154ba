//! Ground-truth grasp labels from object masks.
//!
//! The grasp center is the center of the minimum-area rectangle around the
//! object (snapped onto the mask), the grasp axis is the shortest chord
//! through that center, and the positive region is an ellipse whose major
//! axis is the chord (`a = L/2`, `b = L/4`).

mod chord;
mod components;
mod ellipse;
mod rect;

pub use chord::{chord_extents, ray_extent, shortest_chord, ChordResult, DEFAULT_CHORD_STEP, RAY_STEP_PX};
pub use components::largest_component;
pub use ellipse::{in_ellipse, rasterize_ellipse};
pub use rect::{convex_hull, mask_hull, min_area_rect, min_area_rect_of_hull, RotatedRect};

use crate::error::{Error, Result};
use crate::geometry::encode_angle;
use crate::grid::BinaryMask;
use crate::maps::GraspMaps;

/// Output of [`label_ground_truth`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraspLabel {
    pub maps: GraspMaps,
    pub chord: ChordResult,
    pub rect: RotatedRect,
    /// The elliptical positive window.
    pub window: BinaryMask,
}

/// Mask pixel nearest to `(x, y)`; ties go to the earliest in row-major
/// order.
pub fn snap_to_mask(mask: &BinaryMask, x: f64, y: f64) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (u, v, &on) in mask.iter_indexed() {
        if !on {
            continue;
        }
        let d = (u as f64 - x).powi(2) + (v as f64 - y).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some(((u, v), d));
        }
    }
    best.map(|(p, _)| p).ok_or(Error::EmptyMask)
}

/// Labels one object mask with an elliptical grasp window.
pub fn label_ground_truth(mask: &BinaryMask) -> Result<GraspLabel> {
    label_with_step(mask, DEFAULT_CHORD_STEP)
}

pub fn label_with_step(mask: &BinaryMask, step: f64) -> Result<GraspLabel> {
    let object = largest_component(mask)?;
    let rect = min_area_rect(&object)?;
    let center = snap_to_mask(&object, rect.center.0, rect.center.1)?;
    let chord = shortest_chord(&object, center, step)?;
    if chord.length <= 0.0 {
        return Err(Error::DegenerateObject(format!(
            "zero-length chord at ({}, {})",
            center.0, center.1
        )));
    }
    let (w, h) = mask.dims();
    let window = rasterize_ellipse(
        (center.0 as f64, center.1 as f64),
        chord.theta,
        chord.length / 2.0,
        chord.length / 4.0,
        w,
        h,
    )?;
    let (c2, s2) = encode_angle(chord.theta)?;
    let width_norm = chord.length / w as f64;
    let mut maps = GraspMaps::zeros(w, h);
    for (i, &on) in window.as_slice().iter().enumerate() {
        if on {
            maps.quality.as_mut_slice()[i] = 1.0;
            maps.cos2.as_mut_slice()[i] = c2;
            maps.sin2.as_mut_slice()[i] = s2;
            maps.width.as_mut_slice()[i] = width_norm;
        }
    }
    Ok(GraspLabel {
        maps,
        chord,
        rect,
        window,
    })
}
