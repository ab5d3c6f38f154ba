//! Convex hull of a pixel set and the minimum-area enclosing rectangle by
//! rotating calipers. Pixels are unit squares, so the hull is built from
//! pixel corners.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub center: Point,
    /// Extent along `angle`.
    pub width: f64,
    /// Extent perpendicular to `angle`.
    pub height: f64,
    /// Radians in `[0, pi/2)`.
    pub angle: f64,
}

impl RotatedRect {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull (in a y-up sense) without collinear vertices.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Corners of the leftmost and rightmost pixel of each row; their hull
/// equals the hull of all pixel squares.
pub fn mask_hull(mask: &BinaryMask) -> Result<Vec<Point>> {
    let mut corners = Vec::new();
    for v in 0..mask.height() {
        let row = &mask.as_slice()[v * mask.width()..(v + 1) * mask.width()];
        let (Some(first), Some(last)) = (row.iter().position(|&b| b), row.iter().rposition(|&b| b)) else {
            continue;
        };
        let (y0, y1) = (v as f64 - 0.5, v as f64 + 0.5);
        let (x0, x1) = (first as f64 - 0.5, last as f64 + 0.5);
        corners.extend_from_slice(&[(x0, y0), (x0, y1), (x1, y0), (x1, y1)]);
    }
    if corners.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(convex_hull(&corners))
}

/// Rectangle flush with hull edge `i`, as (area, rect). `top`, `right` and
/// `left` index the vertices with extreme projections.
fn edge_rect(hull: &[Point], i: usize, top: usize, right: usize, left: usize) -> RotatedRect {
    let n = hull.len();
    let p = hull[i];
    let q = hull[(i + 1) % n];
    let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
    let e = ((q.0 - p.0) / len, (q.1 - p.1) / len);
    let nrm = (-e.1, e.0);
    let proj = |k: usize, d: Point| (hull[k].0 - p.0) * d.0 + (hull[k].1 - p.1) * d.1;
    let max_e = proj(right, e);
    let min_e = proj(left, e);
    let max_n = proj(top, nrm);
    let mid_e = 0.5 * (max_e + min_e);
    let center = (
        p.0 + e.0 * mid_e + nrm.0 * 0.5 * max_n,
        p.1 + e.1 * mid_e + nrm.1 * 0.5 * max_n,
    );
    normalize_rect(center, max_e - min_e, max_n, e.1.atan2(e.0))
}

fn normalize_rect(center: Point, width: f64, height: f64, angle: f64) -> RotatedRect {
    let quarters = (angle / FRAC_PI_2).floor();
    let mut a = angle - quarters * FRAC_PI_2;
    let mut swap = (quarters as i64).rem_euclid(2) == 1;
    if a >= FRAC_PI_2 - 1e-12 {
        a = 0.0;
        swap = !swap;
    }
    if a < 1e-12 {
        a = 0.0;
    }
    let (width, height) = if swap { (height, width) } else { (width, height) };
    RotatedRect {
        center,
        width,
        height,
        angle: a,
    }
}

fn better(candidate: &RotatedRect, best: &RotatedRect) -> bool {
    let (ca, ba) = (candidate.area(), best.area());
    let tol = 1e-9 * ba.max(1.0);
    ca < ba - tol || ((ca - ba).abs() <= tol && candidate.angle < best.angle)
}

/// Minimum-area rectangle around a convex polygon via rotating calipers.
pub fn min_area_rect_of_hull(hull: &[Point]) -> Result<RotatedRect> {
    let n = hull.len();
    if n < 3 {
        return Err(Error::DegenerateObject(format!("hull with {n} vertices")));
    }
    let dir = |i: usize| {
        let (p, q) = (hull[i], hull[(i + 1) % n]);
        let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        ((q.0 - p.0) / len, (q.1 - p.1) / len)
    };
    let dot = |k: usize, d: Point| hull[k].0 * d.0 + hull[k].1 * d.1;
    let argext = |d: Point, sign: f64| {
        (0..n)
            .max_by(|&a, &b| (sign * dot(a, d)).total_cmp(&(sign * dot(b, d))))
            .unwrap()
    };
    let e0 = dir(0);
    let (mut top, mut right, mut left) = (argext((-e0.1, e0.0), 1.0), argext(e0, 1.0), argext(e0, -1.0));
    let mut best: Option<RotatedRect> = None;
    for i in 0..n {
        let e = dir(i);
        let nrm = (-e.1, e.0);
        for (ptr, d, sign) in [(&mut top, nrm, 1.0), (&mut right, e, 1.0), (&mut left, e, -1.0)] {
            let mut steps = 0;
            while steps < n && sign * dot((*ptr + 1) % n, d) > sign * dot(*ptr, d) {
                *ptr = (*ptr + 1) % n;
                steps += 1;
            }
        }
        let rect = edge_rect(hull, i, top, right, left);
        if best.as_ref().is_none_or(|b| better(&rect, b)) {
            best = Some(rect);
        }
    }
    Ok(best.expect("hull has edges"))
}

/// Minimum-area rotated rectangle enclosing every true pixel square.
pub fn min_area_rect(mask: &BinaryMask) -> Result<RotatedRect> {
    let hull = mask_hull(mask)?;
    min_area_rect_of_hull(&hull)
}
