use nalgebra::{Matrix3, Quaternion, SymmetricEigen, UnitQuaternion};

use super::{deproject, CameraModel, Vec3};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Side length of the square window used for plane fitting.
pub const NORMAL_WINDOW: usize = 5;

/// Minimal rotation taking `(0, 0, 1)` onto the unit vector `n`.
///
/// The result has a non-negative scalar part. For `n = (0, 0, -1)` the
/// shortest arc is not unique and a 180 degree turn about +x is returned.
pub fn shortest_arc_quaternion(n: &Vec3) -> Result<UnitQuaternion<f64>> {
    if !n.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("normal"));
    }
    let norm = n.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotUnit(norm));
    }
    if n.x == 0.0 && n.y == 0.0 && n.z < 0.0 {
        return Ok(UnitQuaternion::from_quaternion(Quaternion::new(0.0, 1.0, 0.0, 0.0)));
    }
    // q = (1 + z.n, z x n), normalized.
    let q = Quaternion::new(1.0 + n.z, -n.y, n.x, 0.0);
    Ok(UnitQuaternion::from_quaternion(q))
}

/// Rotation by `phi` about the local approach (+z) axis.
pub fn in_plane_rotation(phi: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), phi)
}

/// Least-squares plane normal around pixel `(u, v)`, oriented toward the
/// sensor (negative camera-frame z).
pub fn estimate_surface_normal(
    depth: &Grid<f64>,
    valid: &Grid<bool>,
    u: usize,
    v: usize,
    cam: &CameraModel,
) -> Result<Vec3> {
    depth.ensure_same_shape(valid, "depth/validity")?;
    let half = (NORMAL_WINDOW / 2) as i64;
    let mut points = Vec::with_capacity(NORMAL_WINDOW * NORMAL_WINDOW);
    for dv in -half..=half {
        for du in -half..=half {
            let (pu, pv) = (u as i64 + du, v as i64 + dv);
            let (Some(&z), Some(&ok)) = (depth.get(pu, pv), valid.get(pu, pv)) else {
                continue;
            };
            if !ok || !z.is_finite() || z <= 0.0 {
                continue;
            }
            if let Ok(p) = deproject(pu as f64, pv as f64, z, cam) {
                points.push(p);
            }
        }
    }
    if points.len() < 3 {
        return Err(Error::DegenerateNormal(format!("{} valid points", points.len())));
    }
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (smallest, middle, largest) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if largest <= 0.0 || middle <= 1e-12 * largest {
        return Err(Error::DegenerateNormal("collinear points".into()));
    }
    debug_assert!(smallest >= -1e-12 * largest);
    let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    n.normalize_mut();
    if n.z > 0.0 {
        n = -n;
    }
    Ok(n)
}
