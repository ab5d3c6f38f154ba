use nalgebra::{Quaternion, UnitQuaternion};

use super::Vec3;
use crate::error::{Error, Result};

/// Pinhole intrinsics of the (depth-aligned) color camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidCamera("non-finite intrinsics".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive (fx={fx}, fy={fy})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("empty image".into()));
        }
        if cx < 0.0 || cy < 0.0 || cx >= width as f64 || cy >= height as f64 {
            return Err(Error::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square synthetic camera with a ~60 degree horizontal field of view.
    pub fn synthetic(size: usize) -> Self {
        Self::default_for(size, size)
    }

    /// Centered pinhole camera with a ~60 degree horizontal field of view.
    pub fn default_for(width: usize, height: usize) -> Self {
        let f = width.max(1) as f64 / (2.0 * (30f64).to_radians().tan());
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        Self::new(f, f, cx, cy, width.max(1), height.max(1)).expect("valid default camera")
    }

    /// Intrinsics after resampling the image to `width x height`, keeping
    /// pixel centers aligned.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        )
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Lifts pixel `(u, v)` at depth `z` into the camera frame.
pub fn deproject(u: f64, v: f64, z: f64, cam: &CameraModel) -> Result<Vec3> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::InvalidDepth(z));
    }
    if !cam.contains(u, v) {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: cam.width,
            height: cam.height,
        });
    }
    Ok(Vec3::new((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z))
}

/// Projects a camera-frame point to sub-pixel image coordinates.
pub fn project(p: &Vec3, cam: &CameraModel) -> Result<(f64, f64)> {
    if !p.z.is_finite() || p.z <= 0.0 {
        return Err(Error::InvalidDepth(p.z));
    }
    Ok((cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy))
}

/// Pinhole conversion of an image-space opening to meters.
pub fn width_px_to_m(width_px: f64, z: f64, cam: &CameraModel) -> Result<f64> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::InvalidDepth(z));
    }
    if !width_px.is_finite() || width_px < 0.0 {
        return Err(Error::InvalidGrasp(format!("width {width_px} px")));
    }
    Ok(width_px * z / cam.fx)
}

/// Rigid transform from the camera frame to the robot base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandEyeTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl Default for HandEyeTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl HandEyeTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// From a `(w, x, y, z)` quaternion and a translation in meters. The
    /// quaternion must already be unit length to 1e-6.
    pub fn from_wxyz(q: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let [w, x, y, z] = q;
        let quat = Quaternion::new(w, x, y, z);
        let n = quat.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidQuaternion(format!("norm {n}")));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::NonFinite("translation"));
        }
        Ok(Self {
            rotation: UnitQuaternion::from_quaternion(quat),
            translation: Vec3::from(translation),
        })
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            rotation,
            translation: -(rotation * self.translation),
        }
    }
}

/// `R p + t`.
pub fn camera_to_robot(p: &Vec3, ext: &HandEyeTransform) -> Vec3 {
    ext.rotation * p + ext.translation
}

/// Inverse of [`camera_to_robot`].
pub fn robot_to_camera(p: &Vec3, ext: &HandEyeTransform) -> Vec3 {
    ext.rotation.inverse() * (p - ext.translation)
}
