//! Grasp representations and the transforms between image, camera and
//! robot-base frames.
//!
//! Pixel coordinates are always `(u, v)` = (column, row). The grasp angle
//! `phi` is the direction of the jaw-closing line measured from the image
//! +u axis toward +v, wrapped to `[-pi/2, pi/2)`.

mod angle;
mod camera;
mod config;
mod rotation;

pub use angle::{decode_angle, encode_angle, wrap_half_pi};
pub use camera::{camera_to_robot, deproject, project, robot_to_camera, width_px_to_m, CameraModel, HandEyeTransform};
pub use config::CameraConfig;
pub use rotation::{estimate_surface_normal, in_plane_rotation, shortest_arc_quaternion, NORMAL_WINDOW};

use nalgebra::{UnitQuaternion, Vector3};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A parallel-jaw grasp in the robot base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspPose {
    /// Meters, robot base frame.
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    /// In-plane gripper rotation, radians in `[-pi/2, pi/2)`.
    pub phi: f64,
    /// Gripper opening, meters.
    pub width: f64,
}

impl GraspPose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>, phi: f64, width: f64) -> Result<Self> {
        if !position.iter().all(|x| x.is_finite()) || !phi.is_finite() || !width.is_finite() {
            return Err(Error::NonFinite("grasp pose"));
        }
        if width < 0.0 {
            return Err(Error::InvalidGrasp(format!("negative width {width}")));
        }
        if !(-FRAC_PI_2..FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidGrasp(format!("phi {phi} outside [-pi/2, pi/2)")));
        }
        Ok(Self {
            position,
            orientation,
            phi,
            width,
        })
    }

    /// Builds a pose from the boundary form `(x, y, z, gamma_x, beta_y, alpha_z)`
    /// with ZYX intrinsic Euler angles.
    pub fn from_euler(pose: [f64; 6], phi: f64, width: f64) -> Result<Self> {
        let [x, y, z, gx, by, az] = pose;
        Self::new(
            Vec3::new(x, y, z),
            UnitQuaternion::from_euler_angles(gx, by, az),
            phi,
            width,
        )
    }

    /// `(x, y, z, gamma_x, beta_y, alpha_z)`.
    pub fn to_euler(&self) -> [f64; 6] {
        let (gx, by, az) = self.orientation.euler_angles();
        [self.position.x, self.position.y, self.position.z, gx, by, az]
    }

    /// Unit approach axis (the gripper's local +z) in the base frame.
    pub fn approach_axis(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }
}

/// A grasp in image space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrasp {
    pub u: usize,
    pub v: usize,
    pub phi: f64,
    pub width_px: f64,
    pub quality: f64,
}
