use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CameraModel, HandEyeTransform};
use crate::error::{Error, Result};

/// Camera intrinsics plus hand-eye extrinsics as stored on disk:
///
/// ```text
/// fx = 55.4
/// fy = 55.4
/// cx = 31.5
/// cy = 31.5
/// width = 64
/// height = 64
/// quaternion = [1.0, 0.0, 0.0, 0.0]   # w, x, y, z
/// translation = [0.0, 0.0, 0.0]       # meters
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "identity_wxyz")]
    pub quaternion: [f64; 4],
    #[serde(default)]
    pub translation: [f64; 3],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl CameraConfig {
    pub fn new(cam: &CameraModel, ext: &HandEyeTransform) -> Self {
        let q = ext.rotation.into_inner();
        Self {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [ext.translation.x, ext.translation.y, ext.translation.z],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("camera config serializes")
    }

    pub fn camera(&self) -> Result<CameraModel> {
        CameraModel::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }

    pub fn hand_eye(&self) -> Result<HandEyeTransform> {
        HandEyeTransform::from_wxyz(self.quaternion, self.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_key_values() {
        let cfg = CameraConfig::parse(
            "fx = 100\nfy = 100.0\ncx = 50\ncy = 50\nwidth = 200\nheight = 200\n\
             quaternion = [1, 0, 0, 0]\ntranslation = [0.1, 0.0, 0.5]\n",
        )
        .unwrap();
        let cam = cfg.camera().unwrap();
        assert_eq!(cam.fx, 100.0);
        assert_eq!(cfg.hand_eye().unwrap().translation.z, 0.5);
    }

    #[test]
    fn extrinsics_default_to_identity() {
        let cfg = CameraConfig::parse("fx = 1\nfy = 1\ncx = 0\ncy = 0\nwidth = 4\nheight = 4\n").unwrap();
        assert_eq!(cfg.hand_eye().unwrap(), HandEyeTransform::identity());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(CameraConfig::parse("fx = 1\nfy = 1\ncx = 0\ncy = 0\nwidth = 4\nheight = 4\nfoo = 1\n").is_err());
        let cfg = CameraConfig::parse("fx = -1\nfy = 1\ncx = 0\ncy = 0\nwidth = 4\nheight = 4\n").unwrap();
        assert!(cfg.camera().is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let cam = CameraModel::synthetic(64);
        let cfg = CameraConfig::new(&cam, &HandEyeTransform::identity());
        let back = CameraConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back.camera().unwrap(), cam);
    }
}
