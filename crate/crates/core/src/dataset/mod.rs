//! Observations, training samples, preprocessing, the synthetic scene
//! generator and on-disk formats.

mod io;
mod noise;
mod preprocess;
mod split;
mod synth;

pub use io::{
    decode_gmap, encode_gmap, load_manifest, load_observation, load_sample, read_gmap, write_gmap, write_manifest,
    write_sample_pngs, ManifestEntry,
};
pub use noise::NoiseModel;
pub use preprocess::{
    inpaint_depth, normalize_minmax, normalize_minmax_in_place, resize_bilinear, resize_depth, resize_nearest,
    resize_observation, resize_sample,
};
pub use split::split;
pub use synth::{scene_seed, synth_dataset, synth_scene, SceneConfig, ShapeKind};

use crate::error::{Error, Result};
use crate::geometry::CameraModel;
use crate::grid::{BinaryMask, Grid};
use crate::labeler::label_ground_truth;
use crate::maps::GraspMaps;

pub type Rgb = [f64; 3];

/// Aligned RGB + depth frame with per-pixel depth validity.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Channel values in `[0, 1]`.
    pub rgb: Grid<Rgb>,
    /// Meters; only meaningful where `validity` is set.
    pub depth: Grid<f64>,
    pub validity: Grid<bool>,
    pub camera: CameraModel,
}

impl Observation {
    pub fn new(rgb: Grid<Rgb>, depth: Grid<f64>, validity: Grid<bool>, camera: CameraModel) -> Result<Self> {
        let obs = Self {
            rgb,
            depth,
            validity,
            camera,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        self.rgb.ensure_same_shape(&self.depth, "rgb/depth")?;
        self.rgb.ensure_same_shape(&self.validity, "rgb/validity")?;
        if (self.camera.width, self.camera.height) != self.rgb.dims() {
            return Err(Error::ShapeMismatch(format!(
                "camera {}x{} vs image {}x{}",
                self.camera.width,
                self.camera.height,
                self.rgb.width(),
                self.rgb.height()
            )));
        }
        for (&z, &ok) in self.depth.as_slice().iter().zip(self.validity.as_slice()) {
            if ok && !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidDepth(z));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }
}

/// One labeled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observation: Observation,
    pub mask: BinaryMask,
    pub maps: GraspMaps,
    /// Hole-free depth target for the auxiliary depth head, meters.
    pub depth_gt: Grid<f64>,
    /// Pixels where `depth_gt` counts in the depth loss.
    pub depth_gt_valid: Grid<bool>,
}

impl Sample {
    /// Labels `mask` and inpaints the depth target. `target_all_valid`
    /// selects whether every inpainted pixel counts in the depth loss or
    /// only the measured ones.
    pub fn from_parts(observation: Observation, mask: BinaryMask, target_all_valid: bool) -> Result<Self> {
        observation.validate()?;
        observation.rgb.ensure_same_shape(&mask, "rgb/mask")?;
        let label = label_ground_truth(&mask)?;
        let depth_gt = inpaint_depth(&observation.depth, &observation.validity)?;
        let depth_gt_valid = if target_all_valid {
            Grid::filled(observation.width(), observation.height(), true)
        } else {
            observation.validity.clone()
        };
        Ok(Self {
            observation,
            mask,
            maps: label.maps,
            depth_gt,
            depth_gt_valid,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.observation.validate()?;
        let o = &self.observation.rgb;
        o.ensure_same_shape(&self.mask, "mask")?;
        o.ensure_same_shape(&self.maps.quality, "maps")?;
        o.ensure_same_shape(&self.depth_gt, "depth target")?;
        o.ensure_same_shape(&self.depth_gt_valid, "depth target validity")?;
        self.maps.validate_ground_truth()
    }
}
