//! Grasp extraction from predicted maps, the open-loop planner and the
//! geometric execution oracle.

mod simulate;

pub use simulate::{simulate_detail, simulate_execution, SimulationDetail, JAW_CLEARANCE_PX};


use std::time::Instant;

use crate::dataset::Observation;
use crate::error::{Error, Result};
use crate::geometry::{
    camera_to_robot, decode_angle, deproject, estimate_surface_normal, in_plane_rotation, shortest_arc_quaternion,
    width_px_to_m, GraspPose, HandEyeTransform, ImageGrasp, Vec3,
};
use crate::grid::Grid;
use crate::nn::{NetInput, NetworkParams, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthSource {
    Measured,
    /// Taken from the auxiliary depth head because the sensor pixel was
    /// missing.
    Estimated,
}

impl DepthSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DepthSource::Measured => "measured",
            DepthSource::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationMode {
    /// Approach along the camera viewing axis.
    Viewpoint,
    /// Approach against the locally fitted surface normal.
    Normal,
}

impl std::str::FromStr for OrientationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "viewpoint" => Ok(Self::Viewpoint),
            "normal" => Ok(Self::Normal),
            other => Err(format!("unknown mode {other:?} (expected viewpoint or normal)")),
        }
    }
}

/// Extra opening beyond the predicted width: jaw clearance on both sides plus
/// slack for grasp centers that sit off the middle of the chord.
pub const DEFAULT_OPENING_MARGIN_PX: f64 = 10.0;

/// Default maximum gripper opening, meters. Covers the largest synthetic
/// object plus the opening margin.
pub const DEFAULT_GRIPPER_MAX_M: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub mode: OrientationMode,
    /// Added to the predicted width to get the commanded opening, pixels.
    pub opening_margin_px: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            mode: OrientationMode::Viewpoint,
            opening_margin_px: DEFAULT_OPENING_MARGIN_PX,
        }
    }
}

/// Result of [`extract_grasp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extracted {
    pub grasp: ImageGrasp,
    /// Depth at the grasp pixel, meters.
    pub z: f64,
    pub depth_source: DepthSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedGrasp {
    pub image_grasp: ImageGrasp,
    pub robot_pose: GraspPose,
    /// Grasp point in the camera frame, meters.
    pub camera_point: Vec3,
    /// Commanded opening, pixels.
    pub opening_px: f64,
    pub depth_source: DepthSource,
    pub orientation_source: OrientationMode,
    /// Set when normal mode fell back to the viewpoint orientation.
    pub normal_fallback: bool,
    /// Seconds from observation receipt to the returned plan.
    pub planning_time: f64,
}

/// Index of the selected maximum. Among equal maxima the one closest to
/// their centroid wins, then the first in row-major order.
fn select_max(q: &Grid<f64>) -> (usize, usize) {
    let best = q.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<(usize, usize)> = q.iter_indexed().filter(|(_, _, &x)| x == best).map(|(u, v, _)| (u, v)).collect();
    if ties.len() == 1 {
        return ties[0];
    }
    let n = ties.len() as f64;
    let cu = ties.iter().map(|t| t.0 as f64).sum::<f64>() / n;
    let cv = ties.iter().map(|t| t.1 as f64).sum::<f64>() / n;
    let mut pick = ties[0];
    let mut pick_d = f64::INFINITY;
    for &(u, v) in &ties {
        let d = (u as f64 - cu).powi(2) + (v as f64 - cv).powi(2);
        if d < pick_d {
            pick = (u, v);
            pick_d = d;
        }
    }
    pick
}

/// Picks the highest-quality pixel and reads angle, width and depth there.
/// Selection uses the raw quality map, so any strictly increasing transform
/// of Q selects the same pixel; the reported quality is clamped to `[0, 1]`.
pub fn extract_grasp(pred: &Prediction, obs: &Observation) -> Result<Extracted> {
    let maps = &pred.maps;
    obs.rgb.ensure_same_shape(&maps.quality, "maps/observation")?;
    obs.rgb.ensure_same_shape(&pred.depth_est, "depth estimate/observation")?;
    if !maps.all_finite() || !pred.depth_est.as_slice().iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("network outputs"));
    }
    let (u, v) = select_max(&maps.quality);
    let phi = match decode_angle(*maps.cos2.at(u, v), *maps.sin2.at(u, v)) {
        Ok(p) => p,
        Err(Error::UndefinedAngle) => 0.0,
        Err(e) => return Err(e),
    };
    let width_px = maps.width.at(u, v).max(0.0) * obs.width() as f64;
    let quality = maps.quality.at(u, v).clamp(0.0, 1.0);
    let (z, depth_source) = if *obs.validity.at(u, v) {
        (*obs.depth.at(u, v), DepthSource::Measured)
    } else {
        (*pred.depth_est.at(u, v), DepthSource::Estimated)
    };
    if !(z > 0.0) {
        return Err(Error::InvalidDepth(z));
    }
    Ok(Extracted {
        grasp: ImageGrasp {
            u,
            v,
            phi,
            width_px,
            quality,
        },
        z,
        depth_source,
    })
}

/// Turns predicted maps into a robot-frame grasp. `received` marks when the
/// raw observation arrived.
pub fn plan(
    pred: &Prediction,
    obs: &Observation,
    ext: &HandEyeTransform,
    cfg: &PlannerConfig,
    received: Instant,
) -> Result<PlannedGrasp> {
    let ex = extract_grasp(pred, obs)?;
    let g = ex.grasp;
    let camera_point = deproject(g.u as f64, g.v as f64, ex.z, &obs.camera)?;
    let position = camera_to_robot(&camera_point, ext);
    let mut normal_fallback = false;
    let approach = match cfg.mode {
        OrientationMode::Viewpoint => None,
        OrientationMode::Normal => {
            let depth = fill_missing(&obs.depth, &obs.validity, &pred.depth_est);
            let all = Grid::filled(obs.width(), obs.height(), true);
            match estimate_surface_normal(&depth, &all, g.u, g.v, &obs.camera) {
                Ok(n) => Some(shortest_arc_quaternion(&(-n))?),
                Err(Error::DegenerateNormal(msg)) => {
                    log::warn!("degenerate surface normal ({msg}); using the viewpoint orientation");
                    normal_fallback = true;
                    None
                }
                Err(e) => return Err(e),
            }
        }
    };
    let local = match approach {
        Some(q) => q * in_plane_rotation(g.phi),
        None => in_plane_rotation(g.phi),
    };
    let orientation = ext.rotation * local;
    let opening_px = g.width_px + cfg.opening_margin_px;
    let width = width_px_to_m(opening_px, ex.z, &obs.camera)?;
    let robot_pose = GraspPose::new(position, orientation, g.phi, width)?;
    Ok(PlannedGrasp {
        image_grasp: g,
        robot_pose,
        camera_point,
        opening_px,
        depth_source: ex.depth_source,
        orientation_source: cfg.mode,
        normal_fallback,
        planning_time: received.elapsed().as_secs_f64(),
    })
}

/// Measured depth with holes taken from the network estimate.
fn fill_missing(depth: &Grid<f64>, valid: &Grid<bool>, est: &Grid<f64>) -> Grid<f64> {
    Grid::from_fn(depth.width(), depth.height(), |u, v| {
        if *valid.at(u, v) {
            *depth.at(u, v)
        } else {
            *est.at(u, v)
        }
    })
}

/// Full open-loop pipeline for one observation: preprocessing, network
/// inference and planning, timed from entry.
pub fn plan_with_network(
    net: &NetworkParams,
    obs: &Observation,
    ext: &HandEyeTransform,
    cfg: &PlannerConfig,
) -> Result<PlannedGrasp> {
    let received = Instant::now();
    let input = NetInput::from_observation(obs)?;
    let pred = net.predict(&input)?;
    plan(&pred, obs, ext, cfg, received)
}
