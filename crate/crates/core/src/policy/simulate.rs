use crate::dataset::Sample;
use crate::grid::BinaryMask;
use crate::labeler::RAY_STEP_PX;

use super::PlannedGrasp;

/// Minimum free space each jaw needs beyond the object, pixels.
pub const JAW_CLEARANCE_PX: f64 = 2.0;

/// Which rule of the oracle a grasp passed or failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationDetail {
    pub center_on_object: bool,
    pub jaws_clear: bool,
    /// Object extent along the closing line through the center, pixels.
    pub extent_px: f64,
    /// Largest opening the gripper can reach at the grasp depth, pixels.
    pub max_opening_px: f64,
    pub success: bool,
}

/// Geometric antipodal oracle. The grasp succeeds when its center is on the
/// object, the last [`JAW_CLEARANCE_PX`] of the closing line before each jaw
/// is free of the mask, and
/// the commanded opening lies between the object extent and the gripper's
/// maximum opening.
pub fn simulate_execution(scene: &Sample, grasp: &PlannedGrasp, gripper_max: f64) -> bool {
    simulate_detail(scene, grasp, gripper_max).success
}

pub fn simulate_detail(scene: &Sample, grasp: &PlannedGrasp, gripper_max: f64) -> SimulationDetail {
    let mask = &scene.mask;
    let g = grasp.image_grasp;
    let center_on_object = mask.get(g.u as i64, g.v as i64) == Some(&true);
    let dir = {
        let (s, c) = g.phi.sin_cos();
        (c, s)
    };
    let half = grasp.opening_px / 2.0;
    let steps = (JAW_CLEARANCE_PX / RAY_STEP_PX) as usize;
    let jaws_clear = half > JAW_CLEARANCE_PX
        && [1.0, -1.0].iter().all(|&sign| {
            (0..steps).all(|k| {
                let t = sign * (half - k as f64 * RAY_STEP_PX);
                !on_mask(mask, (g.u as f64 + t * dir.0, g.v as f64 + t * dir.1))
            })
        });
    let extent_px = if center_on_object { extent_along(mask, (g.u, g.v), dir) } else { 0.0 };
    let z = grasp.camera_point.z;
    let max_opening_px = if z.is_finite() && z > 0.0 {
        gripper_max * scene.observation.camera.fx / z
    } else {
        0.0
    };
    let fits = extent_px <= grasp.opening_px && grasp.opening_px <= max_opening_px;
    SimulationDetail {
        center_on_object,
        jaws_clear,
        extent_px,
        max_opening_px,
        success: center_on_object && jaws_clear && fits,
    }
}

fn on_mask(mask: &BinaryMask, p: (f64, f64)) -> bool {
    mask.get((p.0 + 0.5).floor() as i64, (p.1 + 0.5).floor() as i64) == Some(&true)
}

/// Length of the contiguous run of object pixels crossed by the line through
/// `center`, measured between the outermost pixel centers plus one pixel.
fn extent_along(mask: &BinaryMask, center: (usize, usize), dir: (f64, f64)) -> f64 {
    let c = (center.0 as f64, center.1 as f64);
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for sign in [1.0, -1.0] {
        let mut k = 1u32;
        loop {
            let t = sign * k as f64 * RAY_STEP_PX;
            let p = (c.0 + t * dir.0, c.1 + t * dir.1);
            if !on_mask(mask, p) {
                break;
            }
            let (pu, pv) = ((p.0 + 0.5).floor(), (p.1 + 0.5).floor());
            let proj = (pu - c.0) * dir.0 + (pv - c.1) * dir.1;
            lo = lo.min(proj);
            hi = hi.max(proj);
            k += 1;
        }
    }
    hi - lo + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Observation, Sample};
    use crate::geometry::{CameraModel, GraspPose, ImageGrasp, Vec3};
    use crate::grid::Grid;
    use crate::policy::{DepthSource, OrientationMode};
    use nalgebra::UnitQuaternion;

    fn rect_scene() -> Sample {
        // 11 wide (u 20..=30), 21 tall (v 10..=30)
        let mask = BinaryMask::from_fn(48, 48, |u, v| (20..31).contains(&u) && (10..31).contains(&v));
        let obs = Observation::new(
            Grid::filled(48, 48, [0.5; 3]),
            Grid::filled(48, 48, 0.5),
            Grid::filled(48, 48, true),
            CameraModel::synthetic(48),
        )
        .unwrap();
        Sample::from_parts(obs, mask, true).unwrap()
    }

    fn grasp(u: usize, v: usize, phi: f64, opening: f64) -> PlannedGrasp {
        PlannedGrasp {
            image_grasp: ImageGrasp {
                u,
                v,
                phi,
                width_px: opening,
                quality: 1.0,
            },
            robot_pose: GraspPose::new(Vec3::zeros(), UnitQuaternion::identity(), phi, 0.01).unwrap(),
            camera_point: Vec3::new(0.0, 0.0, 0.5),
            opening_px: opening,
            depth_source: DepthSource::Measured,
            orientation_source: OrientationMode::Viewpoint,
            normal_fallback: false,
            planning_time: 1e-3,
        }
    }

    #[test]
    fn across_the_short_side_succeeds() {
        let s = rect_scene();
        assert!(simulate_execution(&s, &grasp(25, 20, 0.0, 15.0), 0.3));
        // one pixel off center leaves one jaw too close
        assert!(!simulate_execution(&s, &grasp(24, 20, 0.0, 15.0), 0.3));
        assert!(simulate_execution(&s, &grasp(24, 20, 0.0, 17.0), 0.3));
    }

    #[test]
    fn oracle_rules() {
        let s = rect_scene();
        // narrower than the object
        assert!(!simulate_execution(&s, &grasp(25, 20, 0.0, 9.0), 0.3));
        // center off the object
        assert!(!simulate_execution(&s, &grasp(5, 5, 0.0, 15.0), 0.3));
        // along the long side the jaws land on the object
        assert!(!simulate_execution(&s, &grasp(25, 20, -std::f64::consts::FRAC_PI_2, 15.0), 0.3));
        // beyond the gripper's reach: 15 px at 0.5 m with fx ~41.6 is ~0.18 m
        assert!(!simulate_execution(&s, &grasp(25, 20, 0.0, 15.0), 0.1));
    }

    #[test]
    fn jaws_need_clearance() {
        let s = rect_scene();
        // opening exactly the extent puts the jaws on the boundary pixels
        let d = simulate_detail(&s, &grasp(25, 20, 0.0, 11.0), 0.3);
        assert!(d.center_on_object);
        assert_eq!(d.extent_px, 11.0);
        assert!(!d.jaws_clear);
    }
}
