//! Plans grasps from ground-truth maps in both orientation modes, then
//! checks them with the execution simulator, including a missing-depth
//! fallback.

use std::time::Instant;

use graspfuse::dataset::{synth_dataset, SceneConfig};
use graspfuse::geometry::HandEyeTransform;
use graspfuse::nn::Prediction;
use graspfuse::policy::{plan, simulate_detail, OrientationMode, PlannerConfig, DEFAULT_GRIPPER_MAX_M};

fn main() -> graspfuse::Result<()> {
    let ext = HandEyeTransform::from_wxyz([0.0, 1.0, 0.0, 0.0], [0.4, 0.0, 0.6])?;
    let scenes = synth_dataset(6, 21, &SceneConfig::default().with_pitch(60.0))?;
    for (i, s) in scenes.iter().enumerate() {
        let pred = Prediction {
            maps: s.maps.clone(),
            depth_est: s.depth_gt.clone(),
        };
        for mode in [OrientationMode::Viewpoint, OrientationMode::Normal] {
            let cfg = PlannerConfig { mode, ..Default::default() };
            let g = plan(&pred, &s.observation, &ext, &cfg, Instant::now())?;
            let d = simulate_detail(s, &g, DEFAULT_GRIPPER_MAX_M);
            let ig = g.image_grasp;
            println!(
                "scene {i} {mode:?}: ({}, {}) phi {:+.0} deg, {:.3} m at {:.3?}, approach {:.3?}, depth {}, success {} (extent {:.1} / opening {:.1} px)",
                ig.u,
                ig.v,
                ig.phi.to_degrees(),
                g.robot_pose.width,
                g.robot_pose.position.as_slice(),
                g.robot_pose.approach_axis().as_slice(),
                g.depth_source.as_str(),
                d.success,
                d.extent_px,
                g.opening_px
            );
        }
    }

    // Knock out the measured depth at the chosen pixel.
    let s = &scenes[0];
    let pred = Prediction {
        maps: s.maps.clone(),
        depth_est: s.depth_gt.clone(),
    };
    let cfg = PlannerConfig::default();
    let g = plan(&pred, &s.observation, &ext, &cfg, Instant::now())?;
    let mut obs = s.observation.clone();
    *obs.validity.at_mut(g.image_grasp.u, g.image_grasp.v) = false;
    let fb = plan(&pred, &obs, &ext, &cfg, Instant::now())?;
    println!(
        "fallback: depth {} moves the grasp by {:.2} mm",
        fb.depth_source.as_str(),
        1000.0 * (fb.robot_pose.position - g.robot_pose.position).norm()
    );
    Ok(())
}
