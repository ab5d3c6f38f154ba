//! Pitch sweep with a simple depth-threshold planner standing in for a
//! trained network: success rates, robustness variances, timing, and a
//! quality heatmap.

use std::time::Instant;

use graspfuse::dataset::{inpaint_depth, Observation};
use graspfuse::geometry::{encode_angle, HandEyeTransform};
use graspfuse::metrics::{format_report, pitch_sweep, render_heatmap, SweepConfig};
use graspfuse::nn::Prediction;
use graspfuse::policy::{plan, PlannerConfig};
use graspfuse::{Grid, GraspMaps};

/// Quality = height above the farthest depth, horizontal grasps 20 px wide.
fn heuristic(obs: &Observation) -> graspfuse::Result<Prediction> {
    let depth = inpaint_depth(&obs.depth, &obs.validity)?;
    let far = depth.as_slice().iter().copied().fold(f64::MIN, f64::max);
    let (w, h) = depth.dims();
    let (c, s) = encode_angle(0.0)?;
    let maps = GraspMaps::new(
        depth.map(|&z| far - z),
        Grid::filled(w, h, c),
        Grid::filled(w, h, s),
        Grid::filled(w, h, 20.0 / w as f64),
    )?;
    Ok(Prediction { maps, depth_est: depth })
}

fn main() -> graspfuse::Result<()> {
    let cfg = SweepConfig {
        trials: 20,
        rgg_runs: 20,
        ..Default::default()
    };
    let ext = HandEyeTransform::identity();
    let pc = PlannerConfig::default();
    let rows = pitch_sweep(&cfg, &mut |obs| {
        let t = Instant::now();
        plan(&heuristic(obs)?, obs, &ext, &pc, t)
    })?;
    print!("{}", format_report(&rows, true));

    let scene = graspfuse::dataset::synth_scene(0, &cfg.scene_at(45.0))?;
    let pred = heuristic(&scene.observation)?;
    let g = plan(&pred, &scene.observation, &ext, &pc, Instant::now())?;
    let path = std::env::temp_dir().join("graspfuse_heatmap.png");
    render_heatmap(&pred.maps.quality, &scene.observation.rgb, Some(&g.image_grasp), &path)?;
    println!("heatmap written to {}", path.display());
    Ok(())
}
