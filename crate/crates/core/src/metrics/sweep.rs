use std::fmt::Write;

use super::{metric_pt, metric_rgg, metric_rgr, metric_sr, RggVariances, TrialRecord};
use crate::dataset::{scene_seed, synth_scene, NoiseModel, Observation, Sample, SceneConfig};
use crate::error::{Error, Result};
use crate::policy::{simulate_execution, PlannedGrasp, DEFAULT_GRIPPER_MAX_M};

pub const REPORT_HEADER: &str = "angle_deg,trials,sr_pct,rgr_pct,rgg_u,rgg_v,rgg_phi,rgg_w,pt_mean_ms,pt_p95_ms";
/// [`REPORT_HEADER`] without the wall-clock columns.
pub const REPORT_HEADER_NO_TIMING: &str = "angle_deg,trials,sr_pct,rgr_pct,rgg_u,rgg_v,rgg_phi,rgg_w";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Camera pitch above the table, degrees; 90 looks straight down.
    pub angles: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Scene geometry; its own noise settings are replaced by `noise`.
    pub scene: SceneConfig,
    pub noise: NoiseModel,
    /// Re-plans per angle for the robustness variances.
    pub rgg_runs: usize,
    pub gripper_max: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            angles: vec![0.0, 22.5, 45.0, 90.0],
            trials: 50,
            seed: 0,
            scene: SceneConfig::default(),
            noise: NoiseModel::default(),
            rgg_runs: 200,
            gripper_max: DEFAULT_GRIPPER_MAX_M,
        }
    }
}

impl SweepConfig {
    /// Scene settings at `angle` with the sweep's sensor noise.
    pub fn scene_at(&self, angle: f64) -> SceneConfig {
        SceneConfig {
            sigma_d: self.noise.sigma_d,
            p_miss_range: (self.noise.p_miss, self.noise.p_miss),
            ..self.scene.clone()
        }
        .with_pitch(angle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub angle_deg: f64,
    pub trials: usize,
    pub sr_pct: f64,
    pub rgr_pct: f64,
    pub rgg: RggVariances,
    pub pt_mean_ms: f64,
    pub pt_p95_ms: f64,
}

impl SweepRow {
    fn write_csv(&self, out: &mut String, timing: bool) {
        let _ = write!(
            out,
            "{},{},{:.2},{:.2},{:.6},{:.6},{:.6},{:.6}",
            self.angle_deg,
            self.trials,
            self.sr_pct,
            self.rgr_pct,
            self.rgg.u,
            self.rgg.v,
            self.rgg.phi,
            self.rgg.width
        );
        if timing {
            let _ = write!(out, ",{:.3},{:.3}", self.pt_mean_ms, self.pt_p95_ms);
        }
        out.push('\n');
    }
}

/// CSV report, one row per angle. Without `timing` the output depends only
/// on the seeds.
pub fn format_report(rows: &[SweepRow], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(if timing { REPORT_HEADER } else { REPORT_HEADER_NO_TIMING });
    out.push('\n');
    for r in rows {
        r.write_csv(&mut out, timing);
    }
    out
}

/// Plans and simulates one trial per scene.
pub fn run_trials(
    scenes: &[Sample],
    gripper_max: f64,
    planner: &mut dyn FnMut(&Observation) -> Result<PlannedGrasp>,
) -> Result<Vec<TrialRecord>> {
    scenes
        .iter()
        .map(|s| {
            let g = planner(&s.observation)?;
            let ok = simulate_execution(s, &g, gripper_max);
            Ok(TrialRecord::new(g, ok))
        })
        .collect()
}

/// Runs the trial protocol at every pitch angle. RGG is measured on the
/// first scene of each angle, rendered without noise and then corrupted
/// afresh for every run.
pub fn pitch_sweep(
    cfg: &SweepConfig,
    planner: &mut dyn FnMut(&Observation) -> Result<PlannedGrasp>,
) -> Result<Vec<SweepRow>> {
    if cfg.trials == 0 {
        return Err(Error::EmptyTrials);
    }
    let mut rows = Vec::with_capacity(cfg.angles.len());
    for &angle in &cfg.angles {
        let scene_cfg = cfg.scene_at(angle);
        let scenes = (0..cfg.trials)
            .map(|i| synth_scene(scene_seed(cfg.seed, i), &scene_cfg))
            .collect::<Result<Vec<_>>>()?;
        let trials = run_trials(&scenes, cfg.gripper_max, planner)?;
        let (pt_mean, pt_p95) = metric_pt(&trials)?;
        let rgg = if cfg.rgg_runs >= 2 {
            let clean_cfg = SceneConfig::noiseless(scene_cfg.size).with_pitch(angle);
            let clean_cfg = SceneConfig {
                table_depth: scene_cfg.table_depth,
                height_range: scene_cfg.height_range,
                ..clean_cfg
            };
            let clean = synth_scene(scene_seed(cfg.seed, 0), &clean_cfg)?.observation;
            let noise = NoiseModel {
                sigma_d: cfg.noise.sigma_d,
                p_miss: scene_cfg.dropout_rate(cfg.noise.p_miss),
            };
            metric_rgg(&clean, cfg.rgg_runs, &noise, cfg.seed ^ angle.to_bits(), planner)?
        } else {
            RggVariances::default()
        };
        log::info!("pitch={angle} trials={} done", trials.len());
        rows.push(SweepRow {
            angle_deg: angle,
            trials: trials.len(),
            sr_pct: metric_sr(&trials)?,
            rgr_pct: metric_rgr(&trials)?,
            rgg,
            pt_mean_ms: 1e3 * pt_mean,
            pt_p95_ms: 1e3 * pt_p95,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HandEyeTransform;
    use crate::nn::Prediction;
    use crate::policy::{plan, PlannerConfig};
    use std::time::Instant;

    /// Plans from maps labeled on the observation itself: the object is the
    /// region nearer than the table.
    fn depth_threshold_planner(obs: &Observation) -> Result<PlannedGrasp> {
        let received = Instant::now();
        let filled = crate::dataset::inpaint_depth(&obs.depth, &obs.validity)?;
        let far = filled.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mask = filled.map(|&z| z < far - 0.01);
        let maps = crate::labeler::label_ground_truth(&mask)?.maps;
        let pred = Prediction { maps, depth_est: filled };
        plan(&pred, obs, &HandEyeTransform::identity(), &PlannerConfig::default(), received)
    }

    fn small_sweep(noise: NoiseModel) -> SweepConfig {
        SweepConfig {
            angles: vec![90.0, 45.0],
            trials: 6,
            seed: 3,
            scene: SceneConfig {
                size: 32,
                ..SceneConfig::default()
            },
            noise,
            rgg_runs: 4,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_angle_and_ordered_rates() {
        let rows = pitch_sweep(&small_sweep(NoiseModel::default()), &mut depth_threshold_planner).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].angle_deg, 90.0);
        for r in &rows {
            assert_eq!(r.trials, 6);
            assert!(r.rgr_pct <= r.sr_pct);
            assert!(r.pt_mean_ms > 0.0 && r.pt_p95_ms >= 0.0);
        }
        let csv = format_report(&rows, true);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(REPORT_HEADER));
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 10);
    }

    #[test]
    fn zero_noise_gives_zero_rgg() {
        let rows = pitch_sweep(&small_sweep(NoiseModel::NONE), &mut depth_threshold_planner).unwrap();
        assert!(rows.iter().all(|r| r.rgg.all_zero()));
    }

    #[test]
    fn reports_repeat_without_timing() {
        let cfg = small_sweep(NoiseModel::default());
        let a = format_report(&pitch_sweep(&cfg, &mut depth_threshold_planner).unwrap(), false);
        let b = format_report(&pitch_sweep(&cfg, &mut depth_threshold_planner).unwrap(), false);
        assert_eq!(a, b);
    }

    #[test]
    fn oblique_views_drop_more_depth() {
        let cfg = SceneConfig::default();
        let rate = |pitch: f64| {
            let c = cfg.clone().with_pitch(pitch);
            let scenes = crate::dataset::synth_dataset(20, 5, &c).unwrap();
            let (miss, all) = scenes.iter().fold((0usize, 0usize), |(m, a), s| {
                let v = s.observation.validity.as_slice();
                (m + v.iter().filter(|&&x| !x).count(), a + v.len())
            });
            miss as f64 / all as f64
        };
        assert!(cfg.clone().with_pitch(45.0).mean_dropout_rate() > cfg.mean_dropout_rate());
        assert!(rate(45.0) > rate(90.0));
    }
}
