//! Success rate, robust grasp rate, robust grasp generation and planning
//! time over controller trials, plus the pitch sweep protocol and heatmap
//! rendering.

mod heatmap;
mod sweep;

pub use heatmap::{heatmap_image, render_heatmap, ColorRamp, HEATMAP_ALPHA};
pub use sweep::{format_report, pitch_sweep, run_trials, SweepConfig, SweepRow, REPORT_HEADER, REPORT_HEADER_NO_TIMING};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{NoiseModel, Observation};
use crate::error::{Error, Result};
use crate::policy::PlannedGrasp;

/// Quality above which a successful trial also counts as robust.
pub const ROBUST_QUALITY: f64 = 0.5;

/// One controller run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub grasp: PlannedGrasp,
    pub success: bool,
    /// Selected quality, clamped to `[0, 1]`.
    pub quality: f64,
    /// Seconds.
    pub planning_time: f64,
}

impl TrialRecord {
    pub fn new(grasp: PlannedGrasp, success: bool) -> Self {
        Self {
            quality: grasp.image_grasp.quality.clamp(0.0, 1.0),
            planning_time: grasp.planning_time,
            grasp,
            success,
        }
    }
}

fn ensure_nonempty(trials: &[TrialRecord]) -> Result<()> {
    if trials.is_empty() {
        Err(Error::EmptyTrials)
    } else {
        Ok(())
    }
}

/// Percentage of successful trials.
pub fn metric_sr(trials: &[TrialRecord]) -> Result<f64> {
    ensure_nonempty(trials)?;
    let ok = trials.iter().filter(|t| t.success).count();
    Ok(100.0 * ok as f64 / trials.len() as f64)
}

/// Percentage of trials that succeed with quality above [`ROBUST_QUALITY`].
pub fn metric_rgr(trials: &[TrialRecord]) -> Result<f64> {
    ensure_nonempty(trials)?;
    let ok = trials.iter().filter(|t| t.success && t.quality > ROBUST_QUALITY).count();
    Ok(100.0 * ok as f64 / trials.len() as f64)
}

/// Mean and nearest-rank 95th percentile of the planning time, seconds.
pub fn metric_pt(trials: &[TrialRecord]) -> Result<(f64, f64)> {
    ensure_nonempty(trials)?;
    let mut times: Vec<f64> = trials.iter().map(|t| t.planning_time).collect();
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    Ok((mean, percentile_nearest_rank(&times, 95.0)))
}

/// Nearest-rank percentile of an ascending, non-empty slice.
pub fn percentile_nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    // Welford's update: a constant sample leaves the mean exact, so its
    // variance is exactly zero.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    m2 / xs.len() as f64
}

/// Circular variance `1 - R` of the doubled angles, so `phi` and
/// `phi + pi` count as the same grasp. In `[0, 1]`.
pub fn circular_variance_2phi(phis: &[f64]) -> f64 {
    if phis.is_empty() {
        return 0.0;
    }
    let n = phis.len() as f64;
    let (c, s) = phis
        .iter()
        .fold((0.0, 0.0), |(c, s), p| (c + (2.0 * p).cos(), s + (2.0 * p).sin()));
    let r = (c / n).hypot(s / n);
    (1.0 - r).max(0.0)
}

/// Spread of repeated plans for one scene.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RggVariances {
    /// Pixels squared.
    pub u: f64,
    pub v: f64,
    /// Circular variance of `2 phi`.
    pub phi: f64,
    /// Pixels squared.
    pub width: f64,
}

impl RggVariances {
    pub fn from_grasps(grasps: &[PlannedGrasp]) -> Self {
        let pick = |f: fn(&PlannedGrasp) -> f64| grasps.iter().map(f).collect::<Vec<_>>();
        Self {
            u: population_variance(&pick(|g| g.image_grasp.u as f64)),
            v: population_variance(&pick(|g| g.image_grasp.v as f64)),
            phi: circular_variance_2phi(&pick(|g| g.image_grasp.phi)),
            width: population_variance(&pick(|g| g.image_grasp.width_px)),
        }
    }

    pub fn all_zero(&self) -> bool {
        self.u == 0.0 && self.v == 0.0 && self.phi == 0.0 && self.width == 0.0
    }

    pub fn any_positive(&self) -> bool {
        self.u > 0.0 || self.v > 0.0 || self.phi > 0.0 || self.width > 0.0
    }
}

/// Re-plans `runs` times on `clean` with freshly sampled sensor noise and
/// returns the variances of the planned grasp parameters.
pub fn metric_rgg(
    clean: &Observation,
    runs: usize,
    noise: &NoiseModel,
    seed: u64,
    planner: &mut dyn FnMut(&Observation) -> Result<PlannedGrasp>,
) -> Result<RggVariances> {
    if runs < 2 {
        return Err(Error::InvalidArgument(format!("rgg needs at least 2 runs, got {runs}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grasps = Vec::with_capacity(runs);
    for _ in 0..runs {
        let noisy = noise.apply(clean, &mut rng);
        grasps.push(planner(&noisy)?);
    }
    Ok(RggVariances::from_grasps(&grasps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GraspPose, ImageGrasp, Vec3};
    use crate::policy::{DepthSource, OrientationMode};
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    pub(crate) fn fake_grasp(u: usize, v: usize, phi: f64, width_px: f64, quality: f64, time: f64) -> PlannedGrasp {
        PlannedGrasp {
            image_grasp: ImageGrasp {
                u,
                v,
                phi,
                width_px,
                quality,
            },
            robot_pose: GraspPose::new(Vec3::zeros(), UnitQuaternion::identity(), phi, 0.05).unwrap(),
            camera_point: Vec3::new(0.0, 0.0, 0.5),
            opening_px: width_px + 10.0,
            depth_source: DepthSource::Measured,
            orientation_source: OrientationMode::Viewpoint,
            normal_fallback: false,
            planning_time: time,
        }
    }

    fn trial(success: bool, quality: f64, time: f64) -> TrialRecord {
        TrialRecord::new(fake_grasp(0, 0, 0.0, 5.0, quality, time), success)
    }

    #[test]
    fn success_rates() {
        let mut ts: Vec<_> = (0..10).map(|i| trial(i < 9, if i < 8 { 0.9 } else { 0.3 }, 0.01)).collect();
        assert_eq!(metric_sr(&ts).unwrap(), 90.0);
        assert_eq!(metric_rgr(&ts).unwrap(), 80.0);
        for t in &mut ts {
            t.quality = 0.5;
        }
        assert_eq!(metric_rgr(&ts).unwrap(), 0.0);
        let fails: Vec<_> = (0..4).map(|_| trial(false, 1.0, 0.01)).collect();
        assert_eq!(metric_sr(&fails).unwrap(), 0.0);
        let wins: Vec<_> = (0..4).map(|_| trial(true, 1.0, 0.01)).collect();
        assert_eq!(metric_sr(&wins).unwrap(), 100.0);
        assert!(matches!(metric_sr(&[]), Err(Error::EmptyTrials)));
        assert!(matches!(metric_pt(&[]), Err(Error::EmptyTrials)));
    }

    #[test]
    fn planning_time_stats() {
        let same: Vec<_> = (0..5).map(|_| trial(true, 1.0, 0.032)).collect();
        assert_eq!(metric_pt(&same).unwrap(), (0.032, 0.032));
        let ts: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&t| trial(true, 1.0, t)).collect();
        assert_eq!(metric_pt(&ts).unwrap().0, 2.0);
        let skew: Vec<_> = [1.0, 1.0, 1.0, 10.0].iter().map(|&t| trial(true, 1.0, t)).collect();
        let (mean, p95) = metric_pt(&skew).unwrap();
        assert_eq!(mean, 3.25);
        assert_eq!(p95, 10.0);
    }

    #[test]
    fn rgg_variances() {
        let g = [fake_grasp(10, 5, 0.3, 4.0, 1.0, 0.0), fake_grasp(12, 5, 0.3, 4.0, 1.0, 0.0)];
        let v = RggVariances::from_grasps(&g);
        assert_eq!(v.u, 1.0);
        assert_eq!(v.v, 0.0);
        assert!(v.phi.abs() < 1e-15);
        // opposite ends of the angle range are the same grasp axis
        let wrap = [-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2 - 1e-12];
        assert!(circular_variance_2phi(&wrap) < 1e-12);
        assert!((circular_variance_2phi(&[0.0, std::f64::consts::FRAC_PI_4 * 2.0 - 1e-12]) - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn rates_are_ordered_and_permutation_invariant(
            raw in prop::collection::vec((any::<bool>(), 0.0f64..1.0, 0.0f64..1.0), 1..40),
        ) {
            let ts: Vec<_> = raw.iter().map(|&(s, q, t)| trial(s, q, t)).collect();
            let (sr, rgr) = (metric_sr(&ts).unwrap(), metric_rgr(&ts).unwrap());
            prop_assert!(0.0 <= rgr && rgr <= sr && sr <= 100.0);
            let mut rev = ts.clone();
            rev.reverse();
            prop_assert_eq!(metric_sr(&rev).unwrap(), sr);
            prop_assert_eq!(metric_rgr(&rev).unwrap(), rgr);
            let (m1, p1) = metric_pt(&ts).unwrap();
            let (m2, p2) = metric_pt(&rev).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12);
            prop_assert_eq!(p1, p2);
        }

        #[test]
        fn variances_are_non_negative(xs in prop::collection::vec(-100.0f64..100.0, 1..30)) {
            prop_assert!(population_variance(&xs) >= 0.0);
            let phis: Vec<f64> = xs.iter().map(|x| x / 100.0).collect();
            let c = circular_variance_2phi(&phis);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn constant_samples_have_zero_variance(x in -1e3f64..1e3, n in 1usize..300) {
            prop_assert_eq!(population_variance(&vec![x; n]), 0.0);
        }
    }
}
