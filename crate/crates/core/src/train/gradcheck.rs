use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_mask, loss_mask_with_grad, loss_total, loss_total_with_grad, mask_target, LossWeights};
use crate::dataset::{synth_scene, Sample, SceneConfig};
use crate::error::{Error, Result};
use crate::nn::{BackwardFault, Gradients, LayerGroup, Mode, NetConfig, NetInput, NetworkParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Square input side, pixels.
    pub size: usize,
    /// Defaults to the largest level count (up to 4) dividing `size`.
    pub depth_levels: Option<usize>,
    pub base_channels: usize,
    /// Minimum number of checked parameters per layer group.
    pub per_class: usize,
    /// Minimum number of checked parameters per layer.
    pub per_layer: usize,
    /// Central-difference step.
    pub h: f64,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            size: 16,
            depth_levels: None,
            base_channels: 4,
            per_class: 64,
            per_layer: 2,
            h: 1e-3,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult {
    pub group: LayerGroup,
    pub mode: Mode,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub classes: Vec<ClassResult>,
    pub checked: usize,
    /// Parameters replaced because a perturbation crossed a rectifier or
    /// pooling switch.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

impl GradCheckConfig {
    pub fn net_config(&self) -> Result<NetConfig> {
        let levels = match self.depth_levels {
            Some(l) => l,
            None => NetConfig::levels_for(self.size).ok_or_else(|| {
                Error::InvalidConfig(format!("input size {} is not divisible by 4", self.size))
            })?,
        };
        NetConfig::new(self.size, levels, self.base_channels, self.seed)
    }
}

/// Builds a fresh network and a synthetic scene and checks both the main
/// and the mask-pretraining graphs.
pub fn gradient_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    gradient_check_with_fault(cfg, BackwardFault::None)
}

#[doc(hidden)]
pub fn gradient_check_with_fault(cfg: &GradCheckConfig, fault: BackwardFault) -> Result<GradCheckReport> {
    let net = NetworkParams::build(cfg.net_config()?)?;
    let scene = SceneConfig {
        size: cfg.size,
        ..SceneConfig::default()
    };
    let sample = synth_scene(cfg.seed, &scene)?;
    check_network(&net, &sample, cfg, fault)
}

fn loss_and_grads(
    net: &NetworkParams,
    input: &NetInput,
    sample: &Sample,
    mode: Mode,
    w: &LossWeights,
    fault: BackwardFault,
) -> Result<(f64, Gradients)> {
    let (out, tape) = net.forward(input, mode)?;
    match mode {
        Mode::Main => {
            let (parts, g) = loss_total_with_grad(&out, sample, w)?;
            Ok((parts.total, tape.backward_with_fault(net, &g, fault)?))
        }
        Mode::BemPretrain => {
            let (l, g) = loss_mask_with_grad(out.mask_est.as_ref().expect("mask"), &mask_target(sample))?;
            Ok((l, tape.backward_with_fault(net, &[g], fault)?))
        }
    }
}

fn loss_and_signature(net: &NetworkParams, input: &NetInput, sample: &Sample, mode: Mode, w: &LossWeights) -> Result<(f64, Vec<u64>)> {
    let (out, tape) = net.forward(input, mode)?;
    let l = match mode {
        Mode::Main => loss_total(&out, sample, w)?.total,
        Mode::BemPretrain => loss_mask(out.mask_est.as_ref().expect("mask"), &mask_target(sample))?,
    };
    Ok((l, tape.activation_signature()))
}

/// Compares analytic gradients with central differences on randomly drawn
/// parameters of every layer group.
pub fn check_network(
    net: &NetworkParams,
    sample: &Sample,
    cfg: &GradCheckConfig,
    fault: BackwardFault,
) -> Result<GradCheckReport> {
    let input = NetInput::from_observation(&sample.observation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6772_6164);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        classes: Vec::new(),
        checked: 0,
        skipped: 0,
    };
    for mode in [Mode::Main, Mode::BemPretrain] {
        let mut work = net.clone();
        let mask_layer = work.bem_mask_layer();
        match mode {
            Mode::Main => work.set_trainable(|i, _| i != mask_layer),
            Mode::BemPretrain => work.set_trainable(|_, l| l.group == LayerGroup::Bem),
        }
        let (_, grads) = loss_and_grads(&work, &input, sample, mode, &cfg.weights, fault)?;
        let (_, base_sig) = loss_and_signature(&work, &input, sample, mode, &cfg.weights)?;
        let groups: &[LayerGroup] = match mode {
            Mode::Main => &LayerGroup::ALL,
            Mode::BemPretrain => &[LayerGroup::Bem],
        };
        for &group in groups {
            let layers: Vec<usize> = (0..work.layers().len())
                .filter(|&i| work.layers()[i].group == group && work.layers()[i].trainable)
                .collect();
            if layers.is_empty() {
                continue;
            }
            let mut picks: Vec<(usize, usize)> = Vec::new();
            for &li in &layers {
                for _ in 0..cfg.per_layer {
                    picks.push((li, rng.random_range(0..work.layers()[li].param_count())));
                }
            }
            while picks.len() < cfg.per_class {
                let li = layers[rng.random_range(0..layers.len())];
                picks.push((li, rng.random_range(0..work.layers()[li].param_count())));
            }
            let mut class = ClassResult {
                group,
                mode,
                checked: 0,
                max_rel_error: 0.0,
            };
            let mut queue = picks;
            let mut budget = 10 * queue.len();
            while let Some((li, pi)) = queue.pop() {
                let original = work.layers()[li].param(pi);
                *work.layers_mut()[li].param_mut(pi) = original + cfg.h;
                let (fp, sp) = loss_and_signature(&work, &input, sample, mode, &cfg.weights)?;
                *work.layers_mut()[li].param_mut(pi) = original - cfg.h;
                let (fm, sm) = loss_and_signature(&work, &input, sample, mode, &cfg.weights)?;
                *work.layers_mut()[li].param_mut(pi) = original;
                if sp != base_sig || sm != base_sig {
                    report.skipped += 1;
                    if budget > 0 {
                        budget -= 1;
                        queue.push((li, rng.random_range(0..work.layers()[li].param_count())));
                    }
                    continue;
                }
                let numeric = (fp - fm) / (2.0 * cfg.h);
                let g = grads.layers[li]
                    .as_ref()
                    .ok_or_else(|| Error::MissingGradient(work.layers()[li].name.clone()))?;
                let nw = g.weight.len();
                let analytic = if pi < nw { g.weight[pi] } else { g.bias[pi - nw] };
                let rel = relative_error(analytic, numeric);
                class.max_rel_error = class.max_rel_error.max(rel);
                class.checked += 1;
            }
            report.checked += class.checked;
            report.max_rel_error = report.max_rel_error.max(class.max_rel_error);
            report.classes.push(class);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{conv2d, Tensor};

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(relative_error(1e-12, 0.0), 1e-12 / 1e-8);
    }

    #[test]
    fn linear_layer_is_exact() {
        // loss = <c, conv(x; w)> is linear in w, so central differences are
        // exact up to rounding.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::from_vec(&[2, 5, 5], (0..50).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let c: Vec<f64> = (0..75).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut w: Vec<f64> = (0..54).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = vec![0.1, 0.2, 0.3];
        let loss = |w: &[f64]| -> f64 { conv2d(&x, w, &b, 3).data().iter().zip(&c).map(|(y, k)| y * k).sum() };
        let dy = Tensor::from_vec(&[3, 5, 5], c.clone()).unwrap();
        let (dw, _) = crate::nn::conv2d_backward_for_tests(&x, &w, 3, 3, &dy);
        for i in 0..w.len() {
            let orig = w[i];
            w[i] = orig + 1e-3;
            let fp = loss(&w);
            w[i] = orig - 1e-3;
            let fm = loss(&w);
            w[i] = orig;
            assert!(relative_error(dw[i], (fp - fm) / 2e-3) < 1e-10);
        }
    }
}
