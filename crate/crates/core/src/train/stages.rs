use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, OptimState};
use super::loss::{loss_mask_with_grad, loss_total_with_grad, mask_target, LossParts, LossWeights};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::nn::{Gradients, LayerGroup, Mode, NetInput, NetworkParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    /// Stops after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch: 4,
            seed: 0,
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
            max_steps: None,
        }
    }
}

/// Mean losses over the samples of one optimizer step or one epoch. Terms
/// that the stage does not optimize are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    pub mask: f64,
    pub depth: f64,
    pub grasp: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Batch losses measured before each update.
    pub steps: Vec<LossRecord>,
    /// Per-epoch means of the batch losses.
    pub epochs: Vec<LossRecord>,
}

/// Network inputs for a dataset, computed once.
pub fn prepare_inputs(samples: &[Sample]) -> Result<Vec<NetInput>> {
    samples.iter().map(|s| NetInput::from_observation(&s.observation)).collect()
}

/// Stage 1 trains the background extraction module alone.
pub fn freeze_for_stage1(net: &mut NetworkParams) {
    net.set_trainable(|_, l| l.group == LayerGroup::Bem);
}

/// Stage 2 trains everything except the pretrained background extraction
/// module, whose last decoder layer stays trainable and whose mask output is
/// unused.
pub fn freeze_for_stage2(net: &mut NetworkParams) {
    let keep = net.bem_last_decoder();
    net.set_trainable(|i, l| l.group != LayerGroup::Bem || i == keep);
}

/// Loss and gradient of one sample.
pub fn sample_gradients(
    net: &NetworkParams,
    input: &NetInput,
    sample: &Sample,
    mode: Mode,
    weights: &LossWeights,
) -> Result<(LossRecord, Gradients)> {
    let (out, tape) = net.forward(input, mode)?;
    match mode {
        Mode::BemPretrain => {
            let pred = out.mask_est.as_ref().expect("pretrain output");
            let (l, g) = loss_mask_with_grad(pred, &mask_target(sample))?;
            let rec = LossRecord {
                mask: l,
                total: l,
                ..Default::default()
            };
            Ok((rec, tape.backward(net, &[g])?))
        }
        Mode::Main => {
            let (parts, g) = loss_total_with_grad(&out, sample, weights)?;
            let rec = LossRecord {
                depth: parts.depth,
                grasp: parts.grasp,
                total: parts.total,
                ..Default::default()
            };
            Ok((rec, tape.backward(net, &g)?))
        }
    }
}

fn add(acc: &mut LossRecord, r: &LossRecord, s: f64) {
    acc.mask += s * r.mask;
    acc.depth += s * r.depth;
    acc.grasp += s * r.grasp;
    acc.total += s * r.total;
}

fn run(
    net: &mut NetworkParams,
    samples: &[Sample],
    cfg: &TrainConfig,
    mode: Mode,
    on_epoch: &mut dyn FnMut(&LossRecord, &NetworkParams),
) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    cfg.adam.validate()?;
    cfg.weights.validate()?;
    let inputs = prepare_inputs(samples)?;
    let mut state = OptimState::new(cfg.adam, net.layers().len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_rec = LossRecord {
            epoch,
            ..Default::default()
        };
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            if report.steps.len() >= limit {
                break;
            }
            let mut grads = Gradients::empty(net.layers().len());
            let mut rec = LossRecord {
                epoch,
                step: report.steps.len(),
                ..Default::default()
            };
            let s = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (r, g) = sample_gradients(net, &inputs[i], &samples[i], mode, &cfg.weights)?;
                add(&mut rec, &r, s);
                grads.accumulate(&g);
            }
            grads.scale(s);
            adam_step(net, &grads, &mut state)?;
            if !net.all_finite() {
                return Err(Error::NonFinite("parameters after optimizer step"));
            }
            add(&mut epoch_rec, &rec, 1.0);
            batches += 1;
            report.steps.push(rec);
        }
        if batches == 0 {
            break 'epochs;
        }
        let inv = 1.0 / batches as f64;
        let mut mean = LossRecord {
            epoch,
            step: report.steps.len(),
            ..Default::default()
        };
        add(&mut mean, &epoch_rec, inv);
        on_epoch(&mean, net);
        log::info!(
            "stage={} epoch={} l_mask={:.6e} l_depth={:.6e} l_grasp={:.6e} l_total={:.6e}",
            if mode == Mode::BemPretrain { 1 } else { 2 },
            epoch,
            mean.mask,
            mean.depth,
            mean.grasp,
            mean.total
        );
        report.epochs.push(mean);
    }
    Ok(report)
}

/// Pretrains the background extraction module on the mask loss and marks
/// it as pretrained. Other layers are frozen.
pub fn train_stage1(
    net: &mut NetworkParams,
    samples: &[Sample],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&LossRecord, &NetworkParams),
) -> Result<TrainReport> {
    freeze_for_stage1(net);
    let report = run(net, samples, cfg, Mode::BemPretrain, on_epoch)?;
    net.bem_pretrained = true;
    Ok(report)
}

/// Trains the grasp network on depth + grasp losses with the pretrained
/// background extraction module frozen except for its last decoder.
pub fn train_stage2(
    net: &mut NetworkParams,
    samples: &[Sample],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&LossRecord, &NetworkParams),
) -> Result<TrainReport> {
    if !net.bem_pretrained {
        return Err(Error::MissingBem);
    }
    freeze_for_stage2(net);
    run(net, samples, cfg, Mode::Main, on_epoch)
}

/// Mean mask loss over a dataset.
pub fn evaluate_mask_loss(net: &NetworkParams, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    for s in samples {
        let (out, _) = net.forward(&NetInput::from_observation(&s.observation)?, Mode::BemPretrain)?;
        let pred: &Grid<f64> = out.mask_est.as_ref().expect("pretrain output");
        sum += super::loss::loss_mask(pred, &mask_target(s))?;
    }
    Ok(sum / samples.len() as f64)
}

/// Mean main-mode losses over a dataset.
pub fn evaluate_losses(net: &NetworkParams, samples: &[Sample], w: &LossWeights) -> Result<LossParts> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc = LossParts::default();
    for s in samples {
        let (out, _) = net.forward(&NetInput::from_observation(&s.observation)?, Mode::Main)?;
        let p = super::loss::loss_total(&out, s, w)?;
        acc.depth += p.depth;
        acc.grasp += p.grasp;
        acc.total += p.total;
    }
    let n = samples.len() as f64;
    Ok(LossParts {
        depth: acc.depth / n,
        grasp: acc.grasp / n,
        total: acc.total / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_dataset, SceneConfig};
    use crate::nn::NetConfig;

    fn setup() -> (NetworkParams, Vec<Sample>) {
        let net = NetworkParams::build(NetConfig::new(16, 2, 2, 5).unwrap()).unwrap();
        let data = synth_dataset(3, 40, &SceneConfig { size: 16, ..Default::default() }).unwrap();
        (net, data)
    }

    #[test]
    fn zero_epochs_leave_parameters() {
        let (mut net, data) = setup();
        let before = net.clone();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        train_stage1(&mut net, &data, &cfg, &mut |_, _| {}).unwrap();
        for (a, b) in net.layers().iter().zip(before.layers()) {
            assert_eq!((&a.weight, &a.bias), (&b.weight, &b.bias));
        }
    }

    #[test]
    fn stage2_requires_pretrained_bem() {
        let (mut net, data) = setup();
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(train_stage2(&mut net, &data, &cfg, &mut |_, _| {}), Err(Error::MissingBem)));
        assert!(matches!(train_stage1(&mut net, &[], &cfg, &mut |_, _| {}), Err(Error::EmptyDataset)));
    }

    #[test]
    fn stages_are_deterministic_and_respect_freezing() {
        let (net0, data) = setup();
        let cfg = TrainConfig { epochs: 2, batch: 2, ..Default::default() };
        let run_both = || {
            let mut net = net0.clone();
            let r1 = train_stage1(&mut net, &data, &cfg, &mut |_, _| {}).unwrap();
            let after1 = net.clone();
            let r2 = train_stage2(&mut net, &data, &cfg, &mut |_, _| {}).unwrap();
            (after1, net, r1, r2)
        };
        let (a1, a2, r1, r2) = run_both();
        let (b1, b2, s1, s2) = run_both();
        assert_eq!((&a1, &a2, &r1, &r2), (&b1, &b2, &s1, &s2));
        assert_eq!(r1.steps.len(), 4);
        for (l1, l0) in a1.layers().iter().zip(net0.layers()) {
            assert_eq!(l1.group == LayerGroup::Bem, l1.weight != l0.weight, "{}", l1.name);
        }
        let keep = a2.bem_last_decoder();
        for (i, (l2, l1)) in a2.layers().iter().zip(a1.layers()).enumerate() {
            if l1.group == LayerGroup::Bem && i != keep {
                assert_eq!(l2.weight, l1.weight);
                assert_eq!(l2.bias, l1.bias);
            } else {
                assert_ne!(l2.weight, l1.weight, "{}", l2.name);
            }
        }
    }
}
