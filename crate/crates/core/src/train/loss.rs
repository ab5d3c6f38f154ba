use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::maps::GraspMaps;
use crate::nn::NetOutputs;

/// Per-term loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_q: f64,
    pub lambda_cos: f64,
    pub lambda_sin: f64,
    pub lambda_w: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_d: 1.0,
            lambda_q: 1.0,
            lambda_cos: 1.0,
            lambda_sin: 1.0,
            lambda_w: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_d, self.lambda_q, self.lambda_cos, self.lambda_sin, self.lambda_w];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("loss weights must be finite and >= 0: {self:?}")))
        }
    }
}

fn mse_with_grad(pred: &Grid<f64>, gt: &Grid<f64>, weight: f64) -> Result<(f64, Grid<f64>)> {
    pred.ensure_same_shape(gt, "prediction/target")?;
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &g)| {
            let d = p - g;
            sum += d * d;
            weight * 2.0 * d / n
        })
        .collect();
    Ok((weight * sum / n, Grid::from_vec(pred.width(), pred.height(), grad)?))
}

/// Mean squared error of a mask estimate.
pub fn loss_mask(pred: &Grid<f64>, gt: &Grid<f64>) -> Result<f64> {
    Ok(loss_mask_with_grad(pred, gt)?.0)
}

pub fn loss_mask_with_grad(pred: &Grid<f64>, gt: &Grid<f64>) -> Result<(f64, Grid<f64>)> {
    mse_with_grad(pred, gt, 1.0)
}

/// Squared residual plus squared forward differences of the residual, both
/// over valid pixels and divided by the valid count. A difference counts
/// only when both of its pixels are valid.
pub fn loss_depth(pred: &Grid<f64>, gt: &Grid<f64>, valid: &Grid<bool>, w: &LossWeights) -> Result<f64> {
    Ok(loss_depth_with_grad(pred, gt, valid, w)?.0)
}

pub fn loss_depth_with_grad(
    pred: &Grid<f64>,
    gt: &Grid<f64>,
    valid: &Grid<bool>,
    w: &LossWeights,
) -> Result<(f64, Grid<f64>)> {
    pred.ensure_same_shape(gt, "depth prediction/target")?;
    pred.ensure_same_shape(valid, "depth prediction/validity")?;
    let n = valid.count();
    if n == 0 {
        return Err(Error::InvalidArgument("depth loss needs at least one valid pixel".into()));
    }
    let (width, height) = pred.dims();
    let ok = valid.as_slice();
    let d: Vec<f64> = pred.as_slice().iter().zip(gt.as_slice()).map(|(p, g)| p - g).collect();
    let scale = w.lambda_d / n as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; d.len()];
    for i in 0..d.len() {
        if ok[i] {
            sum += d[i] * d[i];
            grad[i] += 2.0 * d[i];
        }
    }
    let mut pair = |i: usize, j: usize, sum: &mut f64| {
        if ok[i] && ok[j] {
            let diff = d[j] - d[i];
            *sum += diff * diff;
            grad[j] += 2.0 * diff;
            grad[i] -= 2.0 * diff;
        }
    };
    for v in 0..height {
        for u in 0..width {
            let i = v * width + u;
            if u + 1 < width {
                pair(i, i + 1, &mut sum);
            }
            if v + 1 < height {
                pair(i, i + width, &mut sum);
            }
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((scale * sum, Grid::from_vec(width, height, grad)?))
}

/// Weighted sum of the four map-wise mean squared errors.
pub fn loss_grasp(pred: &GraspMaps, gt: &GraspMaps, w: &LossWeights) -> Result<f64> {
    Ok(loss_grasp_with_grad(pred, gt, w)?.0)
}

/// Loss and gradients with respect to Q, cos, sin and width.
pub fn loss_grasp_with_grad(pred: &GraspMaps, gt: &GraspMaps, w: &LossWeights) -> Result<(f64, [Grid<f64>; 4])> {
    let (lq, gq) = mse_with_grad(&pred.quality, &gt.quality, w.lambda_q)?;
    let (lc, gc) = mse_with_grad(&pred.cos2, &gt.cos2, w.lambda_cos)?;
    let (ls, gs) = mse_with_grad(&pred.sin2, &gt.sin2, w.lambda_sin)?;
    let (lw, gw) = mse_with_grad(&pred.width, &gt.width, w.lambda_w)?;
    Ok((lq + lc + ls + lw, [gq, gc, gs, gw]))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub depth: f64,
    pub grasp: f64,
    pub total: f64,
}

/// Depth target expressed in the normalized units of the network's depth
/// output.
pub fn normalized_depth_target(outputs: &NetOutputs, sample: &Sample) -> Grid<f64> {
    sample.depth_gt.map(|&z| outputs.depth_scale.to_normalized(z))
}

/// Depth plus grasp loss. The depth term compares the network's normalized
/// depth output with the target mapped through the same normalization.
pub fn loss_total(outputs: &NetOutputs, sample: &Sample, w: &LossWeights) -> Result<LossParts> {
    Ok(loss_total_with_grad(outputs, sample, w)?.0)
}

/// Loss parts and gradients for the five main-mode outputs (Q, cos, sin,
/// width, depth).
pub fn loss_total_with_grad(outputs: &NetOutputs, sample: &Sample, w: &LossWeights) -> Result<(LossParts, Vec<Grid<f64>>)> {
    let (maps, depth) = match (&outputs.maps, &outputs.depth_norm) {
        (Some(m), Some(d)) => (m, d),
        _ => return Err(Error::InvalidArgument("total loss needs main-mode outputs".into())),
    };
    let target = normalized_depth_target(outputs, sample);
    let (ld, gd) = loss_depth_with_grad(depth, &target, &sample.depth_gt_valid, w)?;
    let (lg, [gq, gc, gs, gw]) = loss_grasp_with_grad(maps, &sample.maps, w)?;
    Ok((
        LossParts {
            depth: ld,
            grasp: lg,
            total: ld + lg,
        },
        vec![gq, gc, gs, gw, gd],
    ))
}

pub fn mask_target(sample: &Sample) -> Grid<f64> {
    sample.mask.map(|&m| if m { 1.0 } else { 0.0 })
}
