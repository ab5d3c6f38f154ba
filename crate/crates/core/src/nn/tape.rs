use super::model::NetworkParams;
use super::ops;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Conv { input: NodeId, layer: usize },
    Relu { input: NodeId },
    Sigmoid { input: NodeId },
    MaxPool { input: NodeId, argmax: Vec<u32> },
    Upsample { input: NodeId },
    Concat { inputs: Vec<NodeId> },
    ScaleByMap { input: NodeId, map: NodeId },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub needs_grad: bool,
}

/// Corruptions of individual backward rules, used to check that the
/// gradient checker notices a broken derivative.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackwardFault {
    #[default]
    None,
    /// The rectifier passes gradient through inactive units.
    ReluLeak,
    /// The confidence map receives no gradient from the fusion product.
    DropMapGradient,
}

/// Record of one forward evaluation.
#[derive(Debug, Clone)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    pub(crate) outputs: Vec<NodeId>,
    /// Layer trainability at recording time.
    pub(crate) trainable: Vec<bool>,
}

/// Per-layer weight and bias gradients; `None` for layers that are frozen or
/// not reached by the recorded graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn empty(n_layers: usize) -> Self {
        Self {
            layers: vec![None; n_layers],
        }
    }

    /// Adds `other` layer by layer.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            match (mine.as_mut(), theirs) {
                (Some(a), Some(b)) => {
                    a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
                    a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
                }
                (None, Some(b)) => *mine = Some(b.clone()),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.layers.iter_mut().flatten() {
            g.weight.iter_mut().for_each(|x| *x *= s);
            g.bias.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn all_zero(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weight.iter().chain(&g.bias).all(|&x| x == 0.0))
    }
}

impl Tape {
    pub(crate) fn new(params: &NetworkParams) -> Self {
        Self {
            nodes: Vec::new(),
            outputs: Vec::new(),
            trainable: params.layers().iter().map(|l| l.trainable).collect(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    pub(crate) fn conv(&mut self, params: &NetworkParams, layer: usize, x: NodeId) -> NodeId {
        let l = &params.layers()[layer];
        let y = ops::conv2d(self.value(x), &l.weight, &l.bias, l.kernel);
        let needs = self.needs(x) || self.trainable[layer];
        self.push(y, Op::Conv { input: x, layer }, needs)
    }

    pub(crate) fn relu(&mut self, x: NodeId) -> NodeId {
        let y = ops::relu(self.value(x));
        let needs = self.needs(x);
        self.push(y, Op::Relu { input: x }, needs)
    }

    pub(crate) fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let y = ops::sigmoid(self.value(x));
        let needs = self.needs(x);
        self.push(y, Op::Sigmoid { input: x }, needs)
    }

    pub(crate) fn maxpool(&mut self, x: NodeId) -> NodeId {
        let (y, argmax) = ops::maxpool2(self.value(x));
        let needs = self.needs(x);
        self.push(y, Op::MaxPool { input: x, argmax }, needs)
    }

    pub(crate) fn upsample(&mut self, x: NodeId) -> NodeId {
        let y = ops::upsample2(self.value(x));
        let needs = self.needs(x);
        self.push(y, Op::Upsample { input: x }, needs)
    }

    pub(crate) fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let parts: Vec<&Tensor> = inputs.iter().map(|&i| self.value(i)).collect();
        let y = ops::concat(&parts)?;
        let needs = inputs.iter().any(|&i| self.needs(i));
        Ok(self.push(y, Op::Concat { inputs: inputs.to_vec() }, needs))
    }

    pub(crate) fn scale_by_map(&mut self, x: NodeId, map: NodeId) -> Result<NodeId> {
        let y = ops::scale_by_map(self.value(x), self.value(map))?;
        let needs = self.needs(x) || self.needs(map);
        Ok(self.push(y, Op::ScaleByMap { input: x, map }, needs))
    }

    /// `fc ++ (fd * c)` along channels.
    pub(crate) fn fuse(&mut self, fc: NodeId, fd: NodeId, c: NodeId) -> Result<NodeId> {
        let scaled = self.scale_by_map(fd, c)?;
        self.concat(&[fc, scaled])
    }

    /// Pattern of rectifier activity and pooling winners. Two evaluations
    /// with equal signatures lie on the same smooth piece of the network.
    pub fn activation_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu { input } => {
                    let mut word = 0u64;
                    for (i, &x) in self.nodes[*input].value.data().iter().enumerate() {
                        if x > 0.0 {
                            word |= 1 << (i % 64);
                        }
                        if i % 64 == 63 {
                            sig.push(word);
                            word = 0;
                        }
                    }
                    sig.push(word);
                }
                Op::MaxPool { argmax, .. } => sig.extend(argmax.iter().map(|&a| a as u64)),
                _ => {}
            }
        }
        sig
    }

    /// Reverse pass from gradients of the recorded outputs, in output
    /// order.
    pub fn backward(&self, params: &NetworkParams, output_grads: &[Grid<f64>]) -> Result<Gradients> {
        self.backward_with_fault(params, output_grads, BackwardFault::None)
    }

    #[doc(hidden)]
    pub fn backward_with_fault(
        &self,
        params: &NetworkParams,
        output_grads: &[Grid<f64>],
        fault: BackwardFault,
    ) -> Result<Gradients> {
        if self.nodes.is_empty() || self.outputs.is_empty() {
            return Err(Error::TapeMismatch("tape holds no recorded outputs".into()));
        }
        if output_grads.len() != self.outputs.len() {
            return Err(Error::TapeMismatch(format!(
                "{} output gradients for {} outputs",
                output_grads.len(),
                self.outputs.len()
            )));
        }
        if params.layers().len() != self.trainable.len() {
            return Err(Error::TapeMismatch("parameters differ from the recording".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (&id, g) in self.outputs.iter().zip(output_grads) {
            let shape = self.nodes[id].value.shape();
            if shape != [1, g.height(), g.width()] {
                return Err(Error::TapeMismatch(format!(
                    "output gradient {}x{} for output {shape:?}",
                    g.width(),
                    g.height()
                )));
            }
            let t = Tensor::from_vec(shape, g.as_slice().to_vec())?;
            add_grad(&mut grads[id], t);
        }

        let mut out = Gradients::empty(params.layers().len());
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(dy) = grads[id].take() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::Conv { input, layer } => {
                    let l = &params.layers()[*layer];
                    let need_dx = self.needs(*input);
                    let need_dw = self.trainable[*layer];
                    let g = ops::conv2d_backward(self.value(*input), &l.weight, l.cout, l.kernel, &dy, need_dx, need_dw);
                    if let Some((dw, db)) = g.dw {
                        let lg = LayerGrad { weight: dw, bias: db };
                        match &mut out.layers[*layer] {
                            Some(acc) => {
                                acc.weight.iter_mut().zip(&lg.weight).for_each(|(a, b)| *a += b);
                                acc.bias.iter_mut().zip(&lg.bias).for_each(|(a, b)| *a += b);
                            }
                            slot => *slot = Some(lg),
                        }
                    }
                    if let Some(dx) = g.dx {
                        add_grad(&mut grads[*input], dx);
                    }
                }
                Op::Relu { input } => {
                    if self.needs(*input) {
                        let dx = if fault == BackwardFault::ReluLeak {
                            dy
                        } else {
                            ops::relu_backward(self.value(*input), &dy)
                        };
                        add_grad(&mut grads[*input], dx);
                    }
                }
                Op::Sigmoid { input } => {
                    if self.needs(*input) {
                        add_grad(&mut grads[*input], ops::sigmoid_backward(&node.value, &dy));
                    }
                }
                Op::MaxPool { input, argmax } => {
                    if self.needs(*input) {
                        let dx = ops::maxpool2_backward(self.value(*input).shape(), argmax, &dy);
                        add_grad(&mut grads[*input], dx);
                    }
                }
                Op::Upsample { input } => {
                    if self.needs(*input) {
                        add_grad(&mut grads[*input], ops::upsample2_backward(&dy));
                    }
                }
                Op::Concat { inputs } => {
                    let channels: Vec<usize> = inputs.iter().map(|&i| self.value(i).shape()[0]).collect();
                    for (&i, part) in inputs.iter().zip(ops::split_channels(&dy, &channels)) {
                        if self.needs(i) {
                            add_grad(&mut grads[i], part);
                        }
                    }
                }
                Op::ScaleByMap { input, map } => {
                    let (dx, dm) = ops::scale_by_map_backward(self.value(*input), self.value(*map), &dy);
                    if self.needs(*input) {
                        add_grad(&mut grads[*input], dx);
                    }
                    if self.needs(*map) && fault != BackwardFault::DropMapGradient {
                        add_grad(&mut grads[*map], dm);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn add_grad(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}
