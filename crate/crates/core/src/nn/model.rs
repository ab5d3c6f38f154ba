use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::dataset::{inpaint_depth, normalize_minmax_in_place, Observation};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::maps::GraspMaps;

/// Network size settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Square input side, pixels.
    pub input_size: usize,
    /// Number of scales in each branch.
    pub depth_levels: usize,
    /// Channels at the finest scale.
    pub base_channels: usize,
    /// Weight initialization seed.
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_size: 336,
            depth_levels: 4,
            base_channels: 16,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn new(input_size: usize, depth_levels: usize, base_channels: usize, seed: u64) -> Result<Self> {
        let c = Self {
            input_size,
            depth_levels,
            base_channels,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.depth_levels) {
            return Err(Error::InvalidConfig(format!("depth_levels {} outside 2..=6", self.depth_levels)));
        }
        if self.base_channels == 0 || self.base_channels > 256 {
            return Err(Error::InvalidConfig(format!("base_channels {} outside 1..=256", self.base_channels)));
        }
        let div = 1usize << self.depth_levels;
        if self.input_size == 0 || self.input_size % div != 0 {
            return Err(Error::InvalidConfig(format!(
                "input_size {} is not divisible by 2^{} = {div}",
                self.input_size, self.depth_levels
            )));
        }
        Ok(())
    }

    /// Largest level count in `2..=4` that divides `input_size`.
    pub fn levels_for(input_size: usize) -> Option<usize> {
        (2..=4).rev().find(|&l| input_size > 0 && input_size % (1 << l) == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerGroup {
    ColorBranch,
    DepthBranch,
    Confinet,
    Bem,
    Head,
}

impl LayerGroup {
    pub const ALL: [LayerGroup; 5] = [
        LayerGroup::ColorBranch,
        LayerGroup::DepthBranch,
        LayerGroup::Confinet,
        LayerGroup::Bem,
        LayerGroup::Head,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerGroup::ColorBranch => "color",
            LayerGroup::DepthBranch => "depth",
            LayerGroup::Confinet => "confinet",
            LayerGroup::Bem => "bem",
            LayerGroup::Head => "head",
        }
    }
}

/// One convolution with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub group: LayerGroup,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    /// `(cout, cin, kernel, kernel)` row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub trainable: bool,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn weight_tensor(&self) -> Tensor {
        Tensor::from_vec(&[self.cout, self.cin, self.kernel, self.kernel], self.weight.clone()).expect("layer shape")
    }

    /// Flat view: weights then biases.
    pub fn param(&self, i: usize) -> f64 {
        if i < self.weight.len() {
            self.weight[i]
        } else {
            self.bias[i - self.weight.len()]
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        let nw = self.weight.len();
        if i < nw {
            &mut self.weight[i]
        } else {
            &mut self.bias[i - nw]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Branch {
    /// Two convolutions per level.
    enc: Vec<[usize; 2]>,
    /// Upsampling convolution producing level `l` (for `l < L - 1`).
    up: Vec<usize>,
    dec: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
struct Topology {
    color: Branch,
    depth: Branch,
    conf_trunk: usize,
    conf_taps: Vec<usize>,
    bem_rgb: [usize; 3],
    bem_depth: [usize; 3],
    bem_dec: [usize; 3],
    bem_mask: usize,
    head_hidden: [usize; 3],
    /// Q, cos, sin, width, depth.
    head_out: [usize; 5],
}

/// Which part of the graph a forward pass evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full network: grasp maps and the auxiliary depth estimate.
    Main,
    /// Background extraction module alone: the mask estimate.
    BemPretrain,
}

/// All learnable tensors plus the wiring derived from the config.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetConfig,
    layers: Vec<Layer>,
    topo: Topology,
    /// Set once the background extraction module has been pretrained.
    pub bem_pretrained: bool,
}

/// Kind of nonlinearity following a layer, which sets its init scale.
#[derive(Clone, Copy)]
enum Init {
    Relu,
    Linear,
}

struct Builder {
    layers: Vec<Layer>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn add(&mut self, name: String, group: LayerGroup, cin: usize, cout: usize, kernel: usize, init: Init) -> usize {
        let fan_in = (cin * kernel * kernel) as f64;
        let gain = match init {
            Init::Relu => 2.0,
            Init::Linear => 1.0,
        };
        let normal = Normal::new(0.0, (gain / fan_in).sqrt()).expect("positive std");
        let weight = (0..cout * cin * kernel * kernel).map(|_| normal.sample(&mut self.rng)).collect();
        self.layers.push(Layer {
            name,
            group,
            cin,
            cout,
            kernel,
            weight,
            bias: vec![0.0; cout],
            trainable: true,
        });
        self.layers.len() - 1
    }

    fn branch(&mut self, prefix: &str, group: LayerGroup, cin: usize, chans: &[usize], fused_input: bool) -> Branch {
        let levels = chans.len();
        let mut enc = Vec::new();
        let mut prev = cin;
        for (l, &c) in chans.iter().enumerate() {
            let a = self.add(format!("{prefix}.enc{l}a"), group, prev, c, 3, Init::Relu);
            let b = self.add(format!("{prefix}.enc{l}b"), group, c, c, 3, Init::Relu);
            enc.push([a, b]);
            prev = c;
        }
        let mut up = vec![0; levels - 1];
        let mut dec = vec![[0, 0]; levels - 1];
        for l in (0..levels - 1).rev() {
            // The color decoder consumes fused features (twice the width).
            let from = if fused_input { 2 * chans[l + 1] } else { chans[l + 1] };
            up[l] = self.add(format!("{prefix}.up{l}"), group, from, chans[l], 3, Init::Relu);
            let a = self.add(format!("{prefix}.dec{l}a"), group, 2 * chans[l], chans[l], 3, Init::Relu);
            let b = self.add(format!("{prefix}.dec{l}b"), group, chans[l], chans[l], 3, Init::Relu);
            dec[l] = [a, b];
        }
        Branch { enc, up, dec }
    }
}

impl NetworkParams {
    /// Builds and initializes the network deterministically from
    /// `config.seed`: fan-in scaled normal weights, zero biases.
    pub fn build(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            layers: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let c = config.base_channels;
        let chans: Vec<usize> = (0..config.depth_levels).map(|l| c << l).collect();
        let color = b.branch("color", LayerGroup::ColorBranch, 3, &chans, true);
        let depth = b.branch("depth", LayerGroup::DepthBranch, 1, &chans, false);

        let g = LayerGroup::Confinet;
        let conf_trunk = b.add("confinet.trunk".into(), g, 2, c, 3, Init::Relu);
        let conf_taps = (0..config.depth_levels)
            .map(|l| b.add(format!("confinet.tap{l}"), g, c, 1, 3, Init::Linear))
            .collect();

        let g = LayerGroup::Bem;
        let enc = |b: &mut Builder, prefix: &str, cin: usize| -> [usize; 3] {
            [
                b.add(format!("bem.{prefix}1"), g, cin, c, 3, Init::Relu),
                b.add(format!("bem.{prefix}2"), g, c, c, 3, Init::Relu),
                b.add(format!("bem.{prefix}3"), g, c, c, 3, Init::Relu),
            ]
        };
        let bem_rgb = enc(&mut b, "rgb_enc", 3);
        let bem_depth = enc(&mut b, "depth_enc", 1);
        let bem_dec = [
            b.add("bem.dec1".into(), g, 2 * c, c, 3, Init::Relu),
            b.add("bem.dec2".into(), g, c, c, 3, Init::Relu),
            b.add("bem.dec3".into(), g, c, c, 3, Init::Relu),
        ];
        let bem_mask = b.add("bem.mask_out".into(), g, c, 1, 1, Init::Linear);

        let g = LayerGroup::Head;
        let head_hidden = [
            b.add("head.shared1".into(), g, 2 * c + c, c, 3, Init::Relu),
            b.add("head.shared2".into(), g, c, c, 3, Init::Relu),
            b.add("head.shared3".into(), g, c, c, 3, Init::Relu),
        ];
        let head_out = ["quality", "cos", "sin", "width", "depth"].map(|n| b.add(format!("head.{n}"), g, c, 1, 1, Init::Linear));

        let topo = Topology {
            color,
            depth,
            conf_trunk,
            conf_taps,
            bem_rgb,
            bem_depth,
            bem_dec,
            bem_mask,
            head_hidden,
            head_out,
        };
        Ok(Self {
            config,
            layers: b.layers,
            topo,
            bem_pretrained: false,
        })
    }

    /// Replaces the parameter values of a freshly built network, checking
    /// names and shapes.
    pub(crate) fn with_layers(config: NetConfig, layers: Vec<Layer>, bem_pretrained: bool) -> Result<Self> {
        let mut net = Self::build(config)?;
        if net.layers.len() != layers.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} layers stored, {} expected",
                layers.len(),
                net.layers.len()
            )));
        }
        for (want, got) in net.layers.iter().zip(&layers) {
            if (want.name.as_str(), want.group, want.cin, want.cout, want.kernel)
                != (got.name.as_str(), got.group, got.cin, got.cout, got.kernel)
                || got.weight.len() != want.weight.len()
                || got.bias.len() != want.bias.len()
            {
                return Err(Error::CorruptCheckpoint(format!("layer {} does not match the config", got.name)));
            }
        }
        net.layers = layers;
        net.bem_pretrained = bem_pretrained;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    /// Index of the BEM decoder layer that stays trainable after
    /// pretraining.
    pub fn bem_last_decoder(&self) -> usize {
        self.topo.bem_dec[2]
    }

    pub fn bem_mask_layer(&self) -> usize {
        self.topo.bem_mask
    }

    /// Layers that feed the confidence maps.
    pub fn confinet_layers(&self) -> Vec<usize> {
        let mut v = vec![self.topo.conf_trunk];
        v.extend(&self.topo.conf_taps);
        v
    }

    pub fn head_output_layers(&self) -> [usize; 5] {
        self.topo.head_out
    }

    pub fn set_trainable(&mut self, f: impl Fn(usize, &Layer) -> bool) {
        for i in 0..self.layers.len() {
            let t = f(i, &self.layers[i]);
            self.layers[i].trainable = t;
        }
    }

    fn check_input(&self, input: &NetInput) -> Result<()> {
        let s = self.config.input_size;
        let ok = input.rgb.chw() == (3, s, s) && input.depth.chw() == (1, s, s) && input.validity.chw() == (1, s, s);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "network expects {s}x{s} input, got {:?}",
                input.rgb.shape()
            )))
        }
    }

    fn bem_features(&self, tape: &mut Tape, rgb: NodeId, depth: NodeId) -> Result<NodeId> {
        let t = &self.topo;
        let encode = |tape: &mut Tape, x: NodeId, idx: [usize; 3]| {
            let mut cur = x;
            for (k, &layer) in idx.iter().enumerate() {
                if k > 0 {
                    cur = tape.maxpool(cur);
                }
                let y = tape.conv(self, layer, cur);
                cur = tape.relu(y);
            }
            cur
        };
        let er = encode(tape, rgb, t.bem_rgb);
        let ed = encode(tape, depth, t.bem_depth);
        let mut cur = tape.concat(&[er, ed])?;
        for (k, &layer) in t.bem_dec.iter().enumerate() {
            if k > 0 {
                cur = tape.upsample(cur);
            }
            let y = tape.conv(self, layer, cur);
            cur = tape.relu(y);
        }
        Ok(cur)
    }

    fn encoder(&self, tape: &mut Tape, x: NodeId, branch: &Branch) -> Vec<NodeId> {
        let mut skips: Vec<NodeId> = Vec::new();
        for (l, &[a, b]) in branch.enc.iter().enumerate() {
            let input = if l == 0 { x } else { tape.maxpool(skips[l - 1]) };
            let y = tape.conv(self, a, input);
            let y = tape.relu(y);
            let y = tape.conv(self, b, y);
            skips.push(tape.relu(y));
        }
        skips
    }

    fn decoder_level(&self, tape: &mut Tape, from: NodeId, skip: NodeId, branch: &Branch, l: usize) -> Result<NodeId> {
        let up = tape.upsample(from);
        let y = tape.conv(self, branch.up[l], up);
        let y = tape.relu(y);
        let cat = tape.concat(&[y, skip])?;
        let y = tape.conv(self, branch.dec[l][0], cat);
        let y = tape.relu(y);
        let y = tape.conv(self, branch.dec[l][1], y);
        Ok(tape.relu(y))
    }

    /// Records a forward pass. The tape's outputs are Q, cos, sin, width and
    /// normalized depth in main mode, the mask estimate in pretrain mode.
    pub fn forward(&self, input: &NetInput, mode: Mode) -> Result<(NetOutputs, Tape)> {
        self.check_input(input)?;
        let t = &self.topo;
        let levels = self.config.depth_levels;
        let mut tape = Tape::new(self);
        let rgb = tape.leaf(input.rgb.clone());
        let depth = tape.leaf(input.depth.clone());
        let bem = self.bem_features(&mut tape, rgb, depth)?;
        if mode == Mode::BemPretrain {
            let mask = tape.conv(self, t.bem_mask, bem);
            tape.outputs = vec![mask];
            let outputs = NetOutputs {
                maps: None,
                depth_est: None,
                depth_norm: None,
                mask_est: Some(tape.value(mask).channel_grid(0)),
                depth_scale: input.scale,
            };
            return Ok((outputs, tape));
        }

        let conf_in = tape.leaf(super::ops::concat(&[&input.depth, &input.validity])?);
        let trunk = tape.conv(self, t.conf_trunk, conf_in);
        let mut cur = tape.relu(trunk);
        let mut conf = Vec::with_capacity(levels);
        for (l, &tap) in t.conf_taps.iter().enumerate() {
            if l > 0 {
                cur = tape.maxpool(cur);
            }
            let y = tape.conv(self, tap, cur);
            conf.push(tape.sigmoid(y));
        }

        let cskip = self.encoder(&mut tape, rgb, &t.color);
        let dskip = self.encoder(&mut tape, depth, &t.depth);

        let mut fd = vec![0; levels];
        fd[levels - 1] = dskip[levels - 1];
        for l in (0..levels - 1).rev() {
            fd[l] = self.decoder_level(&mut tape, fd[l + 1], dskip[l], &t.depth, l)?;
        }
        let mut fm = tape.fuse(cskip[levels - 1], fd[levels - 1], conf[levels - 1])?;
        for l in (0..levels - 1).rev() {
            let fc = self.decoder_level(&mut tape, fm, cskip[l], &t.color, l)?;
            fm = tape.fuse(fc, fd[l], conf[l])?;
        }

        let mut h = tape.concat(&[fm, bem])?;
        for &layer in &t.head_hidden {
            let y = tape.conv(self, layer, h);
            h = tape.relu(y);
        }
        let outs: Vec<NodeId> = t.head_out.iter().map(|&layer| tape.conv(self, layer, h)).collect();
        tape.outputs = outs.clone();
        let plane = |id: NodeId| tape.value(id).channel_grid(0);
        let maps = GraspMaps::new(plane(outs[0]), plane(outs[1]), plane(outs[2]), plane(outs[3]))?;
        let depth_norm = plane(outs[4]);
        let depth_est = depth_norm.map(|&d| input.scale.to_meters(d));
        let outputs = NetOutputs {
            maps: Some(maps),
            depth_est: Some(depth_est),
            depth_norm: Some(depth_norm),
            mask_est: None,
            depth_scale: input.scale,
        };
        Ok((outputs, tape))
    }

    /// Main-mode inference without keeping the tape.
    pub fn predict(&self, input: &NetInput) -> Result<Prediction> {
        let (out, _) = self.forward(input, Mode::Main)?;
        out.into_prediction()
    }

    /// Confidence maps at every scale, finest first.
    pub fn confidence_maps(&self, input: &NetInput) -> Result<Vec<Tensor>> {
        self.check_input(input)?;
        let mut tape = Tape::new(self);
        let conf_in = tape.leaf(super::ops::concat(&[&input.depth, &input.validity])?);
        let trunk = tape.conv(self, self.topo.conf_trunk, conf_in);
        let mut cur = tape.relu(trunk);
        let mut maps = Vec::new();
        for (l, &tap) in self.topo.conf_taps.iter().enumerate() {
            if l > 0 {
                cur = tape.maxpool(cur);
            }
            let y = tape.conv(self, tap, cur);
            let s = tape.sigmoid(y);
            maps.push(tape.value(s).clone());
        }
        Ok(maps)
    }
}

/// Affine map between meters and the normalized depth the network sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthScale {
    pub min: f64,
    pub span: f64,
}

impl DepthScale {
    pub fn to_meters(&self, normalized: f64) -> f64 {
        self.min + self.span * normalized
    }

    pub fn to_normalized(&self, meters: f64) -> f64 {
        (meters - self.min) / self.span
    }
}

/// Network-ready tensors for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    /// Min-max normalized color, `(3, S, S)`.
    pub rgb: Tensor,
    /// Min-max normalized inpainted depth, `(1, S, S)`.
    pub depth: Tensor,
    /// 1 where depth was measured, `(1, S, S)`.
    pub validity: Tensor,
    pub scale: DepthScale,
}

impl NetInput {
    pub fn from_observation(obs: &Observation) -> Result<Self> {
        obs.validate()?;
        let (w, h) = obs.rgb.dims();
        let mut rgb = vec![0.0; 3 * w * h];
        for (i, px) in obs.rgb.as_slice().iter().enumerate() {
            for c in 0..3 {
                rgb[c * w * h + i] = px[c];
            }
        }
        normalize_minmax_in_place(&mut rgb);
        let filled = inpaint_depth(&obs.depth, &obs.validity)?;
        let (lo, hi) = filled
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
        let scale = DepthScale {
            min: lo,
            span: if hi > lo { hi - lo } else { 1.0 },
        };
        let mut depth = filled.into_vec();
        normalize_minmax_in_place(&mut depth);
        let validity = obs.validity.as_slice().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Ok(Self {
            rgb: Tensor::from_vec(&[3, h, w], rgb)?,
            depth: Tensor::from_vec(&[1, h, w], depth)?,
            validity: Tensor::from_vec(&[1, h, w], validity)?,
            scale,
        })
    }

    /// All-zero input with unit depth scale.
    pub fn zeros(size: usize) -> Self {
        Self {
            rgb: Tensor::zeros(&[3, size, size]),
            depth: Tensor::zeros(&[1, size, size]),
            validity: Tensor::zeros(&[1, size, size]),
            scale: DepthScale { min: 0.0, span: 1.0 },
        }
    }
}

/// Raw (unclamped) network outputs. Grasp maps and depth are present in
/// main mode, the mask estimate in pretrain mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutputs {
    pub maps: Option<GraspMaps>,
    /// Auxiliary depth estimate, meters.
    pub depth_est: Option<Grid<f64>>,
    /// The same estimate in the normalized units of the input.
    pub depth_norm: Option<Grid<f64>>,
    pub mask_est: Option<Grid<f64>>,
    pub depth_scale: DepthScale,
}

impl NetOutputs {
    pub fn into_prediction(self) -> Result<Prediction> {
        match (self.maps, self.depth_est) {
            (Some(maps), Some(depth_est)) => Ok(Prediction { maps, depth_est }),
            _ => Err(Error::InvalidArgument("outputs hold no grasp maps (pretrain mode)".into())),
        }
    }
}

/// Main-mode outputs consumed by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub maps: GraspMaps,
    /// Meters.
    pub depth_est: Grid<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetConfig {
        NetConfig::new(16, 3, 4, 7).unwrap()
    }

    #[test]
    fn config_divisibility() {
        assert!(NetConfig::new(64, 4, 16, 0).is_ok());
        assert!(NetConfig::new(60, 4, 16, 0).is_err());
        assert!(NetConfig::new(8, 4, 16, 0).is_err());
        assert_eq!(NetConfig::levels_for(8), Some(3));
        assert_eq!(NetConfig::levels_for(16), Some(4));
        assert_eq!(NetConfig::levels_for(6), None);
    }

    #[test]
    fn build_is_deterministic_with_zero_biases() {
        let a = NetworkParams::build(tiny()).unwrap();
        let b = NetworkParams::build(tiny()).unwrap();
        assert_eq!(a, b);
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
        let c = NetworkParams::build(NetConfig { seed: 8, ..tiny() }).unwrap();
        assert_ne!(a.layers()[0].weight, c.layers()[0].weight);
        assert_eq!(a.confinet_layers().len(), 4);
        let names: std::collections::HashSet<_> = a.layers().iter().map(|l| l.name.clone()).collect();
        assert_eq!(names.len(), a.layers().len());
    }

    #[test]
    fn shapes_and_zero_heads() {
        let mut net = NetworkParams::build(tiny()).unwrap();
        let input = NetInput::zeros(16);
        let (out, tape) = net.forward(&input, Mode::Main).unwrap();
        assert_eq!(tape.outputs.len(), 5);
        let maps = out.maps.unwrap();
        assert_eq!(maps.dims(), (16, 16));
        assert_eq!(out.depth_est.unwrap().dims(), (16, 16));
        for i in net.head_output_layers() {
            net.layers_mut()[i].weight.iter_mut().for_each(|w| *w = 0.0);
        }
        let p = net.predict(&input).unwrap();
        for plane in p.maps.planes() {
            assert!(plane.as_slice().iter().all(|&x| x == 0.0));
        }
        let (bem, tape) = net.forward(&input, Mode::BemPretrain).unwrap();
        assert_eq!(tape.outputs.len(), 1);
        assert_eq!(bem.mask_est.unwrap().dims(), (16, 16));
        assert!(bem.maps.is_none());
    }

    #[test]
    fn confidence_of_zero_input_is_one_half() {
        let net = NetworkParams::build(NetConfig::new(64, 4, 4, 1).unwrap()).unwrap();
        let maps = net.confidence_maps(&NetInput::zeros(64)).unwrap();
        let sizes: Vec<usize> = maps.iter().map(|m| m.shape()[1]).collect();
        assert_eq!(sizes, vec![64, 32, 16, 8]);
        for m in maps {
            assert_eq!(m.shape()[0], 1);
            assert!(m.data().iter().all(|&c| c == 0.5));
        }
    }

    #[test]
    fn rejects_wrong_input_size() {
        let net = NetworkParams::build(tiny()).unwrap();
        assert!(matches!(
            net.forward(&NetInput::zeros(8), Mode::Main),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
