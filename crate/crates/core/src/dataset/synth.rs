use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Observation, Rgb, Sample};
use crate::error::{Error, Result};
use crate::geometry::CameraModel;
use crate::grid::{BinaryMask, Grid};

const MAX_ATTEMPTS: u64 = 64;
const MAX_RANGE_M: f64 = 1.5;
const LOOK_HEIGHT_M: f64 = 0.05;
const NO_RETURN_RGB: Rgb = [0.08, 0.08, 0.08];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    LShape,
}

/// Parameters of the synthetic tabletop generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Square image side, pixels.
    pub size: usize,
    /// Camera-to-table distance, meters.
    pub table_depth: f64,
    /// Object height range, meters.
    pub height_range: (f64, f64),
    /// Depth noise standard deviation, meters.
    pub sigma_d: f64,
    /// Per-scene dropout probability is drawn uniformly from this range.
    pub p_miss_range: (f64, f64),
    /// Camera pitch above the table plane; 90 is straight down.
    pub pitch_deg: f64,
    /// Extra dropout added at a horizontal view, scaled by `cos(pitch)`.
    pub oblique_dropout: f64,
    pub rgb_noise: f64,
    /// Count every pixel of the inpainted depth target in the depth loss.
    pub target_all_valid: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            size: 64,
            table_depth: 0.55,
            height_range: (0.02, 0.08),
            sigma_d: 0.002,
            p_miss_range: (0.0, 0.2),
            pitch_deg: 90.0,
            oblique_dropout: 0.15,
            rgb_noise: 0.02,
            target_all_valid: true,
        }
    }
}

impl SceneConfig {
    pub fn noiseless(size: usize) -> Self {
        Self {
            size,
            sigma_d: 0.0,
            p_miss_range: (0.0, 0.0),
            oblique_dropout: 0.0,
            rgb_noise: 0.0,
            ..Self::default()
        }
    }

    pub fn with_pitch(mut self, pitch_deg: f64) -> Self {
        self.pitch_deg = pitch_deg;
        self
    }

    /// Dropout probability for a scene whose base rate is `base`.
    pub fn dropout_rate(&self, base: f64) -> f64 {
        (base + self.oblique_dropout * self.pitch_deg.to_radians().cos().abs()).clamp(0.0, 0.95)
    }

    /// Expected dropout over the base-rate range.
    pub fn mean_dropout_rate(&self) -> f64 {
        self.dropout_rate(0.5 * (self.p_miss_range.0 + self.p_miss_range.1))
    }

    fn validate(&self) -> Result<()> {
        let ok = self.size >= 8
            && self.table_depth > self.height_range.1
            && 0.0 <= self.height_range.0
            && self.height_range.0 <= self.height_range.1
            && self.sigma_d >= 0.0
            && 0.0 <= self.p_miss_range.0
            && self.p_miss_range.0 <= self.p_miss_range.1
            && self.p_miss_range.1 <= 1.0
            && (0.0..=90.0).contains(&self.pitch_deg)
            && self.oblique_dropout >= 0.0
            && self.rgb_noise >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("scene config out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
struct Object {
    kind: ShapeKind,
    center: (f64, f64),
    angle: f64,
    long: f64,
    short: f64,
    thickness: f64,
    height: f64,
}

impl Object {
    fn random<R: Rng>(rng: &mut R, size: usize, cfg: &SceneConfig) -> Self {
        let s = size as f64;
        let kind = match rng.random_range(0..3) {
            0 => ShapeKind::Rectangle,
            1 => ShapeKind::Ellipse,
            _ => ShapeKind::LShape,
        };
        let long = rng.random_range(0.25..0.45) * s;
        let short = match kind {
            ShapeKind::LShape => rng.random_range(0.6..1.0) * long,
            _ => rng.random_range(0.35..0.8) * long,
        };
        let thickness = (rng.random_range(0.7..0.85) * short).max(3.0);
        let radius = 0.5 * long.hypot(short);
        let (lo, hi) = (radius + 2.0, s - 3.0 - radius);
        let mut coord = || if lo < hi { rng.random_range(lo..hi) } else { 0.5 * (s - 1.0) };
        let center = (coord(), coord());
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let (h0, h1) = cfg.height_range;
        let height = if h1 > h0 { rng.random_range(h0..h1) } else { h0 };
        Self {
            kind,
            center,
            angle,
            long,
            short,
            thickness,
            height,
        }
    }

    /// Membership of a point given in top-down pixel coordinates.
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.angle.sin_cos();
        let lx = dx * c + dy * s;
        let ly = -dx * s + dy * c;
        let (hl, hs) = (0.5 * self.long, 0.5 * self.short);
        match self.kind {
            ShapeKind::Rectangle => lx.abs() <= hl && ly.abs() <= hs,
            ShapeKind::Ellipse => (lx / hl).powi(2) + (ly / hs).powi(2) <= 1.0,
            ShapeKind::LShape => {
                lx.abs() <= hl && ly.abs() <= hs && (ly <= -hs + self.thickness || lx <= -hl + self.thickness)
            }
        }
    }
}

fn random_colors<R: Rng>(rng: &mut R) -> (Rgb, Rgb) {
    let g = rng.random_range(0.45..0.65);
    let table = [g + rng.random_range(-0.05..0.05), g, g + rng.random_range(-0.05..0.05)];
    loop {
        let obj: Rgb = [rng.random(), rng.random(), rng.random()];
        let dist: f64 = obj.iter().zip(&table).map(|(a, b)| (a - b).abs()).sum();
        if dist >= 0.6 {
            return (table, obj);
        }
    }
}

/// What a pixel sees before sensor noise.
#[derive(Clone, Copy)]
struct Hit {
    depth: Option<f64>,
    object: bool,
}

fn render_top_down(obj: &Object, cfg: &SceneConfig) -> Grid<Hit> {
    Grid::from_fn(cfg.size, cfg.size, |u, v| {
        let object = obj.contains(u as f64, v as f64);
        let depth = if object { cfg.table_depth - obj.height } else { cfg.table_depth };
        Hit {
            depth: Some(depth),
            object,
        }
    })
}

/// Oblique view as a planar homography of the top-down scene: each ray is
/// intersected with the table plane and the top-down scene is sampled there.
/// Object pixels are brought forward by the height component along the
/// viewing axis.
fn render_oblique(obj: &Object, cfg: &SceneConfig, cam: &CameraModel) -> Grid<Hit> {
    let alpha = cfg.pitch_deg.to_radians();
    let (sa, ca) = alpha.sin_cos();
    let forward = Vector3::new(0.0, ca, -sa);
    let x_axis = Vector3::new(1.0, 0.0, 0.0);
    let y_axis = forward.cross(&x_axis);
    let target = Vector3::new(0.0, 0.0, LOOK_HEIGHT_M * ca);
    let eye = target - cfg.table_depth * forward;
    Grid::from_fn(cfg.size, cfg.size, |u, v| {
        let rx = (u as f64 - cam.cx) / cam.fx;
        let ry = (v as f64 - cam.cy) / cam.fy;
        let dir = rx * x_axis + ry * y_axis + forward;
        let none = Hit {
            depth: None,
            object: false,
        };
        if dir.z >= -1e-9 {
            return none;
        }
        let t = -eye.z / dir.z;
        if t > MAX_RANGE_M {
            return none;
        }
        let p = eye + t * dir;
        let tu = p.x * cam.fx / cfg.table_depth + cam.cx;
        let tv = -p.y * cam.fy / cfg.table_depth + cam.cy;
        let object = obj.contains(tu, tv);
        let depth = if object { t - obj.height * sa } else { t };
        Hit {
            depth: Some(depth.max(1e-3)),
            object,
        }
    })
}

fn render_attempt(seed: u64, attempt: u64, cfg: &SceneConfig) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let cam = CameraModel::synthetic(cfg.size);
    let obj = Object::random(&mut rng, cfg.size, cfg);
    let (table_rgb, obj_rgb) = random_colors(&mut rng);
    let (p0, p1) = cfg.p_miss_range;
    let base = if p1 > p0 { rng.random_range(p0..p1) } else { p0 };
    let p_miss = cfg.dropout_rate(base);

    let hits = if cfg.pitch_deg >= 90.0 {
        render_top_down(&obj, cfg)
    } else {
        render_oblique(&obj, cfg, &cam)
    };
    let depth_noise = Normal::new(0.0, cfg.sigma_d).expect("finite sigma");
    let rgb_noise = Normal::new(0.0, cfg.rgb_noise).expect("finite sigma");
    let n = cfg.size * cfg.size;
    let (mut rgb, mut depth, mut valid, mut mask) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for hit in hits.as_slice() {
        let base_rgb = match (hit.depth, hit.object) {
            (None, _) => NO_RETURN_RGB,
            (Some(_), true) => obj_rgb,
            (Some(_), false) => table_rgb,
        };
        let mut px = base_rgb;
        if cfg.rgb_noise > 0.0 {
            for c in &mut px {
                *c = (*c + rgb_noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        rgb.push(px);
        mask.push(hit.object);
        match hit.depth {
            Some(z) if !(p_miss > 0.0 && rng.random::<f64>() < p_miss) => {
                let noisy = if cfg.sigma_d > 0.0 { z + depth_noise.sample(&mut rng) } else { z };
                depth.push(noisy.max(1e-3));
                valid.push(true);
            }
            _ => {
                depth.push(0.0);
                valid.push(false);
            }
        }
    }
    let s = cfg.size;
    let mask = BinaryMask::from_vec(s, s, mask)?;
    if mask.count() < 4 {
        return Err(Error::DegenerateObject("object not visible".into()));
    }
    let obs = Observation::new(
        Grid::from_vec(s, s, rgb)?,
        Grid::from_vec(s, s, depth)?,
        Grid::from_vec(s, s, valid)?,
        cam,
    )?;
    Sample::from_parts(obs, mask, cfg.target_all_valid)
}

/// Renders one random primitive on a flat table. Deterministic in `seed`;
/// oblique views that hide the object are redrawn from the next stream.
pub fn synth_scene(seed: u64, cfg: &SceneConfig) -> Result<Sample> {
    cfg.validate()?;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        match render_attempt(seed, attempt, cfg) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// `count` scenes with seeds `scene_seed(seed, 0), scene_seed(seed, 1), ...`.
pub fn synth_dataset(count: usize, seed: u64, cfg: &SceneConfig) -> Result<Vec<Sample>> {
    (0..count).map(|i| synth_scene(scene_seed(seed, i), cfg)).collect()
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th scene of a dataset generated from `seed`.
/// Datasets from different seeds do not share scenes.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index as u64))
}
