use std::path::Path;

use image::RgbImage;

use crate::dataset::{normalize_minmax, Rgb};
use crate::error::Result;
use crate::geometry::ImageGrasp;
use crate::grid::Grid;

/// Opacity of the heat overlay.
pub const HEATMAP_ALPHA: f64 = 0.5;

const LINE_RGB: [u8; 3] = [255, 255, 255];
const CENTER_RGB: [u8; 3] = [0, 0, 0];

/// Color ramps for map values in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorRamp {
    /// Blue through cyan, yellow and red.
    #[default]
    Jet,
    Gray,
}

impl ColorRamp {
    pub fn color(self, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        match self {
            ColorRamp::Gray => [t; 3],
            ColorRamp::Jet => {
                let f = |x: f64| (1.5 - (4.0 * t - x).abs()).clamp(0.0, 1.0);
                [f(3.0), f(2.0), f(1.0)]
            }
        }
    }
}

fn to_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Min-max normalized `map` through `ramp`, blended over `underlay`. When a
/// grasp is given its closing line is drawn through the grasp pixel.
pub fn heatmap_image(map: &Grid<f64>, underlay: &Grid<Rgb>, ramp: ColorRamp, grasp: Option<&ImageGrasp>) -> Result<RgbImage> {
    map.ensure_same_shape(underlay, "heatmap/underlay")?;
    let (w, h) = map.dims();
    let norm = normalize_minmax(map.as_slice());
    let mut img = RgbImage::new(w as u32, h as u32);
    for (i, (t, base)) in norm.iter().zip(underlay.as_slice()).enumerate() {
        let heat = ramp.color(*t);
        let px = [0, 1, 2].map(|c| to_u8(HEATMAP_ALPHA * heat[c] + (1.0 - HEATMAP_ALPHA) * base[c]));
        img.put_pixel((i % w) as u32, (i / w) as u32, image::Rgb(px));
    }
    if let Some(g) = grasp {
        let (s, c) = g.phi.sin_cos();
        let half = g.width_px / 2.0;
        let steps = (2.0 * half).ceil() as i64 * 2;
        for k in -steps..=steps {
            let t = k as f64 * 0.5;
            if t.abs() > half {
                continue;
            }
            let (x, y) = ((g.u as f64 + t * c).round(), (g.v as f64 + t * s).round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                img.put_pixel(x as u32, y as u32, image::Rgb(LINE_RGB));
            }
        }
        img.put_pixel(g.u as u32, g.v as u32, image::Rgb(CENTER_RGB));
    }
    Ok(img)
}

/// Writes [`heatmap_image`] as a PNG.
pub fn render_heatmap(
    map: &Grid<f64>,
    underlay: &Grid<Rgb>,
    grasp: Option<&ImageGrasp>,
    path: impl AsRef<Path>,
) -> Result<()> {
    heatmap_image(map, underlay, ColorRamp::Jet, grasp)?.save(path.as_ref())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_uniform() {
        let img = heatmap_image(&Grid::filled(6, 4, 0.7), &Grid::filled(6, 4, [0.2; 3]), ColorRamp::Jet, None).unwrap();
        assert_eq!(img.dimensions(), (6, 4));
        let first = *img.get_pixel(0, 0);
        assert!(img.pixels().all(|p| *p == first));
    }

    #[test]
    fn grasp_line_is_drawn() {
        let mut map = Grid::filled(16, 16, 0.0);
        *map.at_mut(5, 7) = 1.0;
        let g = ImageGrasp {
            u: 5,
            v: 7,
            phi: 0.0,
            width_px: 6.0,
            quality: 1.0,
        };
        let img = heatmap_image(&map, &Grid::filled(16, 16, [0.0; 3]), ColorRamp::Jet, Some(&g)).unwrap();
        assert_eq!(img.get_pixel(5, 7).0, CENTER_RGB);
        assert_eq!(img.get_pixel(2, 7).0, LINE_RGB);
        assert_eq!(img.get_pixel(8, 7).0, LINE_RGB);
        assert_ne!(img.get_pixel(10, 7).0, LINE_RGB);
    }

    #[test]
    fn png_round_trip_keeps_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.png");
        let map = Grid::from_fn(12, 9, |u, v| (u * v) as f64);
        render_heatmap(&map, &Grid::filled(12, 9, [0.5; 3]), None, &path).unwrap();
        let back = image::open(&path).unwrap();
        assert_eq!((back.width(), back.height()), (12, 9));
    }

    #[test]
    fn jet_endpoints() {
        assert_eq!(ColorRamp::Jet.color(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(ColorRamp::Jet.color(1.0), [0.5, 0.0, 0.0]);
        assert_eq!(ColorRamp::Jet.color(0.5), [0.5, 1.0, 0.5]);
    }
}
