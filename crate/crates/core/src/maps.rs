use crate::error::{Error, Result};
use crate::grid::Grid;

/// Per-pixel grasp fields: quality, angle as `(cos 2phi, sin 2phi)`, and
/// opening width normalized by the image width.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub quality: Grid<f64>,
    pub cos2: Grid<f64>,
    pub sin2: Grid<f64>,
    pub width: Grid<f64>,
}

impl GraspMaps {
    pub fn zeros(width: usize, height: usize) -> Self {
        let z = Grid::filled(width, height, 0.0);
        Self {
            quality: z.clone(),
            cos2: z.clone(),
            sin2: z.clone(),
            width: z,
        }
    }

    pub fn new(quality: Grid<f64>, cos2: Grid<f64>, sin2: Grid<f64>, width: Grid<f64>) -> Result<Self> {
        quality.ensure_same_shape(&cos2, "cos map")?;
        quality.ensure_same_shape(&sin2, "sin map")?;
        quality.ensure_same_shape(&width, "width map")?;
        Ok(Self {
            quality,
            cos2,
            sin2,
            width,
        })
    }

    /// `(width, height)` of every plane.
    pub fn dims(&self) -> (usize, usize) {
        self.quality.dims()
    }

    pub fn planes(&self) -> [&Grid<f64>; 4] {
        [&self.quality, &self.cos2, &self.sin2, &self.width]
    }

    pub fn all_finite(&self) -> bool {
        self.planes()
            .iter()
            .all(|p| p.as_slice().iter().all(|x| x.is_finite()))
    }

    /// Checks the ground-truth invariants: ranges, unit-disk angle vectors,
    /// and a shared support across all four planes.
    pub fn validate_ground_truth(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for i in 0..self.quality.len() {
            let q = self.quality.as_slice()[i];
            let c = self.cos2.as_slice()[i];
            let s = self.sin2.as_slice()[i];
            let w = self.width.as_slice()[i];
            if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&w) {
                return bad(format!("pixel {i}: q={q} w={w} out of [0,1]"));
            }
            if !(-1.0..=1.0).contains(&c) || !(-1.0..=1.0).contains(&s) || c * c + s * s > 1.0 + 1e-9 {
                return bad(format!("pixel {i}: angle vector ({c}, {s})"));
            }
            let on = q != 0.0;
            if on != (w != 0.0) || on != (c != 0.0 || s != 0.0) {
                return bad(format!("pixel {i}: supports differ"));
            }
        }
        Ok(())
    }
}
