use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Observation;

/// Depth sensor corruption: additive Gaussian noise on measured pixels and
/// random dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Standard deviation, meters.
    pub sigma_d: f64,
    /// Probability that a measured pixel drops out.
    pub p_miss: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_d: 0.002,
            p_miss: 0.1,
        }
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma_d: 0.0,
        p_miss: 0.0,
    };

    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma_d.is_finite() && self.sigma_d >= 0.0) {
            return Err(format!("sigma_d must be >= 0, got {}", self.sigma_d));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(format!("p_miss must be in [0, 1], got {}", self.p_miss));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_d == 0.0 && self.p_miss == 0.0
    }

    /// Parses `sigma_d=0.002,p_miss=0.1` (either key may be omitted).
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut out = Self::NONE;
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
            match k.trim() {
                "sigma_d" if v >= 0.0 => out.sigma_d = v,
                "p_miss" if (0.0..=1.0).contains(&v) => out.p_miss = v,
                other => return Err(format!("bad noise setting {other}={v}")),
            }
        }
        Ok(out)
    }

    pub fn apply<R: Rng>(&self, obs: &Observation, rng: &mut R) -> Observation {
        let mut out = obs.clone();
        if self.is_zero() {
            return out;
        }
        let normal = Normal::new(0.0, self.sigma_d.max(0.0)).expect("finite sigma");
        for (z, ok) in out.depth.as_mut_slice().iter_mut().zip(out.validity.as_mut_slice()) {
            if !*ok {
                continue;
            }
            if self.p_miss > 0.0 && rng.random::<f64>() < self.p_miss {
                *ok = false;
                *z = 0.0;
            } else if self.sigma_d > 0.0 {
                *z = (*z + normal.sample(rng)).max(1e-3);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_settings() {
        let n = NoiseModel::parse("sigma_d=0.002,p_miss=0.1").unwrap();
        assert_eq!(n, NoiseModel::default());
        assert_eq!(NoiseModel::parse("").unwrap(), NoiseModel::NONE);
        assert!(NoiseModel::parse("p_miss=2").is_err());
        assert!(NoiseModel::parse("foo=1").is_err());
    }
}
