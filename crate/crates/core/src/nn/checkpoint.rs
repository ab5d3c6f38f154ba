use super::model::{Layer, LayerGroup, NetConfig, NetworkParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UGN3";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializes parameters, trainable flags and the config, little-endian.
pub fn save_checkpoint(net: &NetworkParams) -> Vec<u8> {
    let c = net.config();
    let mut out = Vec::with_capacity(64 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.input_size, c.depth_levels, c.base_channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.push(u8::from(net.bem_pretrained));
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.name.len() as u32).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        out.push(l.group.code());
        out.push(u8::from(l.trainable));
        for v in [l.cout, l.cin, l.kernel, l.kernel] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for x in l.weight.iter().chain(&l.bias) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| Error::CorruptCheckpoint("missing header".into()))? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let input_size = r.u32()? as usize;
    let depth_levels = r.u32()? as usize;
    let base_channels = r.u32()? as usize;
    let seed = r.u64()?;
    let config = NetConfig {
        input_size,
        depth_levels,
        base_channels,
        seed,
    };
    config
        .validate()
        .map_err(|e| Error::CorruptCheckpoint(format!("stored config invalid: {e}")))?;
    let bem_pretrained = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(Error::CorruptCheckpoint(format!("bad flag byte {b}"))),
    };
    let n_layers = r.u32()? as usize;
    if n_layers > 4096 {
        return Err(Error::CorruptCheckpoint(format!("implausible layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::CorruptCheckpoint("layer name is not UTF-8".into()))?;
        let group = LayerGroup::from_code(r.u8()?)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("layer {name}: unknown group")))?;
        let trainable = r.u8()? != 0;
        let cout = r.u32()? as usize;
        let cin = r.u32()? as usize;
        let kh = r.u32()? as usize;
        let kw = r.u32()? as usize;
        if kh != kw {
            return Err(Error::CorruptCheckpoint(format!("layer {name}: non-square kernel")));
        }
        let n_weight = cout
            .checked_mul(cin)
            .and_then(|v| v.checked_mul(kh * kw))
            .ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?;
        let weight = r.f64s(n_weight)?;
        let bias = r.f64s(cout)?;
        layers.push(Layer {
            name,
            group,
            cin,
            cout,
            kernel: kh,
            weight,
            bias,
            trainable,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    NetworkParams::with_layers(config, layers, bem_pretrained)
}

/// Loads a checkpoint that must match `expected`.
pub fn load_checkpoint_for(bytes: &[u8], expected: &NetConfig) -> Result<NetworkParams> {
    let net = load_checkpoint(bytes)?;
    if net.config() != expected {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint has {:?}, expected {:?}",
            net.config(),
            expected
        )));
    }
    Ok(net)
}

pub fn save_checkpoint_file(net: &NetworkParams, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, save_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint_file(path: &std::path::Path) -> Result<NetworkParams> {
    load_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> NetworkParams {
        let mut n = NetworkParams::build(NetConfig::new(16, 3, 4, 3).unwrap()).unwrap();
        n.layers_mut()[2].bias[1] = -0.25;
        n.layers_mut()[5].trainable = false;
        n.bem_pretrained = true;
        n
    }

    #[test]
    fn round_trip_is_bitwise() {
        let n = net();
        let bytes = save_checkpoint(&n);
        assert_eq!(&bytes[..4], b"UGN3");
        let back = load_checkpoint(&bytes).unwrap();
        assert_eq!(back, n);
        assert_eq!(save_checkpoint(&back), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = save_checkpoint(&net());
        for cut in [0, 3, 10, 40, bytes.len() - 1] {
            assert!(matches!(load_checkpoint(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))));
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(load_checkpoint(&bad), Err(Error::CorruptCheckpoint(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(load_checkpoint(&extra), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn config_mismatch() {
        let bytes = save_checkpoint(&net());
        let other = NetConfig::new(32, 3, 4, 3).unwrap();
        assert!(matches!(load_checkpoint_for(&bytes, &other), Err(Error::ConfigMismatch(_))));
        assert!(load_checkpoint_for(&bytes, net().config()).is_ok());
    }
}
