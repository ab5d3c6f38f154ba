use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use super::{resize_sample, Observation, Sample};
use crate::error::{Error, Result};
use crate::geometry::CameraModel;
use crate::grid::{BinaryMask, Grid};
use crate::maps::GraspMaps;

const GMAP_MAGIC: &[u8; 4] = b"GMAP";

/// One `rgb<TAB>depth<TAB>mask` manifest line, resolved against the
/// manifest directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub mask: PathBuf,
}

impl ManifestEntry {
    /// Stem shared by the entry's output files.
    pub fn stem(&self) -> String {
        let name = self.rgb.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
        name.strip_suffix("_rgb").unwrap_or(name).to_string()
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Reads a manifest. Blank lines and `#` comments are skipped.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(format_err(
                path,
                format!("line {}: expected 3 tab-separated paths, found {}", lineno + 1, fields.len()),
            ));
        }
        let resolve = |p: &str| base.join(p.trim());
        out.push(ManifestEntry {
            rgb: resolve(fields[0]),
            depth: resolve(fields[1]),
            mask: resolve(fields[2]),
        });
    }
    Ok(out)
}

/// Writes entries with paths relative to the manifest directory when
/// possible.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let mut text = String::new();
    for e in entries {
        text.push_str(&format!("{}\t{}\t{}\n", rel(&e.rgb), rel(&e.depth), rel(&e.mask)));
    }
    fs::write(path, text)?;
    Ok(())
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| format_err(path, e.to_string()))
}

/// Loads an RGB image, a 16-bit millimeter depth image (0 = missing) and a
/// mask image (nonzero = object).
pub fn load_observation(entry: &ManifestEntry, camera: Option<&CameraModel>) -> Result<(Observation, BinaryMask)> {
    let rgb_img = open_image(&entry.rgb)?.to_rgb8();
    let (w, h) = (rgb_img.width() as usize, rgb_img.height() as usize);
    let depth_img = open_image(&entry.depth)?;
    if depth_img.color() != ColorType::L16 {
        return Err(format_err(
            &entry.depth,
            format!("expected 16-bit grayscale depth, found {:?}", depth_img.color()),
        ));
    }
    let depth_img = depth_img.to_luma16();
    let mask_img = open_image(&entry.mask)?.to_luma8();
    for (p, img_w, img_h) in [
        (&entry.depth, depth_img.width(), depth_img.height()),
        (&entry.mask, mask_img.width(), mask_img.height()),
    ] {
        if (img_w as usize, img_h as usize) != (w, h) {
            return Err(format_err(p, format!("size {img_w}x{img_h} differs from rgb {w}x{h}")));
        }
    }
    let rgb = Grid::from_vec(
        w,
        h,
        rgb_img
            .pixels()
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect(),
    )?;
    let raw: Vec<u16> = depth_img.pixels().map(|p| p[0]).collect();
    let depth = Grid::from_vec(w, h, raw.iter().map(|&mm| mm as f64 / 1000.0).collect())?;
    let validity = Grid::from_vec(w, h, raw.iter().map(|&mm| mm > 0).collect())?;
    let mask = Grid::from_vec(w, h, mask_img.pixels().map(|p| p[0] > 0).collect())?;
    let camera = match camera {
        Some(c) if (c.width, c.height) == (w, h) => *c,
        Some(c) => c.resized(w, h)?,
        None => CameraModel::default_for(w, h),
    };
    Ok((Observation::new(rgb, depth, validity, camera)?, mask))
}

/// Loads, labels and optionally resizes one manifest entry. Only measured
/// depth pixels count in the depth target of real data.
pub fn load_sample(entry: &ManifestEntry, camera: Option<&CameraModel>, size: Option<usize>) -> Result<Sample> {
    let (obs, mask) = load_observation(entry, camera)?;
    let sample = Sample::from_parts(obs, mask, false)?;
    match size {
        Some(s) if (s, s) != sample.observation.rgb.dims() => resize_sample(&sample, s, s),
        _ => Ok(sample),
    }
}

fn to_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `<stem>_rgb.png`, `<stem>_depth.png` (16-bit mm) and
/// `<stem>_mask.png` into `dir`.
pub fn write_sample_pngs(sample: &Sample, dir: &Path, stem: &str) -> Result<ManifestEntry> {
    let obs = &sample.observation;
    let (w, h) = (obs.width() as u32, obs.height() as u32);
    let rgb = RgbImage::from_fn(w, h, |u, v| {
        let p = obs.rgb.at(u as usize, v as usize);
        image::Rgb([to_u8(p[0]), to_u8(p[1]), to_u8(p[2])])
    });
    let depth: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |u, v| {
        let (u, v) = (u as usize, v as usize);
        let mm = if *obs.validity.at(u, v) {
            (obs.depth.at(u, v) * 1000.0).round().clamp(1.0, 65535.0) as u16
        } else {
            0
        };
        Luma([mm])
    });
    let mask = GrayImage::from_fn(w, h, |u, v| Luma([if *sample.mask.at(u as usize, v as usize) { 255 } else { 0 }]));
    let entry = ManifestEntry {
        rgb: dir.join(format!("{stem}_rgb.png")),
        depth: dir.join(format!("{stem}_depth.png")),
        mask: dir.join(format!("{stem}_mask.png")),
    };
    rgb.save(&entry.rgb)?;
    depth.save(&entry.depth)?;
    mask.save(&entry.mask)?;
    Ok(entry)
}

pub fn encode_gmap(maps: &GraspMaps) -> Vec<u8> {
    let (w, h) = maps.dims();
    let mut out = Vec::with_capacity(12 + 16 * w * h);
    out.extend_from_slice(GMAP_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for plane in maps.planes() {
        for &x in plane.as_slice() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_gmap(bytes: &[u8], path: &Path) -> Result<GraspMaps> {
    if bytes.len() < 12 || &bytes[..4] != GMAP_MAGIC {
        return Err(format_err(path, "missing GMAP header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (h, w) = (word(4), word(8));
    let n = w.checked_mul(h).ok_or_else(|| format_err(path, "dimension overflow"))?;
    if bytes.len() != 12 + 16 * n {
        return Err(format_err(
            path,
            format!("expected {} bytes for {w}x{h}, found {}", 12 + 16 * n, bytes.len()),
        ));
    }
    let plane = |k: usize| -> Result<Grid<f64>> {
        let start = 12 + 4 * n * k;
        let data = bytes[start..start + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Grid::from_vec(w, h, data)
    };
    GraspMaps::new(plane(0)?, plane(1)?, plane(2)?, plane(3)?)
}

pub fn write_gmap(path: &Path, maps: &GraspMaps) -> Result<()> {
    fs::write(path, encode_gmap(maps))?;
    Ok(())
}

pub fn read_gmap(path: &Path) -> Result<GraspMaps> {
    decode_gmap(&fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_scene, SceneConfig};

    #[test]
    fn gmap_round_trip() {
        let s = synth_scene(5, &SceneConfig::default()).unwrap();
        let bytes = encode_gmap(&s.maps);
        assert_eq!(&bytes[..4], b"GMAP");
        assert_eq!(bytes.len(), 12 + 16 * 64 * 64);
        let back = decode_gmap(&bytes, Path::new("x")).unwrap();
        for (a, b) in s.maps.planes().iter().zip(back.planes()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        assert!(decode_gmap(&bytes[..100], Path::new("x")).is_err());
    }

    #[test]
    fn png_round_trip_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let s = synth_scene(9, &SceneConfig::default()).unwrap();
        let entry = write_sample_pngs(&s, dir.path(), "s0").unwrap();
        let manifest = dir.path().join("manifest.tsv");
        write_manifest(&manifest, std::slice::from_ref(&entry)).unwrap();
        let entries = load_manifest(&manifest).unwrap();
        assert_eq!(entries, vec![entry]);
        assert_eq!(entries[0].stem(), "s0");
        let (obs, mask) = load_observation(&entries[0], Some(&s.observation.camera)).unwrap();
        assert_eq!(mask, s.mask);
        assert_eq!(obs.validity, s.observation.validity);
        for (a, b) in obs.depth.as_slice().iter().zip(s.observation.depth.as_slice()) {
            assert!((a - b).abs() <= 0.0005 + 1e-12);
        }
        let loaded = load_sample(&entries[0], None, Some(32)).unwrap();
        assert_eq!(loaded.observation.rgb.dims(), (32, 32));
    }

    #[test]
    fn manifest_rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        fs::write(&p, "a.png b.png c.png\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Format { .. })));
    }
}
