//! Synthetic tabletop scenes: render, save as PNG + manifest, reload.

use graspfuse::dataset::{load_manifest, load_sample, synth_dataset, write_manifest, write_sample_pngs, SceneConfig};

fn main() -> graspfuse::Result<()> {
    let dir = std::env::temp_dir().join("graspfuse_synth_example");
    std::fs::create_dir_all(&dir)?;

    for pitch in [90.0, 45.0, 0.0] {
        let cfg = SceneConfig::default().with_pitch(pitch);
        let scenes = synth_dataset(4, 7, &cfg)?;
        let holes: usize = scenes.iter().map(|s| s.observation.validity.as_slice().iter().filter(|&&ok| !ok).count()).sum();
        let object: usize = scenes.iter().map(|s| s.mask.count()).sum();
        println!("pitch {pitch:>4}: {} object px, {holes} missing depth px", object);
    }

    let scenes = synth_dataset(4, 7, &SceneConfig::default())?;
    let mut entries = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        entries.push(write_sample_pngs(s, &dir, &format!("scene_{i:04}"))?);
    }
    let manifest = dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;

    for e in load_manifest(&manifest)? {
        let s = load_sample(&e, None, None)?;
        let q = s.maps.quality.as_slice().iter().filter(|&&q| q > 0.0).count();
        println!("{}: {}x{}, {q} positive grasp px", e.stem(), s.observation.width(), s.observation.height());
    }
    println!("wrote {}", dir.display());
    Ok(())
}
