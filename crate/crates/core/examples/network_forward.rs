//! Builds the network, runs both forward modes and inspects the confidence
//! maps.

use graspfuse::dataset::{synth_scene, SceneConfig};
use graspfuse::nn::{Mode, NetConfig, NetInput, NetworkParams};

fn main() -> graspfuse::Result<()> {
    let net = NetworkParams::build(NetConfig::new(64, 4, 8, 0)?)?;
    let params: usize = net.layers().iter().map(|l| l.weight.len() + l.bias.len()).sum();
    println!("{} layers, {params} parameters", net.layers().len());

    let scene = synth_scene(3, &SceneConfig::default())?;
    let input = NetInput::from_observation(&scene.observation)?;

    let t = std::time::Instant::now();
    let (main, _) = net.forward(&input, Mode::Main)?;
    println!("main forward {:.1?}", t.elapsed());
    let maps = main.maps.as_ref().expect("main mode maps");
    for (name, g) in ["quality", "cos2", "sin2", "width"].iter().zip(maps.planes()) {
        let (lo, hi) = g.as_slice().iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!("  {name:>7}: [{lo:+.4}, {hi:+.4}]");
    }

    let (pre, _) = net.forward(&input, Mode::BemPretrain)?;
    let mask = pre.mask_est.as_ref().expect("pretrain mask");
    println!("mask estimate mean {:.4}", mask.as_slice().iter().sum::<f64>() / mask.len() as f64);

    for (l, c) in net.confidence_maps(&input)?.iter().enumerate() {
        let (_, h, w) = c.chw();
        println!("confidence level {l}: {w}x{h}, mean {:.3}", c.data().iter().sum::<f64>() / c.len() as f64);
    }
    Ok(())
}
