//! Stage 1 pretrains the background extraction module on masks; stage 2
//! trains the grasp network with that module frozen. Saves a checkpoint.

use graspfuse::dataset::{split, synth_dataset, SceneConfig};
use graspfuse::nn::{load_checkpoint_file, save_checkpoint_file, NetConfig, NetworkParams};
use graspfuse::train::{evaluate_losses, train_stage1, train_stage2, LossWeights, TrainConfig};

fn main() -> graspfuse::Result<()> {
    let data = synth_dataset(40, 1, &SceneConfig::default())?;
    let (train, val) = split(data, 0.2, 0)?;
    let mut net = NetworkParams::build(NetConfig::new(64, 4, 8, 0)?)?;

    let c1 = TrainConfig { epochs: 3, ..Default::default() };
    train_stage1(&mut net, &train, &c1, &mut |r, _| {
        println!("stage 1 epoch {}: L_mask {:.5}", r.epoch, r.mask);
    })?;

    let c2 = TrainConfig { epochs: 3, ..Default::default() };
    let w = c2.weights;
    train_stage2(&mut net, &train, &c2, &mut |r, n| {
        let v = evaluate_losses(n, &val, &w).expect("validation losses");
        println!(
            "stage 2 epoch {}: L_depth {:.5} L_grasp {:.5} | val L_grasp {:.5}",
            r.epoch, r.depth, r.grasp, v.grasp
        );
    })?;

    let path = std::env::temp_dir().join("graspfuse_example.ckpt");
    save_checkpoint_file(&net, &path)?;
    let back = load_checkpoint_file(&path)?;
    let trainable = back.layers().iter().filter(|l| l.trainable).count();
    println!(
        "saved {}, {trainable}/{} layers trainable, val L_total {:.5}",
        path.display(),
        back.layers().len(),
        evaluate_losses(&back, &val, &LossWeights::default())?.total
    );
    Ok(())
}
