//! Synthesizes a small dataset and trains the desk-scale model on it with
//! multi-temporal supervision, printing the loss and validation curve.
//!
//! cargo run --release --example train_desk -- [steps]

use mtrnn::dataset::{synthesize_dataset, Dataset, SynthConfig};
use mtrnn::numerics::AdamHyper;
use mtrnn::train::{train, TrainConfig};

fn main() -> mtrnn::Result<()> {
    let steps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("steps must be an integer"));
    let root = std::env::temp_dir().join("mtrnn_train_desk");
    let data = root.join("data");
    if !data.join(mtrnn::dataset::MANIFEST_FILE).exists() {
        synthesize_dataset(&data, &SynthConfig { train: 24, val: 4, test: 4, ..Default::default() })?;
    }
    let dataset = Dataset::open(&data)?;

    let config = TrainConfig {
        total_steps: steps,
        halve_every: steps.max(2) / 2,
        patch_size: 32,
        total_iterations: 4,
        validate_every: (steps / 4).max(1),
        val_iterations: 6,
        adam: AdamHyper { lr: 1e-3, ..Default::default() },
        ..Default::default()
    };
    let (checkpoint, log) = train(&config, &dataset, Some(&root.join("run")))?;
    for rec in log.steps().filter(|r| r.step % (steps / 10).max(1) == 0) {
        println!("step {:>5}  loss {:.5}  lr {:.2e}  start TL {}", rec.step, rec.loss, rec.lr, rec.start_tl);
    }
    for v in log.validations().filter(|v| v.step == checkpoint.meta.step) {
        println!("val TL {:>2} iter {}: {:.2} dB", v.tl, v.iter, v.psnr.0);
    }
    println!("outputs in {}", root.join("run").display());
    Ok(())
}
