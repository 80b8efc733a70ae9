//! Runs progressive deblurring on one blurred synthetic image and reports
//! PSNR after each iteration.
//!
//! cargo run --release --example progressive_deblur -- [checkpoint.ckpt]
//!
//! Without a checkpoint a freshly initialized model is used, which returns
//! its input unchanged at every iteration.

use mtrnn::dataset::{build_ladder, synth_sequence, SceneConfig};
use mtrnn::eval::{image_psnr, progressive_deblur, InferenceConfig};
use mtrnn::model::{init_model, load_checkpoint, ModelConfig};

fn main() -> mtrnn::Result<()> {
    let params = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path)?.params,
        None => init_model(&ModelConfig::desk(), 0)?,
    };
    let seq = synth_sequence(&SceneConfig::default(), 99)?;
    let ladder = build_ladder("probe", &seq, 9)?;
    let blurred = ladder.input();
    let sharp = ladder.sharp();

    let config = InferenceConfig { iterations: 8, emit_all: true, ..Default::default() };
    let outputs = progressive_deblur(&params, blurred, &config)?;
    println!("input      {:.3} dB", image_psnr(blurred, sharp)?);
    for (i, out) in outputs.iter().enumerate() {
        println!("iteration {} {:.3} dB", i + 1, image_psnr(out, sharp)?);
    }
    Ok(())
}
