//! PSNR and SSIM of increasingly blurred versions of one scene.

use mtrnn::dataset::{build_ladder, synth_sequence, SceneConfig};
use mtrnn::eval::{image_psnr, ssim};

fn main() -> mtrnn::Result<()> {
    let seq = synth_sequence(&SceneConfig::default(), 3)?;
    let ladder = build_ladder("metrics", &seq, 13)?;
    let sharp = ladder.sharp();
    println!("TL   PSNR (dB)  SSIM");
    for (tl, img) in &ladder.images {
        println!("{tl:>2}   {:>9.3}  {:.4}", image_psnr(img, sharp)?, ssim(img, sharp)?);
    }
    Ok(())
}
