//! Progressive inference and image-quality scoring.

mod infer;
mod metrics;
mod report;

pub use infer::{progressive_deblur, progressive_deblur_batch, InferenceConfig};
pub use metrics::{image_psnr, psnr, ssim, Db, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{eval_dataset, Aggregate, EvalConfig, EvalMeta, EvalReport, ImageEval, IterationEval, TlEval};
