//! Multi-temporal vs single-shot training at equal step budget, and the
//! fixed-level difficulty sweep, on a small synthetic dataset.
//!
//! cargo run --release --example ablation -- [steps] [out_dir]

use mtrnn::dataset::{synthesize_dataset, Dataset, SynthConfig};
use mtrnn::experiments::{ss_vs_mt, tl_sweep, write_report};
use mtrnn::numerics::AdamHyper;
use mtrnn::train::TrainConfig;

fn main() -> mtrnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(100, |s| s.parse().expect("steps must be an integer"));
    let out = args.next().unwrap_or_else(|| "ablation_out".into());
    let data = std::env::temp_dir().join("mtrnn_ablation_data");
    if !data.join(mtrnn::dataset::MANIFEST_FILE).exists() {
        synthesize_dataset(&data, &SynthConfig { train: 16, val: 2, test: 6, native_tls: vec![7, 9], ..Default::default() })?;
    }
    let dataset = Dataset::open(&data)?;
    let base = TrainConfig { total_steps: steps, halve_every: steps, patch_size: 32, total_iterations: 4, validate_every: 0, adam: AdamHyper { lr: 1e-3, ..Default::default() }, ..Default::default() };

    let report = ss_vs_mt(&base, &dataset, &[0, 1], 8)?;
    print!("{}", report.to_markdown());
    write_report(&out, "ss_vs_mt", &report.to_markdown(), &report)?;

    let sweep = tl_sweep(&base, &dataset, &[3, 5, 7], &[0])?;
    print!("\n{}", sweep.to_markdown());
    write_report(&out, "tl_sweep", &sweep.to_markdown(), &sweep)
}
