//! Per-layer parameter counts for the desk and full-width configurations.

use mtrnn::model::{init_model, param_breakdown, ModelConfig};

fn main() -> mtrnn::Result<()> {
    for (label, config) in [("desk", ModelConfig::desk()), ("full", ModelConfig::full())] {
        println!("{label}: base {} channels, {} resblocks per stage", config.width(), config.resblocks_per_stage);
        for (name, count) in param_breakdown(&config) {
            println!("  {name:<22} {count:>9}");
        }
        let total = init_model(&config, 0)?.param_count();
        println!("  total                  {total:>9} ({:.3}M)\n", total as f64 / 1e6);
    }
    let no_rec = ModelConfig { recurrent_features: false, ..ModelConfig::full() };
    println!("full without recurrent inputs: {}", init_model(&no_rec, 0)?.param_count());
    Ok(())
}
