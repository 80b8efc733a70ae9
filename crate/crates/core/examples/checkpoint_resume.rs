//! Trains for a few steps, saves a checkpoint, resumes from it and checks
//! the result matches an uninterrupted run bit for bit.

use mtrnn::dataset::{synthesize_dataset, Dataset, SceneConfig, SynthConfig};
use mtrnn::model::{encode_checkpoint, save_checkpoint};
use mtrnn::train::{TrainConfig, TrainLog, Trainer};

fn main() -> mtrnn::Result<()> {
    let dir = std::env::temp_dir().join("mtrnn_resume_demo");
    let scene = SceneConfig { height: 32, width: 32, ..Default::default() };
    synthesize_dataset(dir.join("data"), &SynthConfig { scene, train: 6, val: 1, test: 1, ..Default::default() })?;
    let dataset = Dataset::open(dir.join("data"))?;
    let config = TrainConfig { total_steps: 6, patch_size: 16, validate_every: 0, ..Default::default() };

    let mut straight = Trainer::new(config.clone())?;
    straight.run(&dataset, &mut TrainLog::new(), None)?;

    let mut first = Trainer::new(TrainConfig { total_steps: 3, ..config.clone() })?;
    first.run(&dataset, &mut TrainLog::new(), None)?;
    let path = dir.join("half.ckpt");
    save_checkpoint(&first.checkpoint()?, &path)?;
    let mut resumed = Trainer::resume(&path)?;
    resumed.set_total_steps(config.total_steps);
    resumed.run(&dataset, &mut TrainLog::new(), None)?;

    let same = straight.params() == resumed.params() && straight.adam() == resumed.adam();
    println!("checkpoint: {} ({} bytes)", path.display(), encode_checkpoint(&first.checkpoint()?)?.len());
    println!("resumed run matches uninterrupted run: {same}");
    Ok(())
}
