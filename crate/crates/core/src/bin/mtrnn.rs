use std::error::Error as StdError;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mtrnn::dataset::{
    build_ladder, ingest_frames, synthesize_dataset, write_dataset, Dataset, Image, SceneEntry, Split, SynthConfig,
};
use mtrnn::eval::{eval_dataset, progressive_deblur, EvalConfig, InferenceConfig};
use mtrnn::experiments::{ss_vs_mt, tl_sweep, write_report};
use mtrnn::model::{load_checkpoint, param_breakdown};
use mtrnn::train::{train, TrainConfig, TrainLog, TrainMode, Trainer, FINAL_CHECKPOINT, TRAIN_LOG};

type CliResult<T = ()> = Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "mtrnn", version, about = "Progressive deblurring with a multi-temporal recurrent network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mt,
    Ss,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    SsVsMt,
    TlSweep,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset, or package captured frame sequences.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// JSON synthesis config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Total scene count, split 5:1:2 into train/val/test.
        #[arg(long)]
        scenes: Option<usize>,
        /// Directory of frame-sequence directories (or a single one) to ingest instead.
        #[arg(long)]
        ingest: Option<PathBuf>,
        /// Native TL of ingested sequences; defaults to their frame count.
        #[arg(long)]
        native_tl: Option<u32>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Train a model on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Continue from a checkpoint written by `train`.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Deblur PNG images with a trained checkpoint.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        /// A PNG file or a directory of PNGs.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        iters: usize,
        /// Write every intermediate estimate, not just the last.
        #[arg(long)]
        emit_all: bool,
    },
    /// Score a checkpoint on one split of a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 8)]
        iters: usize,
        /// Evaluate from this TL instead of each scene's native one.
        #[arg(long)]
        input_tl: Option<u32>,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-iteration output PNGs.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run an ablation and write a markdown and JSON report.
    Ablate {
        #[arg(long, value_enum)]
        mode: AblationArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
        tls: Vec<u32>,
        #[arg(long, default_value_t = 8)]
        eval_iters: usize,
    },
    /// Print a checkpoint's config, metadata and per-layer parameter counts.
    InspectCheckpoint {
        #[arg(long)]
        ckpt: PathBuf,
    },
}

fn train_config(path: Option<&Path>, steps: Option<u64>, seed: Option<u64>, mode: Option<ModeArg>) -> CliResult<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_json_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = steps {
        cfg.total_steps = s;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    match mode {
        Some(ModeArg::Mt) => cfg.mode = TrainMode::MultiTemporal,
        Some(ModeArg::Ss) => cfg.mode = TrainMode::SingleShot,
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    scenes: Option<usize>,
    ingest: Option<&Path>,
    native_tl: Option<u32>,
    split: Split,
) -> CliResult {
    if let Some(src) = ingest {
        let mut dirs: Vec<PathBuf> = fs::read_dir(src)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        dirs.sort();
        if dirs.is_empty() {
            dirs.push(src.to_path_buf());
        }
        let mut ladders = Vec::new();
        for dir in &dirs {
            let seq = ingest_frames(dir)?;
            let native = native_tl.unwrap_or(seq.frames.len() as u32);
            let id = dir.file_name().map_or("scene".into(), |n| n.to_string_lossy().into_owned());
            ladders.push(build_ladder(id, &seq, native)?.quantized());
        }
        let entries: Vec<SceneEntry<'_>> = ladders.iter().map(|ladder| SceneEntry { ladder, split, seed: 0 }).collect();
        write_dataset(out, seed.unwrap_or(0), &entries)?;
        println!("ingested {} sequences into {}", ladders.len(), out.display());
        return Ok(());
    }
    let mut cfg: SynthConfig = match config {
        Some(p) => serde_json::from_slice(&fs::read(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.global_seed = s;
    }
    if let Some(n) = scenes {
        cfg.val = n / 8;
        cfg.test = n / 4;
        cfg.train = n - cfg.val - cfg.test;
    }
    let manifest = synthesize_dataset(out, &cfg)?;
    println!("wrote {} scenes to {}: {:?}", manifest.records.len(), out.display(), manifest.split_counts());
    Ok(())
}

fn run_train(data: &Path, out: &Path, cfg: TrainConfig, resume: Option<&Path>) -> CliResult {
    let dataset = Dataset::open(data)?;
    let Some(ckpt) = resume else {
        let (_, log) = train(&cfg, &dataset, Some(out))?;
        report_log(&log, out);
        return Ok(());
    };
    let mut trainer = Trainer::resume(ckpt)?;
    trainer.set_total_steps(cfg.total_steps.max(trainer.step()));
    fs::create_dir_all(out)?;
    let mut log = TrainLog::with_file(out.join(TRAIN_LOG))?;
    trainer.run(&dataset, &mut log, Some(out))?;
    mtrnn::model::save_checkpoint(&trainer.checkpoint()?, out.join(FINAL_CHECKPOINT))?;
    report_log(&log, out);
    Ok(())
}

fn report_log(log: &TrainLog, out: &Path) {
    if let Some(last) = log.steps().last() {
        println!("step {} loss {:.5}", last.step, last.loss);
    }
    println!("checkpoint: {}", out.join(FINAL_CHECKPOINT).display());
}

fn infer(ckpt: &Path, input: &Path, out: &Path, iters: usize, emit_all: bool) -> CliResult {
    let params = load_checkpoint(ckpt)?.params;
    let mut files: Vec<PathBuf> = if input.is_dir() {
        fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect()
    } else {
        vec![input.to_path_buf()]
    };
    files.sort();
    if files.is_empty() {
        return Err(format!("no PNG files in {}", input.display()).into());
    }
    fs::create_dir_all(out)?;
    let config = InferenceConfig { iterations: iters, clamp: true, emit_all };
    for file in &files {
        let img = Image::load_png(file)?;
        let outputs = progressive_deblur(&params, &img, &config)?;
        let stem = file.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
        if emit_all {
            for (i, o) in outputs.iter().enumerate() {
                o.save_png16(out.join(format!("{stem}_iter{}.png", i + 1)))?;
            }
        } else if let Some(last) = outputs.last() {
            last.save_png16(out.join(format!("{stem}.png")))?;
        }
        println!("{} -> {} iterations", file.display(), outputs.len());
    }
    Ok(())
}

fn inspect(ckpt: &Path) -> CliResult {
    let ck = load_checkpoint(ckpt)?;
    let cfg = ck.params.config();
    println!("step: {}", ck.meta.step);
    println!("seed: {}", ck.meta.seed);
    println!("config: {}", serde_json::to_string(cfg)?);
    println!("resblocks_per_stage: {}", cfg.resblocks_per_stage);
    println!("optimizer state: {}", if ck.optimizer.is_some() { "present" } else { "absent" });
    for (name, count) in param_breakdown(cfg) {
        println!("  {name:<24} {count:>10}");
    }
    println!("param_count: {}", ck.params.param_count());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth { out, config, seed, scenes, ingest, native_tl, split } => {
            synth(&out, config.as_deref(), seed, scenes, ingest.as_deref(), native_tl, split.into())
        }
        Command::Train { data, out, config, steps, seed, mode, resume } => {
            run_train(&data, &out, train_config(config.as_deref(), steps, seed, mode)?, resume.as_deref())
        }
        Command::Infer { ckpt, input, out, iters, emit_all } => infer(&ckpt, &input, &out, iters, emit_all),
        Command::Eval { ckpt, data, split, iters, input_tl, out, emit } => {
            let params = load_checkpoint(&ckpt)?.params;
            let dataset = Dataset::open(&data)?;
            let config = EvalConfig { iterations: iters, input_tl, ..Default::default() };
            let report = eval_dataset(&params, &dataset.ladders(split.into()), &config, emit.as_deref())?;
            match out {
                Some(path) => {
                    report.write_json(&path)?;
                    println!("report: {}", path.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(())
        }
        Command::Ablate { mode, data, out, config, steps, seeds, tls, eval_iters } => {
            let base = train_config(config.as_deref(), steps, None, None)?;
            let dataset = Dataset::open(&data)?;
            match mode {
                AblationArg::SsVsMt => {
                    let report = ss_vs_mt(&base, &dataset, &seeds, eval_iters)?;
                    let md = report.to_markdown();
                    write_report(&out, "ss_vs_mt", &md, &report)?;
                    print!("{md}");
                }
                AblationArg::TlSweep => {
                    let report = tl_sweep(&base, &dataset, &tls, &seeds)?;
                    let md = report.to_markdown();
                    write_report(&out, "tl_sweep", &md, &report)?;
                    print!("{md}");
                }
            }
            Ok(())
        }
        Command::InspectCheckpoint { ckpt } => inspect(&ckpt),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
