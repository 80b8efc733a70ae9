use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::{LogRecord, StepRecord, TrainLog, ValidationRecord};
use super::{lr_at, TemporalChain, TrainConfig};
use crate::dataset::{augment, Dataset, Image, Split, TemporalLadder};
use crate::error::{Error, Result};
use crate::eval::{image_psnr, progressive_deblur_batch, Db};
use crate::model::{
    forward_graph, init_model, init_recurrent_state, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta,
    ModelParams, RecurrentState,
};
use crate::numerics::{adam_step, ops, AdamState, Graph, Tensor};

/// Stacked inputs and per-iteration targets for one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainBatch {
    pub chain: TemporalChain,
    pub input: Tensor<f32>,
    pub targets: Vec<Tensor<f32>>,
}

impl TrainBatch {
    /// Every sample must hold the chain's start level and all its targets.
    pub fn from_samples(samples: &[&BTreeMap<u32, Image>], chain: TemporalChain) -> Result<Self> {
        let pick = |tl: u32| -> Result<Tensor<f32>> {
            let images = samples
                .iter()
                .map(|s| s.get(&tl).ok_or_else(|| Error::MissingTl { scene: "<batch>".into(), tl }))
                .collect::<Result<Vec<_>>>()?;
            Image::stack(&images)
        };
        let input = pick(chain.start_tl)?;
        let targets = chain.targets.iter().map(|&tl| pick(tl)).collect::<Result<_>>()?;
        Ok(Self { chain, input, targets })
    }

    /// Whole ladders, without augmentation.
    pub fn from_ladders(ladders: &[&TemporalLadder], chain: TemporalChain) -> Result<Self> {
        for l in ladders {
            for &tl in std::iter::once(&chain.start_tl).chain(&chain.targets) {
                l.get(tl)?;
            }
        }
        let maps: Vec<&BTreeMap<u32, Image>> = ladders.iter().map(|l| &l.images).collect();
        Self::from_samples(&maps, chain)
    }
}

struct IterationResult {
    loss: f64,
    grads: Vec<Tensor<f32>>,
    estimate: Tensor<f32>,
    state: RecurrentState<f32>,
}

/// One recurrent iteration in a fresh graph. `prev` and `state` enter as
/// constants, so nothing flows back into earlier iterations.
fn run_iteration(
    params: &ModelParams<f32>,
    input: &Tensor<f32>,
    prev: &Tensor<f32>,
    state: &RecurrentState<f32>,
    target: &Tensor<f32>,
) -> Result<IterationResult> {
    let mut graph = Graph::new();
    let bound = params.bind(&mut graph, true);
    let i0 = graph.constant(input.clone());
    let ip = graph.constant(prev.clone());
    let f1 = graph.constant(state.f1.clone());
    let f2 = graph.constant(state.f2.clone());
    let out = forward_graph(&mut graph, params.config(), &bound, i0, ip, f1, f2)?;
    let t = graph.constant(target.clone());
    let loss_var = graph.l1_loss(out.output, t)?;
    let loss = graph.value(loss_var).item()? as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss}")));
    }
    let grads = graph.backward(loss_var, 1.0)?.into_tensors();
    Ok(IterationResult {
        loss,
        grads,
        estimate: graph.value(out.output).clone(),
        state: RecurrentState { f1: graph.value(out.f1).clone(), f2: graph.value(out.f2).clone() },
    })
}

/// Per-iteration losses and parameter gradients for the first `iterations`
/// steps of `batch`'s chain, without updating anything.
pub fn chain_gradients(
    params: &ModelParams<f32>,
    batch: &TrainBatch,
    iterations: usize,
) -> Result<(Vec<f64>, Vec<Vec<Tensor<f32>>>)> {
    let (n, _, h, w) = batch.input.dims4()?;
    let mut state = init_recurrent_state(params.config(), n, h, w)?;
    let mut prev = batch.input.clone();
    let mut losses = Vec::new();
    let mut grads = Vec::new();
    for target in batch.targets.iter().take(iterations) {
        let r = run_iteration(params, &batch.input, &prev, &state, target)?;
        losses.push(r.loss);
        grads.push(r.grads);
        prev = r.estimate;
        state = r.state;
    }
    Ok((losses, grads))
}

/// Runs the whole chain and updates `params`; returns the per-iteration losses.
///
/// By default the iteration gradients are summed into a single Adam step;
/// with `step_per_iteration` Adam steps after each iteration instead.
pub fn train_step(
    params: &mut ModelParams<f32>,
    adam: &mut AdamState<f32>,
    batch: &TrainBatch,
    step_per_iteration: bool,
) -> Result<Vec<f64>> {
    if !step_per_iteration {
        let (losses, grads) = chain_gradients(params, batch, batch.targets.len())?;
        let mut total = grads.into_iter();
        let mut sum = total.next().ok_or_else(|| Error::Argument("empty chain".into()))?;
        for g in total {
            for (acc, t) in sum.iter_mut().zip(&g) {
                *acc = ops::add(acc, t)?;
            }
        }
        adam_step(params.parameters_mut(), &sum, adam)?;
        return Ok(losses);
    }
    let (n, _, h, w) = batch.input.dims4()?;
    let mut state = init_recurrent_state(params.config(), n, h, w)?;
    let mut prev = batch.input.clone();
    let mut losses = Vec::new();
    for target in &batch.targets {
        let r = run_iteration(params, &batch.input, &prev, &state, target)?;
        adam_step(params.parameters_mut(), &r.grads, adam)?;
        losses.push(r.loss);
        prev = r.estimate;
        state = r.state;
    }
    Ok(losses)
}

/// RNG stream determined only by `(seed, step, index)`.
pub fn keyed_rng(seed: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const CONFIG_KEY: &str = "train_config";

/// Owns parameters, optimizer state and the step counter of one run.
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams<f32>,
    adam: AdamState<f32>,
    step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = init_model(&config.model, config.seed)?;
        let adam = AdamState::new(params.parameters(), config.adam);
        Ok(Self { config, params, adam, step: 0 })
    }

    /// Continues a run saved by [`Trainer::checkpoint`].
    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        let raw = checkpoint
            .meta
            .extra
            .get(CONFIG_KEY)
            .ok_or_else(|| Error::Format("checkpoint carries no training config".into()))?;
        let config: TrainConfig = serde_json::from_value(raw.clone())?;
        config.validate()?;
        if &config.model != checkpoint.params.config() {
            return Err(Error::Config("checkpoint model differs from its training config".into()));
        }
        let adam = checkpoint
            .optimizer
            .ok_or_else(|| Error::Format("checkpoint carries no optimizer state".into()))?;
        Ok(Self { config, params: checkpoint.params, adam, step: checkpoint.meta.step })
    }

    pub fn resume(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(load_checkpoint(path)?)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Extends or shortens the run; everything else stays fixed.
    pub fn set_total_steps(&mut self, total_steps: u64) {
        self.config.total_steps = total_steps;
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    pub fn adam(&self) -> &AdamState<f32> {
        &self.adam
    }

    /// Completed optimizer steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            params: self.params.clone(),
            optimizer: Some(self.adam.clone()),
            meta: CheckpointMeta {
                step: self.step,
                seed: self.config.seed,
                extra: serde_json::json!({ CONFIG_KEY: serde_json::to_value(&self.config)? }),
            },
        })
    }

    /// Start level and augmented samples for the current step.
    pub fn draw_batch(&self, train: &[&TemporalLadder]) -> Result<TrainBatch> {
        let cfg = &self.config;
        let mut rng = keyed_rng(cfg.seed, self.step, u64::MAX);
        let start_tl = match cfg.fixed_input_tl {
            Some(tl) => tl,
            None => {
                let natives: Vec<u32> = train.iter().map(|l| l.native_tl).collect::<BTreeSet<_>>().into_iter().collect();
                if natives.is_empty() {
                    return Err(Error::Argument("training split is empty".into()));
                }
                natives[rng.gen_range(0..natives.len())]
            }
        };
        let chain = cfg.chain(start_tl)?;
        let needed: BTreeSet<u32> = std::iter::once(start_tl).chain(chain.targets.iter().copied()).collect();
        let pool: Vec<&TemporalLadder> = train
            .iter()
            .copied()
            .filter(|l| cfg.fixed_input_tl.is_some() || l.native_tl == start_tl)
            .filter(|l| needed.iter().all(|tl| l.images.contains_key(tl)))
            .collect();
        if pool.is_empty() {
            return Err(Error::Argument(format!("no training scene provides TLs {needed:?}")));
        }
        let mut samples = Vec::with_capacity(cfg.batch_size);
        for i in 0..cfg.batch_size {
            let ladder = pool[rng.gen_range(0..pool.len())];
            let subset: BTreeMap<u32, Image> = needed.iter().map(|tl| (*tl, ladder.images[tl].clone())).collect();
            let mut sample_rng = keyed_rng(cfg.seed, self.step, i as u64);
            samples.push(augment(&subset, cfg.patch_size, &mut sample_rng)?.0);
        }
        TrainBatch::from_samples(&samples.iter().collect::<Vec<_>>(), chain)
    }

    /// Draws a batch, updates the parameters and advances the step counter.
    pub fn train_one(&mut self, train: &[&TemporalLadder]) -> Result<StepRecord> {
        let start = Instant::now();
        let batch = self.draw_batch(train)?;
        let lr = lr_at(self.step, &self.config);
        self.adam.hyper.lr = lr;
        let iter_losses = train_step(&mut self.params, &mut self.adam, &batch, self.config.step_per_iteration)
            .map_err(|e| match e {
                Error::NonFinite(detail) => Error::Diverged { step: self.step, detail },
                other => other,
            })?;
        let record = StepRecord {
            step: self.step,
            loss: iter_losses.iter().sum(),
            lr,
            start_tl: batch.chain.start_tl,
            iter_losses,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        self.step += 1;
        Ok(record)
    }

    /// Mean PSNR and L1 against TL 1 per (native TL, inference iteration).
    pub fn validate(&self, val: &[&TemporalLadder]) -> Result<Vec<ValidationRecord>> {
        let iterations = self.config.val_iterations.max(1);
        let mut by_tl: BTreeMap<u32, Vec<&TemporalLadder>> = BTreeMap::new();
        for l in val {
            by_tl.entry(l.native_tl).or_default().push(l);
        }
        let mut out = Vec::new();
        for (tl, ladders) in by_tl {
            let inputs: Vec<&Image> = ladders.iter().map(|l| l.input()).collect();
            let mut psnr = vec![0.0; iterations];
            let mut l1 = vec![0.0; iterations];
            for (chunk_in, chunk_l) in inputs.chunks(8).zip(ladders.chunks(8)) {
                let estimates = progressive_deblur_batch(&self.params, chunk_in, iterations, true)?;
                for (it, images) in estimates.iter().enumerate() {
                    for (est, ladder) in images.iter().zip(chunk_l) {
                        let sharp = ladder.sharp();
                        psnr[it] += image_psnr(est, sharp)?;
                        l1[it] += ops::l1_loss(&est.to_tensor(), &sharp.to_tensor())? as f64;
                    }
                }
            }
            let n = ladders.len() as f64;
            for it in 0..iterations {
                out.push(ValidationRecord { step: self.step, tl, iter: it + 1, psnr: Db(psnr[it] / n), l1: l1[it] / n });
            }
        }
        Ok(out)
    }

    /// Trains until `total_steps`, validating and checkpointing on schedule.
    ///
    /// With `out_dir`, periodic checkpoints land in `out_dir/checkpoints/`.
    pub fn run(&mut self, dataset: &Dataset, log: &mut TrainLog, out_dir: Option<&Path>) -> Result<()> {
        let train = dataset.ladders(Split::Train);
        let val = dataset.ladders(Split::Val);
        let cfg = self.config.clone();
        let validate_now = |step: u64| cfg.validate_every > 0 && step % cfg.validate_every == 0 && !val.is_empty();
        if self.step == 0 && validate_now(0) {
            for r in self.validate(&val)? {
                log.push(LogRecord::Validation(r))?;
            }
        }
        while self.step < cfg.total_steps {
            let record = self.train_one(&train)?;
            log.push(LogRecord::Step(record))?;
            if validate_now(self.step) || (self.step == cfg.total_steps && cfg.validate_every > 0 && !val.is_empty()) {
                for r in self.validate(&val)? {
                    log.push(LogRecord::Validation(r))?;
                }
            }
            if let Some(dir) = out_dir {
                if cfg.checkpoint_every > 0 && self.step % cfg.checkpoint_every == 0 {
                    save_checkpoint(&self.checkpoint()?, dir.join("checkpoints").join(format!("step_{:06}.ckpt", self.step)))?;
                }
            }
        }
        Ok(())
    }
}

pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const TRAIN_LOG: &str = "train_log.ndjson";

/// Trains from scratch on `dataset`, writing the log and final
/// checkpoint to `out_dir` when given.
pub fn train(config: &TrainConfig, dataset: &Dataset, out_dir: Option<&Path>) -> Result<(Checkpoint, TrainLog)> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(TRAIN_LOG);
            if path.exists() {
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
            TrainLog::with_file(path)?
        }
        None => TrainLog::new(),
    };
    trainer.run(dataset, &mut log, out_dir)?;
    let checkpoint = trainer.checkpoint()?;
    if let Some(dir) = out_dir {
        save_checkpoint(&checkpoint, dir.join(FINAL_CHECKPOINT))?;
    }
    Ok((checkpoint, log))
}
