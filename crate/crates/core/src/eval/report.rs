use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{image_psnr, progressive_deblur_batch, ssim, Db};
use crate::dataset::{Image, TemporalLadder};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Inference iterations evaluated, 1..=iterations.
    pub iterations: usize,
    /// Evaluate from this level instead of each scene's native level.
    pub input_tl: Option<u32>,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iterations: 8, input_tl: None, batch_size: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub param_count: usize,
    pub iterations: usize,
    pub scenes: usize,
    pub input_tl: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub scene_id: String,
    pub input_tl: u32,
    pub input_psnr: Db,
    pub input_ssim: f64,
    /// Indexed by iteration - 1.
    pub psnr: Vec<Db>,
    pub ssim: Vec<f64>,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlEval {
    pub tl: u32,
    pub count: usize,
    pub input_psnr: Db,
    pub input_ssim: f64,
    pub psnr: Vec<Db>,
    pub ssim: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationEval {
    pub tl: u32,
    pub iter: usize,
    pub psnr: Db,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub input_psnr: Option<Db>,
    pub input_ssim: Option<f64>,
    pub psnr: Vec<Db>,
    pub ssim: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: EvalMeta,
    pub per_image: Vec<ImageEval>,
    pub per_tl: Vec<TlEval>,
    pub per_iteration: Vec<IterationEval>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    /// Mean PSNR over all images after `iter` iterations (1-based).
    pub fn psnr_at(&self, iter: usize) -> Option<f64> {
        self.aggregate.psnr.get(iter.checked_sub(1)?).map(|d| d.0)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Scores every ladder at iterations `1..=config.iterations` against its TL 1
/// image. Per-iteration PNGs go to `emit_dir/<scene>/iter_<i>.png` when given.
pub fn eval_dataset(
    params: &ModelParams<f32>,
    ladders: &[&TemporalLadder],
    config: &EvalConfig,
    emit_dir: Option<&Path>,
) -> Result<EvalReport> {
    if config.iterations == 0 || config.batch_size == 0 {
        return Err(Error::Config("iterations and batch_size must be positive".into()));
    }
    let t = config.iterations;
    let mut inputs: Vec<(&TemporalLadder, u32, &Image)> = Vec::with_capacity(ladders.len());
    for ladder in ladders {
        let tl = config.input_tl.unwrap_or(ladder.native_tl);
        inputs.push((ladder, tl, ladder.get(tl)?));
    }

    let mut per_image: Vec<Option<ImageEval>> = vec![None; inputs.len()];
    let mut groups: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, (_, _, img)) in inputs.iter().enumerate() {
        groups.entry(img.dims()).or_default().push(i);
    }
    for indices in groups.values() {
        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<&Image> = chunk.iter().map(|&i| inputs[i].2).collect();
            let start = Instant::now();
            let outputs = progressive_deblur_batch(params, &batch, t, true)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3 / chunk.len() as f64;
            for (k, &i) in chunk.iter().enumerate() {
                let (ladder, tl, input) = inputs[i];
                let sharp = ladder.get(1)?;
                let mut psnr = Vec::with_capacity(t);
                let mut ss = Vec::with_capacity(t);
                for (it, estimates) in outputs.iter().enumerate() {
                    let est = &estimates[k];
                    psnr.push(Db(image_psnr(est, sharp)?));
                    ss.push(ssim(&est.quantized(), &sharp.quantized())?);
                    if let Some(dir) = emit_dir {
                        let scene_dir = dir.join(&ladder.scene_id);
                        fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
                        est.save_png16(scene_dir.join(format!("iter_{}.png", it + 1)))?;
                    }
                }
                per_image[i] = Some(ImageEval {
                    scene_id: ladder.scene_id.clone(),
                    input_tl: tl,
                    input_psnr: Db(image_psnr(input, sharp)?),
                    input_ssim: ssim(&input.quantized(), &sharp.quantized())?,
                    psnr,
                    ssim: ss,
                    runtime_ms,
                });
            }
        }
    }
    let per_image: Vec<ImageEval> = per_image.into_iter().map(|r| r.expect("every image evaluated")).collect();

    let summarize = |rows: &[&ImageEval]| -> (f64, f64, Vec<Db>, Vec<f64>) {
        (
            mean(rows.iter().map(|r| r.input_psnr.0)),
            mean(rows.iter().map(|r| r.input_ssim)),
            (0..t).map(|i| Db(mean(rows.iter().map(|r| r.psnr[i].0)))).collect(),
            (0..t).map(|i| mean(rows.iter().map(|r| r.ssim[i]))).collect(),
        )
    };

    let mut by_tl: BTreeMap<u32, Vec<&ImageEval>> = BTreeMap::new();
    for r in &per_image {
        by_tl.entry(r.input_tl).or_default().push(r);
    }
    let mut per_tl = Vec::new();
    let mut per_iteration = Vec::new();
    for (&tl, rows) in &by_tl {
        let (input_psnr, input_ssim, psnr, ssim) = summarize(rows);
        for i in 0..t {
            per_iteration.push(IterationEval { tl, iter: i + 1, psnr: psnr[i], ssim: ssim[i] });
        }
        per_tl.push(TlEval { tl, count: rows.len(), input_psnr: Db(input_psnr), input_ssim, psnr, ssim });
    }

    let aggregate = if per_image.is_empty() {
        Aggregate::default()
    } else {
        let rows: Vec<&ImageEval> = per_image.iter().collect();
        let (input_psnr, input_ssim, psnr, ssim) = summarize(&rows);
        Aggregate { count: rows.len(), input_psnr: Some(Db(input_psnr)), input_ssim: Some(input_ssim), psnr, ssim }
    };

    Ok(EvalReport {
        meta: EvalMeta { param_count: params.param_count(), iterations: t, scenes: per_image.len(), input_tl: config.input_tl },
        per_image,
        per_tl,
        per_iteration,
        aggregate,
    })
}
