//! Desk-scale ablations: multi-temporal vs single-shot training, and the
//! per-level difficulty sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{eval_dataset, Db, EvalConfig, EvalReport};
use crate::train::{train, TrainConfig, TrainMode};

/// Held-out result of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    /// Mean test PSNR at the iteration count the run was trained for.
    pub psnr: f64,
    /// Mean test PSNR per inference iteration.
    pub curve: Vec<Db>,
    pub input_psnr: f64,
    pub train_seconds: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn run(config: &TrainConfig, dataset: &Dataset, eval: &EvalConfig, scored_iteration: usize) -> Result<(RunResult, EvalReport)> {
    let start = std::time::Instant::now();
    let (checkpoint, _) = train(config, dataset, None)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let test = dataset.ladders(Split::Test);
    if test.is_empty() {
        return Err(Error::Argument("ablation needs a non-empty test split".into()));
    }
    let report = eval_dataset(&checkpoint.params, &test, eval, None)?;
    let psnr = report.psnr_at(scored_iteration).expect("scored iteration evaluated");
    let result = RunResult {
        seed: config.seed,
        psnr,
        curve: report.aggregate.psnr.clone(),
        input_psnr: report.aggregate.input_psnr.map_or(f64::NAN, |d| d.0),
        train_seconds,
    };
    Ok((result, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsVsMtReport {
    pub mt_iterations: usize,
    pub eval_iterations: usize,
    pub total_steps: u64,
    pub mt: Vec<RunResult>,
    pub ss: Vec<RunResult>,
    pub median_mt: f64,
    pub median_ss: f64,
    /// `median_mt - median_ss` in dB.
    pub difference: f64,
    /// Median over seeds of the MT curve, per inference iteration.
    pub mt_curve: Vec<f64>,
}

/// Trains `base` once per seed in multi-temporal mode and once in single-shot
/// mode with the same step budget, then scores both on the test split.
pub fn ss_vs_mt(base: &TrainConfig, dataset: &Dataset, seeds: &[u64], eval_iterations: usize) -> Result<SsVsMtReport> {
    if seeds.is_empty() {
        return Err(Error::Argument("no seeds given".into()));
    }
    let t = base.total_iterations;
    let eval = EvalConfig { iterations: eval_iterations.max(t), ..Default::default() };
    let mut mt = Vec::new();
    let mut ss = Vec::new();
    for &seed in seeds {
        let mt_cfg = TrainConfig { mode: TrainMode::MultiTemporal, fixed_input_tl: None, seed, ..base.clone() };
        mt.push(run(&mt_cfg, dataset, &eval, t)?.0);
        let ss_cfg = TrainConfig { mode: TrainMode::SingleShot, fixed_input_tl: None, seed, ..base.clone() };
        ss.push(run(&ss_cfg, dataset, &eval, 1)?.0);
    }
    let median_mt = median(&mt.iter().map(|r| r.psnr).collect::<Vec<_>>());
    let median_ss = median(&ss.iter().map(|r| r.psnr).collect::<Vec<_>>());
    let mt_curve = (0..eval.iterations)
        .map(|i| median(&mt.iter().map(|r| r.curve[i].0).collect::<Vec<_>>()))
        .collect();
    Ok(SsVsMtReport {
        mt_iterations: t,
        eval_iterations: eval.iterations,
        total_steps: base.total_steps,
        mt,
        ss,
        median_mt,
        median_ss,
        difference: median_mt - median_ss,
        mt_curve,
    })
}

impl SsVsMtReport {
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Multi-temporal vs single-shot\n");
        let _ = writeln!(md, "{} steps per run, MT trained with {} iterations.\n", self.total_steps, self.mt_iterations);
        let _ = writeln!(md, "| seed | input PSNR | MT PSNR | SS PSNR |");
        let _ = writeln!(md, "|---|---|---|---|");
        for (m, s) in self.mt.iter().zip(&self.ss) {
            let _ = writeln!(md, "| {} | {:.3} | {:.3} | {:.3} |", m.seed, m.input_psnr, m.psnr, s.psnr);
        }
        let _ = writeln!(md, "\nMedian MT {:.3} dB, median SS {:.3} dB, difference {:+.3} dB.\n", self.median_mt, self.median_ss, self.difference);
        let _ = writeln!(md, "## MT PSNR per inference iteration (median over seeds)\n");
        let _ = writeln!(md, "| iteration | PSNR |");
        let _ = writeln!(md, "|---|---|");
        for (i, p) in self.mt_curve.iter().enumerate() {
            let _ = writeln!(md, "| {} | {:.3} |", i + 1, p);
        }
        md
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlRow {
    pub tl: u32,
    pub runs: Vec<RunResult>,
    pub median: f64,
    pub median_input: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlSweepReport {
    pub total_steps: u64,
    pub rows: Vec<TlRow>,
    /// Median PSNR strictly decreases as the input level grows.
    pub strictly_decreasing: bool,
}

/// Single-shot training from each fixed input level to TL 1, per seed.
pub fn tl_sweep(base: &TrainConfig, dataset: &Dataset, tls: &[u32], seeds: &[u64]) -> Result<TlSweepReport> {
    if seeds.is_empty() || tls.is_empty() {
        return Err(Error::Argument("tl_sweep needs levels and seeds".into()));
    }
    let mut rows = Vec::new();
    for &tl in tls {
        let eval = EvalConfig { iterations: 1, input_tl: Some(tl), ..Default::default() };
        let mut runs = Vec::new();
        for &seed in seeds {
            let cfg = TrainConfig { mode: TrainMode::SingleShot, fixed_input_tl: Some(tl), seed, ..base.clone() };
            runs.push(run(&cfg, dataset, &eval, 1)?.0);
        }
        let median_psnr = median(&runs.iter().map(|r| r.psnr).collect::<Vec<_>>());
        let median_input = median(&runs.iter().map(|r| r.input_psnr).collect::<Vec<_>>());
        rows.push(TlRow { tl, runs, median: median_psnr, median_input });
    }
    rows.sort_by_key(|r| r.tl);
    let strictly_decreasing = rows.windows(2).all(|w| w[1].median < w[0].median);
    Ok(TlSweepReport { total_steps: base.total_steps, rows, strictly_decreasing })
}

impl TlSweepReport {
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Difficulty per temporal level\n");
        let _ = writeln!(md, "Single-shot runs of {} steps each, input at a fixed TL, target TL 1.\n", self.total_steps);
        let _ = writeln!(md, "| TL | median input PSNR | median output PSNR | per-seed output PSNR |");
        let _ = writeln!(md, "|---|---|---|---|");
        for r in &self.rows {
            let seeds: Vec<String> = r.runs.iter().map(|x| format!("{:.3}", x.psnr)).collect();
            let _ = writeln!(md, "| {} | {:.3} | {:.3} | {} |", r.tl, r.median_input, r.median, seeds.join(", "));
        }
        let _ = writeln!(md, "\nStrictly decreasing in TL: {}", self.strictly_decreasing);
        md
    }
}

/// Writes `<stem>.md` and `<stem>.json` into `dir`.
pub fn write_report<R: Serialize>(dir: impl AsRef<Path>, stem: &str, markdown: &str, report: &R) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let md = dir.join(format!("{stem}.md"));
    fs::write(&md, markdown).map_err(|e| Error::io(&md, e))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_vec_pretty(report)?).map_err(|e| Error::io(&json, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
