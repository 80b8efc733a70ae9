use serde::{Deserialize, Serialize};

use crate::dataset::MAX_TL;
use crate::error::{Error, Result};

/// Longest chain before iterations would wrap around.
pub const MAX_ITERATIONS: usize = 7;
pub const FLOOR_TLS: [u32; 3] = [1, 3, 5];

/// Targets of successive recurrent iterations for one input level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalChain {
    pub start_tl: u32,
    pub targets: Vec<u32>,
}

impl TemporalChain {
    pub fn total_iterations(&self) -> usize {
        self.targets.len()
    }
}

fn check_floor(floor: u32) -> Result<()> {
    if !FLOOR_TLS.contains(&floor) {
        return Err(Error::Config(format!("target floor must be one of {FLOOR_TLS:?}, got {floor}")));
    }
    Ok(())
}

/// `targets[i] = max(start - step * (i + 1), floor)` for `i < total_iterations`.
pub fn make_chain_with_step(start_tl: u32, total_iterations: usize, floor: u32, step: u32) -> Result<TemporalChain> {
    if start_tl % 2 == 0 || !(7..=MAX_TL).contains(&start_tl) {
        return Err(Error::Argument(format!("start TL must be odd in 7..={MAX_TL}, got {start_tl}")));
    }
    if !(1..=MAX_ITERATIONS).contains(&total_iterations) {
        return Err(Error::Config(format!(
            "total_iterations must be in 1..={MAX_ITERATIONS}, got {total_iterations}"
        )));
    }
    if step == 0 || step % 2 == 1 {
        return Err(Error::Config(format!("temporal step must be positive and even, got {step}")));
    }
    check_floor(floor)?;
    let targets = (1..=total_iterations as u32)
        .map(|i| start_tl.saturating_sub(step * i).max(floor))
        .collect();
    Ok(TemporalChain { start_tl, targets })
}

/// Chain stepping two levels per iteration.
pub fn make_chain(start_tl: u32, total_iterations: usize, floor: u32) -> Result<TemporalChain> {
    make_chain_with_step(start_tl, total_iterations, floor, 2)
}

/// One iteration straight from `start_tl` to the floor.
pub fn single_shot_chain(start_tl: u32, floor: u32) -> Result<TemporalChain> {
    check_floor(floor)?;
    if start_tl % 2 == 0 || start_tl > MAX_TL || start_tl <= floor {
        return Err(Error::Argument(format!("start TL {start_tl} must be odd, at most {MAX_TL}, above the floor {floor}")));
    }
    Ok(TemporalChain { start_tl, targets: vec![floor] })
}
