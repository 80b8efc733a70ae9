use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FrameSequence, Image};
use crate::error::{Error, Result};

/// Largest temporal level modeled.
pub const MAX_TL: u32 = 13;

/// Native levels an observed blurred image may have.
pub const NATIVE_TLS: [u32; 4] = [7, 9, 11, 13];

/// How frames are combined before averaging. Only linear averaging of the
/// stored values is implemented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    #[default]
    None,
}

/// Mean of the `tl` frames centered on the sequence center.
pub fn average_frames(frames: &[Image], tl: u32) -> Result<Image> {
    let tl = tl as usize;
    if tl % 2 == 0 {
        return Err(Error::Argument(format!("temporal level must be odd, got {tl}")));
    }
    if frames.len() % 2 == 0 || tl > frames.len() {
        return Err(Error::Argument(format!(
            "a {tl}-frame window does not fit centered in {} frames",
            frames.len()
        )));
    }
    let center = frames.len() / 2;
    let window = &frames[center - tl / 2..=center + tl / 2];
    if tl == 1 {
        return Ok(window[0].clone());
    }
    let (c, h, w) = window[0].dims();
    if let Some(bad) = window.iter().find(|f| f.dims() != (c, h, w)) {
        return Err(Error::dim(format!("frame {:?} differs from {:?}", bad.dims(), (c, h, w))));
    }
    let mut acc = vec![0f64; c * h * w];
    for f in window {
        for (a, &v) in acc.iter_mut().zip(f.data()) {
            *a += v as f64;
        }
    }
    let n = tl as f64;
    Image::new(c, h, w, acc.into_iter().map(|a| (a / n) as f32).collect())
}

/// Blurred renditions of one scene at every odd level up to `native_tl`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalLadder {
    pub scene_id: String,
    pub native_tl: u32,
    pub images: BTreeMap<u32, Image>,
}

impl TemporalLadder {
    pub fn get(&self, tl: u32) -> Result<&Image> {
        self.images.get(&tl).ok_or_else(|| Error::MissingTl { scene: self.scene_id.clone(), tl })
    }

    /// The observed blurred input.
    pub fn input(&self) -> &Image {
        &self.images[&self.native_tl]
    }

    pub fn sharp(&self) -> &Image {
        &self.images[&1]
    }

    pub fn quantized(&self) -> Self {
        Self { images: self.images.iter().map(|(&k, v)| (k, v.quantized())).collect(), ..self.clone() }
    }
}

/// Averages `seq` at TL 1, 3, ..., `native_tl`.
pub fn build_ladder(scene_id: impl Into<String>, seq: &FrameSequence, native_tl: u32) -> Result<TemporalLadder> {
    if !NATIVE_TLS.contains(&native_tl) {
        return Err(Error::Argument(format!("native TL must be one of {NATIVE_TLS:?}, got {native_tl}")));
    }
    if seq.frames.len() < native_tl as usize {
        return Err(Error::InsufficientFrames { needed: native_tl as usize, available: seq.frames.len() });
    }
    let images = (1..=native_tl)
        .step_by(2)
        .map(|tl| Ok((tl, average_frames(&seq.frames, tl)?)))
        .collect::<Result<_>>()?;
    Ok(TemporalLadder { scene_id: scene_id.into(), native_tl, images })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frames_average_exactly() {
        let frames: Vec<Image> = [0.2f32, 0.4, 0.6].iter().map(|&v| Image::filled(3, 4, 4, v)).collect();
        let avg = average_frames(&frames, 3).unwrap();
        assert!(avg.data().iter().all(|&v| (v - 0.4).abs() < 1e-7));
        assert_eq!(average_frames(&frames, 1).unwrap(), frames[1]);
        let same = vec![Image::filled(3, 2, 2, 0.3); 5];
        assert_eq!(average_frames(&same, 5).unwrap(), same[0]);
    }

    #[test]
    fn window_errors() {
        let frames = vec![Image::filled(1, 2, 2, 0.0); 5];
        assert!(matches!(average_frames(&frames, 4), Err(Error::Argument(_))));
        assert!(matches!(average_frames(&frames, 7), Err(Error::Argument(_))));
    }

    #[test]
    fn ladder_keys() {
        let seq = FrameSequence::new(vec![Image::filled(3, 4, 4, 0.5); 13], 240, 0).unwrap();
        let l7 = build_ladder("s", &seq, 7).unwrap();
        assert_eq!(l7.images.keys().copied().collect::<Vec<_>>(), vec![1, 3, 5, 7]);
        let l13 = build_ladder("s", &seq, 13).unwrap();
        assert_eq!(l13.images.keys().copied().collect::<Vec<_>>(), vec![1, 3, 5, 7, 9, 11, 13]);
        let short = FrameSequence::new(vec![Image::filled(3, 4, 4, 0.5); 9], 240, 0).unwrap();
        assert!(matches!(build_ladder("s", &short, 11), Err(Error::InsufficientFrames { needed: 11, available: 9 })));
        assert!(matches!(l7.get(9), Err(Error::MissingTl { tl: 9, .. })));
    }
}
