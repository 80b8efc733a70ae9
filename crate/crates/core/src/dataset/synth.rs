//! Procedural high-frame-rate scenes: a drifting textured background with
//! anti-aliased shapes translating and rotating over it.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};

/// Parameters of a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// Must be odd so a center frame exists.
    pub frames: usize,
    pub objects: usize,
    /// Scales every velocity. 0 gives a static scene.
    pub motion_scale: f64,
    /// Background velocity in px/frame as `[dx, dy]`; drawn at random when absent.
    pub camera_velocity: Option<[f64; 2]>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { height: 64, width: 64, frames: 13, objects: 3, motion_scale: 1.0, camera_velocity: None }
    }
}

/// Consecutive sharp frames of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Image>,
    /// Informational capture rate.
    pub frame_rate_tag: u32,
    pub seed: u64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>, frame_rate_tag: u32, seed: u64) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Config("a sequence needs at least one frame".into()))?;
        if frames.len() % 2 == 0 {
            return Err(Error::Config(format!("frame count must be odd, got {}", frames.len())));
        }
        if let Some(bad) = frames.iter().find(|f| f.dims() != first.dims()) {
            return Err(Error::dim(format!("frame {:?} differs from {:?}", bad.dims(), first.dims())));
        }
        Ok(Self { frames, frame_rate_tag, seed })
    }

    pub fn center(&self) -> &Image {
        &self.frames[self.frames.len() / 2]
    }
}

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: [f64; 3],
}

struct Checker {
    cell: f64,
    angle: f64,
    amp: [f64; 3],
}

#[derive(Clone, Copy)]
enum Shape {
    Disc { r: f64 },
    Box { a: f64, b: f64 },
    Ring { r: f64, t: f64 },
}

struct Object {
    shape: Shape,
    center: [f64; 2],
    velocity: [f64; 2],
    angle: f64,
    spin: f64,
    color: [f64; 3],
    stripe: f64,
}

struct Scene {
    base: [f64; 3],
    waves: Vec<Wave>,
    checker: Checker,
    camera: [f64; 2],
    objects: Vec<Object>,
}

fn color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

fn velocity(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 2] {
    let speed = rng.gen_range(0.5..2.0) * scale;
    let dir = rng.gen_range(0.0..2.0 * PI);
    [speed * dir.cos(), speed * dir.sin()]
}

impl Scene {
    fn sample(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..3)
            .map(|_| {
                let wavelength = rng.gen_range(6.0..24.0);
                let dir: f64 = rng.gen_range(0.0..PI);
                let k = 2.0 * PI / wavelength;
                Wave { kx: k * dir.cos(), ky: k * dir.sin(), phase: rng.gen_range(0.0..2.0 * PI), amp: color(rng, -0.07, 0.07) }
            })
            .collect();
        let checker = Checker { cell: rng.gen_range(5.0..12.0), angle: rng.gen_range(0.0..PI), amp: color(rng, -0.1, 0.1) };
        let camera = match config.camera_velocity {
            Some(v) => v,
            None => velocity(rng, config.motion_scale),
        };
        let (h, w) = (config.height as f64, config.width as f64);
        let objects = (0..config.objects)
            .map(|_| {
                let size = rng.gen_range(5.0..14.0);
                let shape = match rng.gen_range(0..3) {
                    0 => Shape::Disc { r: size },
                    1 => Shape::Box { a: size, b: size * rng.gen_range(0.4..1.0) },
                    _ => Shape::Ring { r: size, t: size * rng.gen_range(0.2..0.4) },
                };
                Object {
                    shape,
                    center: [rng.gen_range(0.15 * w..0.85 * w), rng.gen_range(0.15 * h..0.85 * h)],
                    velocity: velocity(rng, config.motion_scale),
                    angle: rng.gen_range(0.0..2.0 * PI),
                    spin: rng.gen_range(-0.08..0.08) * config.motion_scale,
                    color: color(rng, 0.05, 0.95),
                    stripe: rng.gen_range(3.0..8.0),
                }
            })
            .collect();
        Scene { base: color(rng, 0.35, 0.65), waves, checker, camera, objects }
    }

    fn background(&self, x: f64, y: f64, c: usize) -> f64 {
        let mut v = self.base[c];
        for wv in &self.waves {
            v += wv.amp[c] * (wv.kx * x + wv.ky * y + wv.phase).sin();
        }
        let ch = &self.checker;
        let (s, co) = ch.angle.sin_cos();
        let (u, w) = ((co * x + s * y) / ch.cell, (-s * x + co * y) / ch.cell);
        // soft-edged checker: product of two smoothed square waves
        let sq = |t: f64| ((PI * t).sin() * 3.0).tanh();
        v + ch.amp[c] * sq(u) * sq(w)
    }

    fn render(&self, config: &SceneConfig, t: f64) -> Image {
        let (h, w) = (config.height, config.width);
        let shift = [self.camera[0] * t, self.camera[1] * t];
        let background = Image::from_fn(3, h, w, |c, y, x| {
            self.background(x as f64 + 0.5 - shift[0], y as f64 + 0.5 - shift[1], c) as f32
        });
        let mut data = background.data().to_vec();
        for obj in &self.objects {
            let cx = obj.center[0] + obj.velocity[0] * t;
            let cy = obj.center[1] + obj.velocity[1] * t;
            let (s, co) = (obj.angle + obj.spin * t).sin_cos();
            for y in 0..h {
                for x in 0..w {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    let (px, py) = (co * dx + s * dy, -s * dx + co * dy);
                    let sdf = match obj.shape {
                        Shape::Disc { r } => (px * px + py * py).sqrt() - r,
                        Shape::Box { a, b } => (px.abs() - a).max(py.abs() - b),
                        Shape::Ring { r, t } => ((px * px + py * py).sqrt() - r).abs() - t,
                    };
                    let cover = (0.5 - sdf).clamp(0.0, 1.0);
                    if cover == 0.0 {
                        continue;
                    }
                    let shade = 0.85 + 0.15 * (2.0 * PI * px / obj.stripe).sin();
                    for c in 0..3 {
                        let i = (c * h + y) * w + x;
                        let fg = obj.color[c] * shade;
                        data[i] = (data[i] as f64 * (1.0 - cover) + fg * cover) as f32;
                    }
                }
            }
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Image::new(3, h, w, data).expect("rendered values are finite")
    }
}

/// Renders `config.frames` consecutive frames; the center frame is at time 0.
pub fn synth_sequence(config: &SceneConfig, seed: u64) -> Result<FrameSequence> {
    if config.frames == 0 || config.frames % 2 == 0 {
        return Err(Error::Config(format!("frame count must be odd, got {}", config.frames)));
    }
    if config.height == 0 || config.width == 0 {
        return Err(Error::Config("image extents must be positive".into()));
    }
    if !(config.motion_scale.is_finite() && config.motion_scale >= 0.0) {
        return Err(Error::Config(format!("motion_scale must be non-negative, got {}", config.motion_scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = Scene::sample(config, &mut rng);
    let half = (config.frames / 2) as f64;
    let frames = (0..config.frames).map(|i| scene.render(config, i as f64 - half)).collect();
    FrameSequence::new(frames, 240, seed)
}

/// Reads every PNG in `dir`, in file-name order, as one sequence.
pub fn ingest_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let frames = paths.iter().map(Image::load_png).collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_scene_has_identical_frames() {
        let cfg = SceneConfig { motion_scale: 0.0, camera_velocity: None, ..Default::default() };
        let seq = synth_sequence(&cfg, 4).unwrap();
        assert!(seq.frames.iter().all(|f| f == &seq.frames[0]));
    }

    #[test]
    fn moving_scene_changes_and_is_seeded() {
        let cfg = SceneConfig::default();
        let a = synth_sequence(&cfg, 11).unwrap();
        assert_eq!(a, synth_sequence(&cfg, 11).unwrap());
        assert_ne!(a, synth_sequence(&cfg, 12).unwrap());
        for pair in a.frames.windows(2) {
            let diff: f64 = pair[0].data().iter().zip(pair[1].data()).map(|(x, y)| (x - y).abs() as f64).sum();
            assert!(diff > 0.0);
        }
        assert!(a.frames.iter().all(|f| f.data().iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn even_frame_count_rejected() {
        let cfg = SceneConfig { frames: 12, ..Default::default() };
        assert!(matches!(synth_sequence(&cfg, 0), Err(Error::Config(_))));
    }
}
