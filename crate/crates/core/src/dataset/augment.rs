use std::collections::BTreeMap;

use rand::Rng;

use super::Image;
use crate::error::{Error, Result};

/// One random crop / flip / rotation, applied identically to every image of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentDraw {
    pub top: usize,
    pub left: usize,
    pub patch: usize,
    pub hflip: bool,
    /// Counter-clockwise quarter turns, 0..4.
    pub quarter_turns: u8,
}

impl AugmentDraw {
    pub fn sample(rng: &mut impl Rng, height: usize, width: usize, patch: usize) -> Result<Self> {
        if patch == 0 || patch > height || patch > width {
            return Err(Error::Argument(format!("patch {patch} does not fit a {height}x{width} image")));
        }
        Ok(Self {
            top: rng.gen_range(0..=height - patch),
            left: rng.gen_range(0..=width - patch),
            patch,
            hflip: rng.gen_bool(0.5),
            quarter_turns: rng.gen_range(0..4),
        })
    }

    /// Full-image crop without flip or rotation; requires a square image.
    pub fn identity(size: usize) -> Self {
        Self { top: 0, left: 0, patch: size, hflip: false, quarter_turns: 0 }
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        let (c, h, w) = img.dims();
        let p = self.patch;
        if self.top + p > h || self.left + p > w {
            return Err(Error::Argument(format!(
                "crop {p}x{p} at ({}, {}) exceeds {h}x{w}",
                self.top, self.left
            )));
        }
        Ok(Image::from_fn(c, p, p, |ch, y, x| {
            // map output coordinates back through rotation then flip
            let (mut sy, mut sx) = (y, x);
            for _ in 0..self.quarter_turns {
                (sy, sx) = (sx, p - 1 - sy);
            }
            if self.hflip {
                sx = p - 1 - sx;
            }
            img.get(ch, self.top + sy, self.left + sx)
        }))
    }
}

/// Draws one augmentation and applies it to every level of `sample`.
pub fn augment(
    sample: &BTreeMap<u32, Image>,
    patch: usize,
    rng: &mut impl Rng,
) -> Result<(BTreeMap<u32, Image>, AugmentDraw)> {
    let first = sample.values().next().ok_or_else(|| Error::Argument("empty sample".into()))?;
    let draw = AugmentDraw::sample(rng, first.height(), first.width(), patch)?;
    let out = sample.iter().map(|(&k, img)| Ok((k, draw.apply(img)?))).collect::<Result<_>>()?;
    Ok((out, draw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp() -> Image {
        Image::from_fn(2, 5, 5, |c, y, x| (c * 25 + y * 5 + x) as f32)
    }

    #[test]
    fn identity_draw_is_noop() {
        assert_eq!(AugmentDraw::identity(5).apply(&ramp()).unwrap(), ramp());
    }

    #[test]
    fn flip_twice_and_four_turns_restore() {
        let flip = AugmentDraw { hflip: true, ..AugmentDraw::identity(5) };
        assert_eq!(flip.apply(&flip.apply(&ramp()).unwrap()).unwrap(), ramp());
        let turn = AugmentDraw { quarter_turns: 1, ..AugmentDraw::identity(5) };
        let mut img = ramp();
        for _ in 0..4 {
            img = turn.apply(&img).unwrap();
        }
        assert_eq!(img, ramp());
        assert_ne!(turn.apply(&ramp()).unwrap(), ramp());
    }

    #[test]
    fn patch_too_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(AugmentDraw::sample(&mut rng, 4, 8, 5).is_err());
    }
}
