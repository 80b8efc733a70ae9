use serde::{Deserialize, Serialize};

use crate::dataset::Image;
use crate::error::{Error, Result};
use crate::model::{forward, init_recurrent_state, ModelParams};
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub iterations: usize,
    pub clamp: bool,
    pub emit_all: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { iterations: 6, clamp: true, emit_all: false }
    }
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n { m } else { period - m }
}

fn pad_to_multiple(img: &Image, m: usize) -> Image {
    let (c, h, w) = img.dims();
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    if (ph, pw) == (h, w) {
        return img.clone();
    }
    Image::from_fn(c, ph, pw, |ch, y, x| img.get(ch, reflect(y, h), reflect(x, w)))
}

fn crop(img: &Image, h: usize, w: usize) -> Image {
    if (img.height(), img.width()) == (h, w) {
        return img.clone();
    }
    Image::from_fn(img.channels(), h, w, |c, y, x| img.get(c, y, x))
}

/// Runs `iterations` recurrent steps on a batch of same-shaped images.
///
/// Returns `out[i][n]`, the estimate for image `n` after iteration `i + 1`.
/// Unclamped estimates are fed back; only the returned copies are clamped.
pub fn progressive_deblur_batch(
    params: &ModelParams<f32>,
    inputs: &[&Image],
    iterations: usize,
    clamp: bool,
) -> Result<Vec<Vec<Image>>> {
    if iterations == 0 {
        return Err(Error::Argument("at least one iteration is required".into()));
    }
    let first = inputs.first().ok_or_else(|| Error::Argument("no input images".into()))?;
    let (_, h, w) = first.dims();
    let padded: Vec<Image> = inputs.iter().map(|i| pad_to_multiple(i, 4)).collect();
    let i0: Tensor<f32> = Image::stack(&padded.iter().collect::<Vec<_>>())?;
    let (n, _, ph, pw) = i0.dims4()?;
    let mut state = init_recurrent_state(params.config(), n, ph, pw)?;
    let mut prev = i0.clone();
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (est, next) = forward(params, &i0, &prev, &state)?;
        est.check_finite("deblurred estimate")?;
        let images = Image::unstack(&est)?
            .into_iter()
            .map(|img| {
                let img = crop(&img, h, w);
                if clamp { img.clamped() } else { img }
            })
            .collect();
        out.push(images);
        prev = est;
        state = next;
    }
    Ok(out)
}

/// `[I_hat^1, ..., I_hat^T]` for one blurred image, starting from zero state
/// with `I_hat^0 = I0`.
pub fn progressive_deblur(params: &ModelParams<f32>, i0: &Image, config: &InferenceConfig) -> Result<Vec<Image>> {
    Ok(progressive_deblur_batch(params, &[i0], config.iterations, config.clamp)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect())
}
