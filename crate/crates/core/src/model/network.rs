//! Forward pass of the three-scale recurrent encoder-decoder.
//!
//! One iteration maps `(I0, I_prev, F1, F2)` to `(I_hat, F1', F2')`:
//!
//! ```text
//! x    = cat(F1, cat(I_prev, I0))             full res
//! e1   = RB*(relu(conv(x)))                    c
//! e2   = RB*(fuse(cat(F2, relu(down(e1)))))    2c, half res
//! e3   = RB*(relu(down(e2)))                   4c, quarter res
//! d2   = RB*(merge(cat(relu(up(RB*(e3))), e2)))   -> F2'
//! d1   = RB*(merge(cat(relu(up(d2)), e1)))         -> F1'
//! I_hat = I0 + conv(d1)
//! ```

use crate::error::{Error, Result};
use crate::numerics::{Graph, Scalar, Tensor, Var};

use super::params::{BoundParams, ModelParams, UPSAMPLE_KERNEL};
use super::ModelConfig;

/// Decoder feature maps carried from one iteration to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState<T> {
    /// `N x c x H x W`, from the last resblock of the top decoder.
    pub f1: Tensor<T>,
    /// `N x 2c x H/2 x W/2`, from the last resblock of the middle decoder.
    pub f2: Tensor<T>,
}

impl<T: Scalar> RecurrentState<T> {
    pub fn cast<U: Scalar>(&self) -> RecurrentState<U> {
        RecurrentState { f1: self.f1.cast(), f2: self.f2.cast() }
    }
}

fn check_spatial(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0 {
        return Err(Error::dim(format!(
            "spatial extents must be positive multiples of 4, got {height}x{width}"
        )));
    }
    Ok(())
}

/// All-zero state for a batch of `n` images of `height x width`.
pub fn init_recurrent_state<T: Scalar>(
    config: &ModelConfig,
    n: usize,
    height: usize,
    width: usize,
) -> Result<RecurrentState<T>> {
    check_spatial(height, width)?;
    let [c1, c2, _] = config.stage_channels();
    Ok(RecurrentState {
        f1: Tensor::zeros(&[n, c1, height, width]),
        f2: Tensor::zeros(&[n, c2, height / 2, width / 2]),
    })
}

/// Graph handles produced by one forward iteration.
#[derive(Clone, Copy, Debug)]
pub struct StepVars {
    pub output: Var,
    pub f1: Var,
    pub f2: Var,
}

struct Builder<'a, T> {
    graph: &'a mut Graph<T>,
    params: &'a BoundParams,
    config: &'a ModelConfig,
}

impl<T: Scalar> Builder<'_, T> {
    fn conv(&mut self, x: Var, layer: &str, stride: usize) -> Result<Var> {
        let (w, b) = self.params.layer(layer);
        let k = self.graph.value(w).shape()[2];
        self.graph.conv2d(x, w, b, stride, k / 2)
    }

    fn conv_relu(&mut self, x: Var, layer: &str, stride: usize) -> Result<Var> {
        let y = self.conv(x, layer, stride)?;
        Ok(self.graph.relu(y))
    }

    fn up_relu(&mut self, x: Var, layer: &str) -> Result<Var> {
        let (w, b) = self.params.layer(layer);
        let y = self.graph.transposed_conv2d(x, w, b, 2, (UPSAMPLE_KERNEL - 2) / 2)?;
        Ok(self.graph.relu(y))
    }

    /// conv -> relu -> conv, plus identity.
    fn resblocks(&mut self, mut x: Var, stage: &str) -> Result<Var> {
        for i in 0..self.config.resblocks_per_stage {
            let h = self.conv_relu(x, &format!("{stage}.rb{i}.conv1"), 1)?;
            let h = self.conv(h, &format!("{stage}.rb{i}.conv2"), 1)?;
            x = self.graph.add(h, x)?;
        }
        Ok(x)
    }

    fn merge(&mut self, a: Var, b: Var, layer: &str) -> Result<Var> {
        let cat = self.graph.concat_channels(a, b)?;
        self.conv(cat, layer, 1)
    }
}

/// Records one iteration in `graph`.
///
/// `i0` and `iprev` are `N x C x H x W` with `H, W` divisible by 4.
pub fn forward_graph<T: Scalar>(
    graph: &mut Graph<T>,
    config: &ModelConfig,
    params: &BoundParams,
    i0: Var,
    iprev: Var,
    f1: Var,
    f2: Var,
) -> Result<StepVars> {
    let (n, c, h, w) = graph.value(i0).dims4()?;
    check_spatial(h, w)?;
    if graph.value(iprev).shape() != graph.value(i0).shape() {
        return Err(Error::dim(format!(
            "previous estimate {:?} does not match input {:?}",
            graph.value(iprev).shape(),
            graph.value(i0).shape()
        )));
    }
    if c != config.in_channels {
        return Err(Error::dim(format!("model expects {} channels, got {c}", config.in_channels)));
    }
    let [c1, c2, _] = config.stage_channels();
    if graph.value(f1).shape() != [n, c1, h, w] || graph.value(f2).shape() != [n, c2, h / 2, w / 2] {
        return Err(Error::dim(format!(
            "recurrent state {:?}/{:?} does not match a {n}x{c}x{h}x{w} input",
            graph.value(f1).shape(),
            graph.value(f2).shape()
        )));
    }

    let mut b = Builder { graph, params, config };
    let icat = b.graph.concat_channels(iprev, i0)?;
    let x = if config.recurrent_features { b.graph.concat_channels(f1, icat)? } else { icat };
    let e1 = b.conv_relu(x, "enc1.in", 1)?;
    let e1 = b.resblocks(e1, "enc1")?;

    let d = b.conv_relu(e1, "enc2.down", 2)?;
    let e2 = if b.params.has_layer("enc2.fuse") { b.merge(f2, d, "enc2.fuse")? } else { d };
    let e2 = b.resblocks(e2, "enc2")?;

    let e3 = b.conv_relu(e2, "enc3.down", 2)?;
    let e3 = b.resblocks(e3, "enc3")?;

    let d3 = b.resblocks(e3, "dec3")?;
    let u2 = b.up_relu(d3, "dec3.up")?;
    let m2 = b.merge(u2, e2, "dec2.merge")?;
    let d2 = b.resblocks(m2, "dec2")?;

    let u1 = b.up_relu(d2, "dec2.up")?;
    let m1 = b.merge(u1, e1, "dec1.merge")?;
    let d1 = b.resblocks(m1, "dec1")?;

    let residual = b.conv(d1, "dec1.out", 1)?;
    let output = b.graph.add(i0, residual)?;
    Ok(StepVars { output, f1: d1, f2: d2 })
}

/// One iteration without gradient tracking.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    i0: &Tensor<T>,
    iprev: &Tensor<T>,
    state: &RecurrentState<T>,
) -> Result<(Tensor<T>, RecurrentState<T>)> {
    let mut graph = Graph::new();
    let bound = params.bind(&mut graph, false);
    let i0v = graph.constant(i0.clone());
    let ipv = graph.constant(iprev.clone());
    let f1 = graph.constant(state.f1.clone());
    let f2 = graph.constant(state.f2.clone());
    let out = forward_graph(&mut graph, params.config(), &bound, i0v, ipv, f1, f2)?;
    let next = RecurrentState { f1: graph.value(out.f1).clone(), f2: graph.value(out.f2).clone() };
    Ok((graph.value(out.output).clone(), next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn image(n: usize, h: usize, w: usize, seed: u32) -> Tensor<f32> {
        Tensor::from_fn(&[n, 3, h, w], |i| (((i as u32).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 1000.0)
    }

    #[test]
    fn zero_output_layer_is_identity() {
        let cfg = ModelConfig::desk();
        let p = init_model(&cfg, 1).unwrap();
        let i0 = image(2, 8, 12, 1);
        let prev = image(2, 8, 12, 2);
        let s = init_recurrent_state(&cfg, 2, 8, 12).unwrap();
        let (out, next) = forward(&p, &i0, &prev, &s).unwrap();
        assert_eq!(out, i0);
        assert_eq!(next.f1.shape(), [2, 16, 8, 12]);
        assert_eq!(next.f2.shape(), [2, 32, 4, 6]);
    }

    #[test]
    fn shape_errors() {
        let cfg = ModelConfig::desk();
        assert!(init_recurrent_state::<f32>(&cfg, 1, 7, 8).is_err());
        assert!(init_recurrent_state::<f32>(&cfg, 1, 6, 8).is_err());
        let p = init_model(&cfg, 1).unwrap();
        let s = init_recurrent_state(&cfg, 1, 8, 8).unwrap();
        assert!(forward(&p, &image(1, 8, 8, 0), &image(1, 12, 8, 0), &s).is_err());
        assert!(forward(&p, &image(1, 12, 8, 0), &image(1, 12, 8, 0), &s).is_err());
    }

    #[test]
    fn forward_is_a_fixed_function() {
        let cfg = ModelConfig::desk();
        let mut p = init_model(&cfg, 5).unwrap();
        for v in p.get_mut("dec1.out.weight").unwrap().data_mut() {
            *v = 0.01;
        }
        let i0 = image(1, 16, 16, 3);
        let s = init_recurrent_state(&cfg, 1, 16, 16).unwrap();
        let a = forward(&p, &i0, &i0, &s).unwrap();
        let b = forward(&p, &i0, &i0, &s).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, i0);
    }
}
