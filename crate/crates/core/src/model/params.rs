use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{Graph, Parameter, Scalar, Tensor, Var};

use super::ModelConfig;

/// Kernel size of the stride-2 transposed convolutions between scales.
pub const UPSAMPLE_KERNEL: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    Conv,
    TransposedConv,
}

/// One convolution layer of the network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    /// Zero-initialized instead of fan-in scaled.
    pub zero_init: bool,
}

impl LayerSpec {
    fn conv(name: impl Into<String>, in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self { name: name.into(), kind: LayerKind::Conv, in_ch, out_ch, kernel, zero_init: false }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        match self.kind {
            LayerKind::Conv => [self.out_ch, self.in_ch, self.kernel, self.kernel],
            LayerKind::TransposedConv => [self.in_ch, self.out_ch, self.kernel, self.kernel],
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_ch * self.out_ch * self.kernel * self.kernel + self.out_ch
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.in_ch * self.kernel * self.kernel,
            // each output pixel of a stride-2 transposed conv sees k*k/4 taps per channel
            LayerKind::TransposedConv => (self.in_ch * self.kernel * self.kernel / 4).max(1),
        }
    }
}

/// Every layer of the network, in the order parameters are stored.
pub fn layer_specs(config: &ModelConfig) -> Vec<LayerSpec> {
    let [c1, c2, c3] = config.stage_channels();
    let k = config.kernel_size;
    let img = config.in_channels;
    let mut layers = Vec::new();
    let resblocks = |layers: &mut Vec<LayerSpec>, stage: &str, ch: usize| {
        for i in 0..config.resblocks_per_stage {
            layers.push(LayerSpec::conv(format!("{stage}.rb{i}.conv1"), ch, ch, k));
            layers.push(LayerSpec::conv(format!("{stage}.rb{i}.conv2"), ch, ch, k));
        }
    };
    let recurrent = if config.recurrent_features { c1 } else { 0 };
    layers.push(LayerSpec::conv("enc1.in", recurrent + 2 * img, c1, k));
    resblocks(&mut layers, "enc1", c1);
    layers.push(LayerSpec::conv("enc2.down", c1, c2, k));
    if config.recurrent_features {
        layers.push(LayerSpec::conv("enc2.fuse", 2 * c2, c2, 1));
    }
    resblocks(&mut layers, "enc2", c2);
    layers.push(LayerSpec::conv("enc3.down", c2, c3, k));
    resblocks(&mut layers, "enc3", c3);
    resblocks(&mut layers, "dec3", c3);
    layers.push(LayerSpec {
        kind: LayerKind::TransposedConv,
        ..LayerSpec::conv("dec3.up", c3, c2, UPSAMPLE_KERNEL)
    });
    layers.push(LayerSpec::conv("dec2.merge", 2 * c2, c2, 1));
    resblocks(&mut layers, "dec2", c2);
    layers.push(LayerSpec {
        kind: LayerKind::TransposedConv,
        ..LayerSpec::conv("dec2.up", c2, c1, UPSAMPLE_KERNEL)
    });
    layers.push(LayerSpec::conv("dec1.merge", 2 * c1, c1, 1));
    resblocks(&mut layers, "dec1", c1);
    layers.push(LayerSpec { zero_init: true, ..LayerSpec::conv("dec1.out", c1, img, k) });
    layers
}

/// All learnable tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ModelParams<T> {
    /// Assembles parameters, checking names and shapes against `config`.
    pub fn from_parameters(config: ModelConfig, params: Vec<Parameter<T>>) -> Result<Self> {
        config.validate()?;
        let expected: Vec<(String, Vec<usize>)> = layer_specs(&config)
            .iter()
            .flat_map(|l| {
                [
                    (format!("{}.weight", l.name), l.weight_shape().to_vec()),
                    (format!("{}.bias", l.name), vec![l.out_ch]),
                ]
            })
            .collect();
        if expected.len() != params.len() {
            return Err(Error::dim(format!(
                "config expects {} tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            if *name != p.name || shape.as_slice() != p.value.shape() {
                return Err(Error::dim(format!(
                    "expected `{name}` {shape:?}, got `{}` {:?}",
                    p.name,
                    p.value.shape()
                )));
            }
            p.value.check_finite(&p.name)?;
        }
        let index = params.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        Ok(Self { config, params, index })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.params[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index.get(name).map(|&i| &mut self.params[i].value)
    }

    /// Exact number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            params: self.params.iter().map(|p| Parameter::new(p.name.clone(), p.value.cast())).collect(),
            index: self.index.clone(),
        }
    }

    /// Records every parameter in `graph`, as leaves when gradients are wanted.
    pub fn bind(&self, graph: &mut Graph<T>, as_leaves: bool) -> BoundParams {
        let vars = self
            .params
            .iter()
            .map(|p| {
                if as_leaves {
                    graph.leaf(p.name.clone(), p.value.clone())
                } else {
                    graph.constant(p.value.clone())
                }
            })
            .collect();
        BoundParams { vars, index: self.index.clone() }
    }
}

/// Graph handles for a [`ModelParams`], in parameter order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub(crate) fn layer(&self, name: &str) -> (Var, Var) {
        let w = self.index[&format!("{name}.weight")];
        let b = self.index[&format!("{name}.bias")];
        (self.vars[w], self.vars[b])
    }

    pub(crate) fn has_layer(&self, name: &str) -> bool {
        self.index.contains_key(&format!("{name}.weight"))
    }
}

/// Fan-in scaled uniform initialization; the output layer starts at zero so
/// the untrained network is the identity on its blurred input.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ModelParams<f32>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for layer in layer_specs(config) {
        let bound = 1.0 / (layer.fan_in() as f32).sqrt();
        let mut draw = |shape: &[usize]| {
            if layer.zero_init {
                Tensor::zeros(shape)
            } else {
                Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
            }
        };
        let weight = draw(&layer.weight_shape());
        let bias = draw(&[layer.out_ch]);
        params.push(Parameter::new(format!("{}.weight", layer.name), weight));
        params.push(Parameter::new(format!("{}.bias", layer.name), bias));
    }
    ModelParams::from_parameters(config.clone(), params)
}

/// Per-layer parameter counts, for reports.
pub fn param_breakdown(config: &ModelConfig) -> Vec<(String, usize)> {
    layer_specs(config).into_iter().map(|l| {
        let n = l.param_count();
        (l.name, n)
    }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_params() {
        let cfg = ModelConfig::desk();
        assert_eq!(init_model(&cfg, 3).unwrap(), init_model(&cfg, 3).unwrap());
        assert_ne!(init_model(&cfg, 3).unwrap(), init_model(&cfg, 4).unwrap());
    }

    #[test]
    fn output_layer_starts_at_zero() {
        let p = init_model(&ModelConfig::desk(), 0).unwrap();
        assert!(p.get("dec1.out.weight").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(p.get("dec1.out.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pointwise_layer_count() {
        // a lone 1x1 conv 3 -> 3 with bias
        let layer = LayerSpec::conv("x", 3, 3, 1);
        assert_eq!(layer.param_count(), 12);
    }

    #[test]
    fn rejects_even_kernel() {
        let cfg = ModelConfig { kernel_size: 4, ..ModelConfig::desk() };
        assert!(matches!(init_model(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn count_is_monotone_in_width() {
        let count = |m: f64| {
            let cfg = ModelConfig { width_multiplier: m, ..ModelConfig::full() };
            init_model(&cfg, 0).unwrap().param_count()
        };
        let counts: Vec<usize> = [0.5, 0.75, 1.0, 1.5, 2.0].iter().map(|&m| count(m)).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }

    #[test]
    fn full_scale_without_recurrence_matches_reference_network() {
        // encoder-decoder with k=3, three resblocks per stage, concat+1x1 skips
        let cfg = ModelConfig { recurrent_features: false, ..ModelConfig::full() };
        assert_eq!(param_breakdown(&cfg).iter().map(|(_, n)| n).sum::<usize>(), 2_594_371);
    }
}
