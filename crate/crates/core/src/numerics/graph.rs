//! Reverse-mode differentiation over a recorded sequence of primitives.

use crate::error::{Error, Result};

use super::{ops, Scalar, Tensor};

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A recorded primitive.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Leaf { name: String },
    Constant,
    Conv2d { stride: usize, padding: usize },
    TransposedConv2d { stride: usize, padding: usize },
    Relu,
    Add,
    ConcatChannels,
    L1Loss,
    /// A value computed outside the graph; it has no gradient rule.
    Opaque { name: String },
}

impl Primitive {
    pub fn name(&self) -> &str {
        match self {
            Primitive::Leaf { .. } => "leaf",
            Primitive::Constant => "constant",
            Primitive::Conv2d { .. } => "conv2d",
            Primitive::TransposedConv2d { .. } => "transposed_conv2d",
            Primitive::Relu => "relu",
            Primitive::Add => "add",
            Primitive::ConcatChannels => "concat_channels",
            Primitive::L1Loss => "l1_loss",
            Primitive::Opaque { name } => name,
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    primitive: Primitive,
    inputs: Vec<Var>,
    value: Tensor<T>,
    /// Whether any leaf is reachable through this node's inputs.
    tracked: bool,
}

/// Computation record: every executed primitive in order, with its inputs
/// and output, sufficient to replay the forward pass and run it backward.
#[derive(Clone, Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, primitive: Primitive, inputs: Vec<Var>, value: Tensor<T>) -> Var {
        let tracked = matches!(primitive, Primitive::Leaf { .. })
            || inputs.iter().any(|v| self.nodes[v.0].tracked);
        self.nodes.push(Node { primitive, inputs, value, tracked });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input; [`Graph::backward`] reports a gradient for it.
    pub fn leaf(&mut self, name: impl Into<String>, value: Tensor<T>) -> Var {
        self.push(Primitive::Leaf { name: name.into() }, Vec::new(), value)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Primitive::Constant, Vec::new(), value)
    }

    /// Records a value produced elsewhere. Backward through it fails with
    /// [`Error::UnsupportedOp`].
    pub fn opaque(&mut self, name: impl Into<String>, inputs: &[Var], value: Tensor<T>) -> Var {
        self.push(Primitive::Opaque { name: name.into() }, inputs.to_vec(), value)
    }

    /// Every recorded value, in recording order.
    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.nodes.len()).map(Var)
    }

    pub fn inputs(&self, v: Var) -> &[Var] {
        &self.nodes[v.0].inputs
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn primitive(&self, v: Var) -> &Primitive {
        &self.nodes[v.0].primitive
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let y = ops::conv2d(self.value(x), self.value(w), self.value(b), stride, padding)?;
        Ok(self.push(Primitive::Conv2d { stride, padding }, vec![x, w, b], y))
    }

    pub fn transposed_conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let y = ops::transposed_conv2d(self.value(x), self.value(w), self.value(b), stride, padding)?;
        Ok(self.push(Primitive::TransposedConv2d { stride, padding }, vec![x, w, b], y))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = ops::relu(self.value(x));
        self.push(Primitive::Relu, vec![x], y)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(Primitive::Add, vec![a, b], y))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::concat_channels(self.value(a), self.value(b))?;
        Ok(self.push(Primitive::ConcatChannels, vec![a, b], y))
    }

    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let loss = ops::l1_loss(self.value(pred), self.value(target))?;
        Ok(self.push(Primitive::L1Loss, vec![pred, target], Tensor::scalar(loss)))
    }

    fn evaluate(&self, node: &Node<T>, values: &[Tensor<T>]) -> Result<Tensor<T>> {
        let arg = |i: usize| &values[node.inputs[i].0];
        Ok(match &node.primitive {
            Primitive::Leaf { .. } | Primitive::Constant | Primitive::Opaque { .. } => node.value.clone(),
            Primitive::Conv2d { stride, padding } => ops::conv2d(arg(0), arg(1), arg(2), *stride, *padding)?,
            Primitive::TransposedConv2d { stride, padding } => {
                ops::transposed_conv2d(arg(0), arg(1), arg(2), *stride, *padding)?
            }
            Primitive::Relu => ops::relu(arg(0)),
            Primitive::Add => ops::add(arg(0), arg(1))?,
            Primitive::ConcatChannels => ops::concat_channels(arg(0), arg(1))?,
            Primitive::L1Loss => Tensor::scalar(ops::l1_loss(arg(0), arg(1))?),
        })
    }

    /// Re-executes every recorded primitive from the recorded inputs.
    pub fn replay(&self) -> Result<Vec<Tensor<T>>> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = self.evaluate(node, &values)?;
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse-mode gradients of the scalar `output` with respect to every leaf.
    ///
    /// Leaves that `output` does not depend on get a zero gradient.
    pub fn backward(&self, output: Var, seed: T) -> Result<Gradients<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::dim(format!(
                "backward needs a scalar output, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let mut adjoints: Vec<Option<Tensor<T>>> = vec![None; output.0 + 1];
        adjoints[output.0] = Some(Tensor::full(self.value(output).shape(), seed));
        let mut leaves = Vec::new();

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if let Primitive::Leaf { name } = &node.primitive {
                let grad = adjoints[idx].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                leaves.push((Var(idx), name.clone(), grad));
                continue;
            }
            let Some(grad) = adjoints[idx].take() else { continue };
            if !node.tracked {
                continue;
            }
            for (input, g) in self.vjp(node, &grad)? {
                match &mut adjoints[input.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        // leaves recorded after `output` cannot influence it
        for (idx, node) in self.nodes.iter().enumerate().skip(output.0 + 1) {
            if let Primitive::Leaf { name } = &node.primitive {
                leaves.push((Var(idx), name.clone(), Tensor::zeros(node.value.shape())));
            }
        }
        leaves.sort_by_key(|(v, _, _)| v.0);
        Ok(Gradients { leaves })
    }

    fn vjp(&self, node: &Node<T>, grad: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let wants = |i: usize| self.nodes[node.inputs[i].0].tracked;
        let arg = |i: usize| &self.nodes[node.inputs[i].0].value;
        let mut out = Vec::with_capacity(node.inputs.len());
        match &node.primitive {
            Primitive::Leaf { .. } | Primitive::Constant => {}
            Primitive::Opaque { name } => return Err(Error::UnsupportedOp(name.clone())),
            Primitive::Conv2d { stride, padding } | Primitive::TransposedConv2d { stride, padding } => {
                let backward = if matches!(node.primitive, Primitive::Conv2d { .. }) {
                    ops::conv2d_backward
                } else {
                    ops::transposed_conv2d_backward
                };
                let (dx, dw, db) = backward(arg(0), arg(1), grad, *stride, *padding, wants(0))?;
                if let Some(dx) = dx {
                    out.push((node.inputs[0], dx));
                }
                if wants(1) {
                    out.push((node.inputs[1], dw));
                }
                if wants(2) {
                    out.push((node.inputs[2], db));
                }
            }
            Primitive::Relu => out.push((node.inputs[0], ops::relu_backward(arg(0), grad))),
            Primitive::Add => {
                for i in 0..2 {
                    if wants(i) {
                        out.push((node.inputs[i], grad.clone()));
                    }
                }
            }
            Primitive::ConcatChannels => {
                let lead = arg(0).dims4()?.1;
                let (ga, gb) = ops::split_channels(grad, lead)?;
                out.push((node.inputs[0], ga));
                out.push((node.inputs[1], gb));
            }
            Primitive::L1Loss => {
                let g = ops::l1_loss_backward(arg(0), arg(1), grad.item()?)?;
                if wants(1) {
                    out.push((node.inputs[1], g.map(|v| -v)));
                }
                out.push((node.inputs[0], g));
            }
        }
        out.retain(|(v, _)| self.nodes[v.0].tracked);
        Ok(out)
    }
}

/// Gradients for every leaf of a graph, in recording order.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    leaves: Vec<(Var, String, Tensor<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.iter().find(|(var, _, _)| *var == v).map(|(_, _, g)| g)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.leaves.iter().find(|(_, n, _)| n == name).map(|(_, _, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &str, &Tensor<T>)> {
        self.leaves.iter().map(|(v, n, g)| (*v, n.as_str(), g))
    }

    pub fn into_tensors(self) -> Vec<Tensor<T>> {
        self.leaves.into_iter().map(|(_, _, g)| g).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_gradient_against_zero_target() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf("x", Tensor::full(&[2, 3, 2, 2], 0.5));
        let zero = g.constant(Tensor::zeros(&[2, 3, 2, 2]));
        let loss = g.l1_loss(x, zero).unwrap();
        let grads = g.backward(loss, 1.0).unwrap();
        // batch-averaged: 1 / (N * C * H * W)
        let expected = 1.0 / 24.0;
        assert!(grads.get(x).unwrap().data().iter().all(|&v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn unreached_leaf_gets_zero() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf("x", Tensor::full(&[1, 1, 2, 2], 1.0));
        let c = g.constant(Tensor::full(&[1, 1, 2, 2], 2.0));
        let z = g.constant(Tensor::zeros(&[1, 1, 2, 2]));
        let loss = g.l1_loss(c, z).unwrap();
        let grads = g.backward(loss, 1.0).unwrap();
        assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn opaque_primitive_has_no_rule() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf("x", Tensor::full(&[1, 1, 2, 2], 1.0));
        let clamped = g.opaque("clamp", &[x], Tensor::full(&[1, 1, 2, 2], 1.0));
        let z = g.constant(Tensor::zeros(&[1, 1, 2, 2]));
        let loss = g.l1_loss(clamped, z).unwrap();
        assert!(matches!(g.backward(loss, 1.0), Err(Error::UnsupportedOp(name)) if name == "clamp"));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf("x", Tensor::zeros(&[2]));
        assert!(g.backward(x, 1.0).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::from_fn(&[1, 2, 5, 5], |i| ((i * 7) % 11) as f32 / 11.0));
        let w = g.leaf("w", Tensor::from_fn(&[3, 2, 3, 3], |i| ((i * 5) % 13) as f32 / 13.0 - 0.5));
        let b = g.leaf("b", Tensor::from_fn(&[3], |i| i as f32 * 0.1));
        let y = g.conv2d(x, w, b, 2, 1).unwrap();
        let r = g.relu(y);
        let z = g.constant(Tensor::zeros(g.value(r).shape()));
        g.l1_loss(r, z).unwrap();
        let replayed = g.replay().unwrap();
        for (i, v) in replayed.iter().enumerate() {
            assert_eq!(v, g.value(Var(i)));
        }
    }
}
