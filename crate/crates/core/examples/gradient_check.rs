//! Central finite-difference check of a small conv / transposed-conv /
//! ReLU / L1 graph in double precision.

use mtrnn::numerics::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(x: &Tensor<f64>, w1: &Tensor<f64>, w2: &Tensor<f64>, target: &Tensor<f64>) -> (Graph<f64>, f64, [mtrnn::numerics::Var; 2]) {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let a = g.leaf("w1", w1.clone());
    let b = g.leaf("w2", w2.clone());
    let b1 = g.constant(Tensor::zeros(&[4]));
    let b2 = g.constant(Tensor::zeros(&[3]));
    let h = g.conv2d(xv, a, b1, 2, 1).unwrap();
    let h = g.relu(h);
    let y = g.transposed_conv2d(h, b, b2, 2, 1).unwrap();
    let t = g.constant(target.clone());
    let l = g.l1_loss(y, t).unwrap();
    let value = g.value(l).data()[0];
    (g, value, [a, l])
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rand = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
    let x = rand(&[1, 3, 8, 8]);
    let w1 = rand(&[4, 3, 3, 3]);
    let w2 = rand(&[4, 3, 4, 4]);
    let target = rand(&[1, 3, 8, 8]).map(|v| v * 10.0);

    let (g, _, [a, l]) = loss(&x, &w1, &w2, &target);
    let analytic = g.backward(l, 1.0).unwrap().get(a).unwrap().clone();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..w1.len() {
        let mut plus = w1.clone();
        plus.data_mut()[i] += h;
        let mut minus = w1.clone();
        minus.data_mut()[i] -= h;
        let numeric = (loss(&x, &plus, &w2, &target).1 - loss(&x, &minus, &w2, &target).1) / (2.0 * h);
        let rel = (numeric - analytic.data()[i]).abs() / numeric.abs().max(analytic.data()[i].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    println!("checked {} weights, worst relative error {worst:.2e}", w1.len());
}
