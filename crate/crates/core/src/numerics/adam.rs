use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Parameter, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter moment accumulators plus the update counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub hyper: AdamHyper,
    pub step: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Parameter<T>], hyper: AdamHyper) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self { hyper, step: 0, first_moment: zeros(), second_moment: zeros() }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Gradients are validated before anything is modified, so a rejected
/// update leaves both parameters and state untouched.
pub fn adam_step<T: Scalar>(
    params: &mut [Parameter<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::dim(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.value.shape() != g.shape() || p.value.shape() != m.shape() {
            return Err(Error::dim(format!(
                "adam_step: gradient for `{}` has shape {:?}, parameter {:?}",
                p.name,
                g.shape(),
                p.value.shape()
            )));
        }
        g.check_finite(&format!("gradient of `{}`", p.name))?;
    }

    state.step += 1;
    let h = state.hyper;
    let t = state.step as f64;
    let (b1, b2) = (T::from_f64(h.beta1), T::from_f64(h.beta2));
    let (one_b1, one_b2) = (T::from_f64(1.0 - h.beta1), T::from_f64(1.0 - h.beta2));
    let correction1 = T::from_f64(1.0 - h.beta1.powf(t));
    let correction2 = T::from_f64(1.0 - h.beta2.powf(t));
    let (lr, eps) = (T::from_f64(h.lr), T::from_f64(h.eps));

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((w, &gi), mi), vi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + one_b1 * gi;
            *vi = b2 * *vi + one_b2 * gi * gi;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Vec<Parameter<f64>> {
        vec![Parameter::new("p", Tensor::scalar(v))]
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Parameter::new("w", Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5))];
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamHyper::default());
        for _ in 0..5 {
            adam_step(&mut params, &[Tensor::zeros(&[2, 3])], &mut state).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = scalar_param(1.0);
        let hyper = AdamHyper { lr: 0.1, ..AdamHyper::default() };
        let mut state = AdamState::new(&params, hyper);
        adam_step(&mut params, &[Tensor::scalar(1.0)], &mut state).unwrap();
        // m_hat = 1, v_hat = 1  =>  p = 1 - 0.1 / (1 + 1e-8)
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params[0].value.item().unwrap() - expected).abs() < 1e-12);
        assert!((params[0].value.item().unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut params = scalar_param(1.0);
        let hyper = AdamHyper { lr: 0.01, ..AdamHyper::default() };
        let mut state = AdamState::new(&params, hyper);
        for _ in 0..1000 {
            let p = params[0].value.item().unwrap();
            adam_step(&mut params, &[Tensor::scalar(2.0 * p)], &mut state).unwrap();
        }
        assert!(params[0].value.item().unwrap().abs() < 1e-2);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut params = scalar_param(1.0);
        let mut state = AdamState::new(&params, AdamHyper::default());
        let mut g = Tensor::scalar(0.0);
        g.data_mut()[0] = f64::NAN;
        let err = adam_step(&mut params, &[g], &mut state).unwrap_err();
        assert!(matches!(&err, Error::NonFinite(msg) if msg.contains("`p`")));
        assert_eq!(state.step, 0);
        assert_eq!(params[0].value.item().unwrap(), 1.0);
    }
}
