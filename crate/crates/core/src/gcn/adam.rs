use ndarray::{Array2, Zip};

use super::model::Model;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0 && self.lr.is_finite()) || !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moment estimates per weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<Array2<F>>,
    pub v: Vec<Array2<F>>,
    pub step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn zeros(model: &Model<F>) -> Self {
        let zeros: Vec<_> = model.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<F: Scalar>(
    model: &mut Model<F>,
    grads: &[Array2<F>],
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) -> Result<()> {
    let shapes_ok = grads.len() == model.num_layers()
        && state.m.len() == grads.len()
        && grads
            .iter()
            .zip(model.weights())
            .zip(&state.m)
            .all(|((g, w), m)| g.dim() == w.dim() && m.dim() == w.dim());
    if !shapes_ok {
        return Err(Error::DimensionMismatch("gradient or optimizer state does not match the model".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::of(cfg.beta1), F::of(cfg.beta2));
    let c1 = F::one() - F::of(cfg.beta1.powi(t));
    let c2 = F::one() - F::of(cfg.beta2.powi(t));
    let (lr, eps) = (F::of(cfg.lr), F::of(cfg.eps));
    for (l, w) in model.weights_mut().iter_mut().enumerate() {
        Zip::from(w)
            .and(&grads[l])
            .and(&mut state.m[l])
            .and(&mut state.v[l])
            .for_each(|w, &g, m, v| {
                *m = b1 * *m + (F::one() - b1) * g;
                *v = b2 * *v + (F::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::model::Head;
    use ndarray::array;

    fn scalar_model(w: f64) -> Model<f64> {
        Model::from_weights(vec![array![[w]]], Head::Softmax).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = Model::<f64>::glorot(&[3, 2], Head::Softmax, 0).unwrap();
        let before = m.clone();
        let mut s = AdamState::zeros(&m);
        adam_step(&mut m, &[Array2::zeros((3, 2))], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_is_sign_like() {
        let mut m = Model::from_weights(vec![array![[0.0, 0.0, 0.0]]], Head::Softmax).unwrap();
        let mut s = AdamState::zeros(&m);
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        let g: Array2<f64> = array![[2.0, -0.5, 1e-3]];
        adam_step(&mut m, &[g.clone()], &mut s, &cfg).unwrap();
        for (w, g) in m.weights()[0].iter().zip(g.iter()) {
            let expected = -0.1 * g / (g.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn two_step_scalar_trace() {
        // Hand trace, lr 0.1, g1 = 1, g2 = 0.5:
        // m1 = 0.1, v1 = 0.001, m̂ = 1, v̂ = 1 -> w1 = -0.1/(1 + 1e-8)
        // m2 = 0.14, v2 = 0.001249, m̂ = 0.14/0.19, v̂ = 0.001249/0.001999
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        let mut m = scalar_model(0.0);
        let mut s = AdamState::zeros(&m);
        adam_step(&mut m, &[array![[1.0]]], &mut s, &cfg).unwrap();
        let w1 = -0.1 / (1.0 + 1e-8);
        assert!((m.weights()[0][[0, 0]] - w1).abs() < 1e-15);
        adam_step(&mut m, &[array![[0.5]]], &mut s, &cfg).unwrap();
        let m_hat: f64 = 0.14 / 0.19;
        let v_hat: f64 = 0.001249 / 0.001999;
        let w2 = w1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((m.weights()[0][[0, 0]] - w2).abs() < 1e-12);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut m = scalar_model(1.0);
        let mut s = AdamState::zeros(&m);
        assert!(adam_step(&mut m, &[Array2::zeros((2, 1))], &mut s, &AdamConfig::default()).is_err());
    }
}
