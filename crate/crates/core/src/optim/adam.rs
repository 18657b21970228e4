use crate::error::Result;
use crate::nn::{Layer, Param};
use crate::optim::TrainConfig;
use crate::tensor::Tensor;

/// First and second moment estimates, mirroring the parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new<L: Layer + ?Sized>(model: &L) -> Self {
        Self::for_params(&model.params())
    }

    pub fn for_params(params: &[&Param]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update from the gradients stored in `params`,
/// which are zeroed afterwards.
pub fn adam_step(params: Vec<&mut Param>, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    for (i, p) in params.iter().enumerate() {
        p.grad.expect_shape("adam_step grad", p.value.shape())?;
        state.m[i].expect_shape("adam_step moment", p.value.shape())?;
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.into_iter().enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((w, g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m).zip(v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
        p.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(g: f64) -> Param {
        let mut p = Param::new("w", Tensor::zeros(&[1]));
        p.grad = Tensor::full(&[1], g);
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Param::new("w", Tensor::full(&[3], 0.7));
        let mut s = AdamState::for_params(&[&p]);
        adam_step(vec![&mut p], &mut s, &TrainConfig::new(0)).unwrap();
        assert_eq!(p.value.data(), &[0.7; 3]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0);
        let mut s = AdamState::for_params(&[&p]);
        adam_step(vec![&mut p], &mut s, &TrainConfig::new(0)).unwrap();
        // m̂ = 1, v̂ = 1
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
        assert_eq!(p.grad.data(), &[0.0]);
    }

    #[test]
    fn updates_oppose_constant_gradient() {
        for g in [2.5, -0.3] {
            let mut p = scalar(g);
            let mut s = AdamState::for_params(&[&p]);
            let cfg = TrainConfig::new(0);
            for _ in 0..50 {
                let before = p.value.data()[0];
                p.grad = Tensor::full(&[1], g);
                adam_step(vec![&mut p], &mut s, &cfg).unwrap();
                assert!((p.value.data()[0] - before) * g < 0.0);
            }
        }
    }
}
