use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, SeededRng};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub p: f64,
}

impl DropoutSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config("dropout_p", format!("must lie in [0, 1), got {p}")));
        }
        Ok(Self { p })
    }
}

/// Inverted dropout.
///
/// In train mode each element is dropped independently with probability `p`
/// and survivors are scaled by `1/(1−p)`. One uniform draw is taken from the
/// generator per element, in row-major order. Eval mode is the identity.
#[derive(Clone, Debug)]
pub struct Dropout {
    spec: DropoutSpec,
    /// Per-element multiplier of the last train-mode forward.
    mask: Option<Vec<f64>>,
    identity: bool,
}

impl Dropout {
    pub fn new(spec: DropoutSpec) -> Self {
        Self {
            spec,
            mask: None,
            identity: false,
        }
    }

    pub fn p(&self) -> f64 {
        self.spec.p
    }
}

/// Applies inverted dropout without keeping a cache.
pub fn dropout_forward(
    input: &Tensor,
    spec: DropoutSpec,
    mode: Mode,
    rng: &mut SeededRng,
) -> Tensor {
    let mut d = Dropout::new(spec);
    d.apply(input, mode, rng)
}

impl Dropout {
    fn apply(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Tensor {
        if mode == Mode::Eval || self.spec.p == 0.0 {
            self.mask = None;
            self.identity = true;
            return input.clone();
        }
        let p = self.spec.p;
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
            .collect();
        let mut out = input.clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        self.identity = false;
        out
    }
}

impl Layer for Dropout {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        Ok(self.apply(input, mode, rng))
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        if self.identity {
            return Ok(grad_output.clone());
        }
        let mask = self.mask.as_ref().ok_or(Error::MissingCache("dropout"))?;
        if mask.len() != grad_output.len() {
            return Err(Error::shape("dropout backward", mask.len(), grad_output.len()));
        }
        let mut g = grad_output.clone();
        for (v, m) in g.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn spec_bounds() {
        assert!(DropoutSpec::new(0.0).is_ok());
        assert!(DropoutSpec::new(0.3).is_ok());
        assert!(DropoutSpec::new(1.0).is_err());
        assert!(DropoutSpec::new(-0.1).is_err());
    }

    #[test]
    fn identity_cases() {
        let mut rng = SeededRng::seed_from_u64(3);
        let x = Tensor::uniform(&[4, 5], 2.0, &mut rng);
        let p0 = DropoutSpec::new(0.0).unwrap();
        assert_eq!(dropout_forward(&x, p0, Mode::Train, &mut rng), x);
        let p = DropoutSpec::new(0.3).unwrap();
        assert_eq!(dropout_forward(&x, p, Mode::Eval, &mut rng), x);
    }

    #[test]
    fn inverted_scaling_preserves_mean() {
        let mut rng = SeededRng::seed_from_u64(4);
        let n = 100_000;
        let x = Tensor::full(&[n], 1.0);
        let spec = DropoutSpec::new(0.3).unwrap();
        let y = dropout_forward(&x, spec, Mode::Train, &mut rng);
        let mean = y.sum() / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        // Each output is 0 or 1/(1−p): std = √(p/(1−p)); 3 standard errors.
        let se = (0.3f64 / 0.7).sqrt() / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn backward_reuses_mask() {
        let mut rng = SeededRng::seed_from_u64(5);
        let mut d = Dropout::new(DropoutSpec::new(0.5).unwrap());
        assert!(d.backward(&Tensor::zeros(&[3])).is_err());
        let x = Tensor::full(&[1000], 1.0);
        let y = d.forward(&x, Mode::Train, &mut rng).unwrap();
        let g = d.backward(&Tensor::full(&[1000], 1.0)).unwrap();
        assert_eq!(y, g);
    }
}
