use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, SeededRng};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        self.mask = Some(input.data().iter().map(|&v| v > 0.0).collect());
        Ok(input.map(|v| v.max(0.0)))
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mask = self.mask.as_ref().ok_or(Error::MissingCache("relu"))?;
        if mask.len() != grad_output.len() {
            return Err(Error::shape("relu backward", mask.len(), grad_output.len()));
        }
        let mut g = grad_output.clone();
        for (v, &keep) in g.data_mut().iter_mut().zip(mask) {
            if !keep {
                *v = 0.0;
            }
        }
        Ok(g)
    }
}

/// Flattens every non-batch axis: B×… → B×P.
pub fn flatten(input: &Tensor) -> Result<Tensor> {
    if input.rank() < 2 {
        return Err(Error::shape(
            "flatten",
            "rank >= 2",
            format!("{:?}", input.shape()),
        ));
    }
    let b = input.dim(0);
    let p = input.len() / b;
    input.clone().reshape(&[b, p])
}

pub fn unflatten(input: &Tensor, shape: &[usize]) -> Result<Tensor> {
    input.clone().reshape(shape)
}

#[derive(Clone, Debug, Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Flatten {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        let out = flatten(input)?;
        self.shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self.shape.as_ref().ok_or(Error::MissingCache("flatten"))?;
        unflatten(grad_output, shape)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn rng() -> SeededRng {
        SeededRng::seed_from_u64(0)
    }

    #[test]
    fn relu_definition() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = Relu::new().forward(&x, Mode::Eval, &mut rng()).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);

        let pos = Tensor::from_vec(&[2, 2], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(Relu::new().forward(&pos, Mode::Eval, &mut rng()).unwrap(), pos);

        let neg = Tensor::from_vec(&[3], vec![-1.0, -2.0, -0.5]).unwrap();
        let y = Relu::new().forward(&neg, Mode::Eval, &mut rng()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_backward_masks() {
        let mut relu = Relu::new();
        assert!(matches!(
            relu.backward(&Tensor::zeros(&[2])),
            Err(Error::MissingCache(_))
        ));
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.5, 2.0]).unwrap();
        relu.forward(&x, Mode::Train, &mut rng()).unwrap();
        let g = relu.backward(&Tensor::full(&[3], 3.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 3.0, 3.0]);
    }

    #[test]
    fn flatten_is_row_major_and_invertible() {
        let x = Tensor::from_vec(&[2, 3, 2], (0..12).map(f64::from).collect()).unwrap();
        let y = flatten(&x).unwrap();
        assert_eq!(y.shape(), &[2, 6]);
        assert_eq!(y.data(), x.data());
        assert_eq!(unflatten(&y, &[2, 3, 2]).unwrap(), x);

        let flat = Tensor::from_vec(&[2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(flatten(&flat).unwrap(), flat);

        assert!(flatten(&Tensor::zeros(&[4])).is_err());
    }
}
