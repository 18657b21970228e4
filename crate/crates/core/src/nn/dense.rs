use crate::error::{Error, Result};
use crate::linalg::{add_col_sums, add_row_bias, gemm, Op};
use crate::nn::{glorot_limit, Layer, Mode, Param, SeededRng};
use crate::tensor::Tensor;

/// Fully connected layer `y = W·x + b` on the last axis.
///
/// Leading axes are treated as batch, so a B×L×in input is projected per
/// time step to B×L×out.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(name: &str, input: usize, output: usize, rng: &mut SeededRng) -> Result<Self> {
        if input == 0 || output == 0 {
            return Err(Error::config(name, "dense widths must be >= 1"));
        }
        let w = Tensor::uniform(&[output, input], glorot_limit(input, output), rng);
        Self::from_weights(name, w, Tensor::zeros(&[output]))
    }

    pub fn from_weights(name: &str, weight: Tensor, bias: Tensor) -> Result<Self> {
        weight.expect_rank("Dense::from_weights", 2)?;
        bias.expect_shape("Dense::from_weights", &[weight.dim(0)])?;
        Ok(Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            cache: None,
        })
    }

    pub fn input_width(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn output_width(&self) -> usize {
        self.weight.value.dim(0)
    }
}

impl Layer for Dense {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        let (out_w, in_w) = (self.output_width(), self.input_width());
        if input.rank() < 2 || *input.shape().last().unwrap() != in_w {
            return Err(Error::shape(
                "dense",
                format!("[.., {in_w}]"),
                format!("{:?}", input.shape()),
            ));
        }
        let rows = input.len() / in_w;
        let mut out = vec![0.0; rows * out_w];
        gemm(
            rows,
            in_w,
            out_w,
            input.data(),
            Op::N,
            self.weight.value.data(),
            Op::T,
            0.0,
            &mut out,
        );
        add_row_bias(&mut out, self.bias.value.data());
        let mut shape = input.shape().to_vec();
        *shape.last_mut().unwrap() = out_w;
        self.cache = Some(input.clone());
        Tensor::from_vec(&shape, out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or(Error::MissingCache("dense"))?;
        let (out_w, in_w) = (self.output_width(), self.input_width());
        let mut expect = input.shape().to_vec();
        *expect.last_mut().unwrap() = out_w;
        grad_output.expect_shape("dense backward", &expect)?;
        let rows = input.len() / in_w;
        let g = grad_output.data();
        gemm(
            out_w,
            rows,
            in_w,
            g,
            Op::T,
            input.data(),
            Op::N,
            1.0,
            self.weight.grad.data_mut(),
        );
        add_col_sums(g, self.bias.grad.data_mut());
        let mut dx = vec![0.0; rows * in_w];
        gemm(
            rows,
            out_w,
            in_w,
            g,
            Op::N,
            self.weight.value.data(),
            Op::N,
            0.0,
            &mut dx,
        );
        Tensor::from_vec(input.shape(), dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn rng() -> SeededRng {
        SeededRng::seed_from_u64(2)
    }

    fn dense(w: Vec<f64>, rows: usize, cols: usize, b: Vec<f64>) -> Dense {
        Dense::from_weights(
            "d",
            Tensor::from_vec(&[rows, cols], w).unwrap(),
            Tensor::from_vec(&[rows], b).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_and_bias_only() {
        let x = Tensor::from_vec(&[2, 2], vec![1.5, -2.0, 3.0, 0.25]).unwrap();
        let mut id = dense(vec![1.0, 0.0, 0.0, 1.0], 2, 2, vec![0.0, 0.0]);
        assert_eq!(id.forward(&x, Mode::Eval, &mut rng()).unwrap(), x);

        let mut zero = dense(vec![0.0; 4], 2, 2, vec![1.0, 2.0]);
        let y = zero.forward(&x, Mode::Eval, &mut rng()).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn matrix_product() {
        let mut d = dense(vec![1.0, 2.0, 3.0, 4.0], 2, 2, vec![0.0, 0.0]);
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval, &mut rng()).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn analytic_linear_gradients() {
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut d = dense(w.clone(), 2, 3, vec![0.0, 0.0]);
        let x = Tensor::from_vec(&[1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        d.forward(&x, Mode::Train, &mut rng()).unwrap();
        let g = Tensor::from_vec(&[1, 2], vec![3.0, -2.0]).unwrap();
        let dx = d.backward(&g).unwrap();
        // dW = outer(g, x), db = g, dx = Wᵀg
        assert_eq!(d.weight.grad.data(), &[1.5, -3.0, 6.0, -1.0, 2.0, -4.0]);
        assert_eq!(d.bias.grad.data(), &[3.0, -2.0]);
        assert_eq!(dx.data(), &[3.0 - 8.0, 6.0 - 10.0, 9.0 - 12.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut d = Dense::new("d", 4, 3, &mut rng()).unwrap();
        let x = Tensor::uniform(&[5, 4], 1.0, &mut rng());
        d.forward(&x, Mode::Train, &mut rng()).unwrap();
        let dx = d.backward(&Tensor::zeros(&[5, 3])).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(d.weight.grad.data().iter().all(|&v| v == 0.0));
        assert!(d.bias.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn width_mismatch() {
        let mut d = Dense::new("d", 4, 3, &mut rng()).unwrap();
        assert!(d.forward(&Tensor::zeros(&[2, 5]), Mode::Eval, &mut rng()).is_err());
        d.forward(&Tensor::zeros(&[2, 4]), Mode::Eval, &mut rng()).unwrap();
        assert!(d.backward(&Tensor::zeros(&[2, 4])).is_err());
    }
}
