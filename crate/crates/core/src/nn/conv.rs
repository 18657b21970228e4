use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};
use crate::nn::{glorot_limit, Layer, Mode, Param, SeededRng};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding so the output keeps length T.
    #[default]
    Same,
    /// No padding; output length T−K+1.
    Valid,
}

/// 1D cross-correlation over the time axis: B×C×T → B×F×T'.
///
/// Produces the raw pre-activation; apply [`Relu`](crate::nn::Relu) separately.
#[derive(Clone, Debug)]
pub struct Conv1d {
    in_channels: usize,
    filters: usize,
    kernel: usize,
    padding: Padding,
    pub weight: Param,
    pub bias: Param,
    cache: Option<ConvCache>,
}

#[derive(Clone, Debug)]
struct ConvCache {
    batch: usize,
    in_len: usize,
    out_len: usize,
    /// Per-sample im2col matrices, each (C·K)×T'.
    cols: Vec<f64>,
}

impl Conv1d {
    pub fn new(
        name: &str,
        in_channels: usize,
        filters: usize,
        kernel: usize,
        padding: Padding,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if in_channels == 0 || filters == 0 || kernel == 0 {
            return Err(Error::config(
                name,
                format!("conv needs C, F, K >= 1 (got {in_channels}, {filters}, {kernel})"),
            ));
        }
        let limit = glorot_limit(in_channels * kernel, filters * kernel);
        let weight = Tensor::uniform(&[filters, in_channels, kernel], limit, rng);
        Ok(Self {
            in_channels,
            filters,
            kernel,
            padding,
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[filters])),
            cache: None,
        })
    }

    /// Builds a layer from explicit weights (F×C×K) and bias (F).
    pub fn from_weights(name: &str, weight: Tensor, bias: Tensor, padding: Padding) -> Result<Self> {
        weight.expect_rank("Conv1d::from_weights", 3)?;
        let (f, c, k) = (weight.dim(0), weight.dim(1), weight.dim(2));
        bias.expect_shape("Conv1d::from_weights", &[f])?;
        Ok(Self {
            in_channels: c,
            filters: f,
            kernel: k,
            padding,
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            cache: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn output_len(&self, t: usize) -> Result<usize> {
        match self.padding {
            Padding::Same => Ok(t),
            Padding::Valid if t >= self.kernel => Ok(t - self.kernel + 1),
            Padding::Valid => Err(Error::TooShort {
                required: self.kernel,
                available: t,
            }),
        }
    }

    fn pad_left(&self) -> usize {
        match self.padding {
            Padding::Same => (self.kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        input.expect_rank("conv1d", 3)?;
        let (b, c, t) = (input.dim(0), input.dim(1), input.dim(2));
        if c != self.in_channels {
            return Err(Error::shape("conv1d channels", self.in_channels, c));
        }
        input.expect_finite("conv1d input")?;
        let t_out = self.output_len(t)?;
        let (k, f) = (self.kernel, self.filters);
        let ck = c * k;
        let pad = self.pad_left() as isize;

        let mut cols = vec![0.0; b * ck * t_out];
        let x = input.data();
        for bi in 0..b {
            let col = &mut cols[bi * ck * t_out..(bi + 1) * ck * t_out];
            for ci in 0..c {
                let row_in = &x[(bi * c + ci) * t..(bi * c + ci + 1) * t];
                for ki in 0..k {
                    let dst = &mut col[(ci * k + ki) * t_out..(ci * k + ki + 1) * t_out];
                    for (ti, d) in dst.iter_mut().enumerate() {
                        let src = ti as isize + ki as isize - pad;
                        if src >= 0 && (src as usize) < t {
                            *d = row_in[src as usize];
                        }
                    }
                }
            }
        }

        let mut out = vec![0.0; b * f * t_out];
        let w = self.weight.value.data();
        let bias = self.bias.value.data();
        for bi in 0..b {
            let o = &mut out[bi * f * t_out..(bi + 1) * f * t_out];
            for (fi, row) in o.chunks_exact_mut(t_out).enumerate() {
                row.fill(bias[fi]);
            }
            gemm(
                f,
                ck,
                t_out,
                w,
                Op::N,
                &cols[bi * ck * t_out..(bi + 1) * ck * t_out],
                Op::N,
                1.0,
                o,
            );
        }
        self.cache = Some(ConvCache {
            batch: b,
            in_len: t,
            out_len: t_out,
            cols,
        });
        Tensor::from_vec(&[b, f, t_out], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache("conv1d"))?;
        let (b, t, t_out) = (cache.batch, cache.in_len, cache.out_len);
        let (c, k, f) = (self.in_channels, self.kernel, self.filters);
        grad_output.expect_shape("conv1d backward", &[b, f, t_out])?;
        let ck = c * k;
        let pad = self.pad_left() as isize;
        let g = grad_output.data();

        let mut dx = vec![0.0; b * c * t];
        let mut dcols = vec![0.0; ck * t_out];
        for bi in 0..b {
            let gb = &g[bi * f * t_out..(bi + 1) * f * t_out];
            let col = &cache.cols[bi * ck * t_out..(bi + 1) * ck * t_out];
            gemm(f, t_out, ck, gb, Op::N, col, Op::T, 1.0, self.weight.grad.data_mut());
            for (fi, row) in gb.chunks_exact(t_out).enumerate() {
                self.bias.grad.data_mut()[fi] += row.iter().sum::<f64>();
            }
            gemm(
                ck,
                f,
                t_out,
                self.weight.value.data(),
                Op::T,
                gb,
                Op::N,
                0.0,
                &mut dcols,
            );
            for ci in 0..c {
                let dxr = &mut dx[(bi * c + ci) * t..(bi * c + ci + 1) * t];
                for ki in 0..k {
                    let src = &dcols[(ci * k + ki) * t_out..(ci * k + ki + 1) * t_out];
                    for (ti, v) in src.iter().enumerate() {
                        let pos = ti as isize + ki as isize - pad;
                        if pos >= 0 && (pos as usize) < t {
                            dxr[pos as usize] += v;
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&[b, c, t], dx)
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
        SeededRng::seed_from_u64(1)
    }

    fn conv(w: Vec<f64>, shape: [usize; 3], bias: Vec<f64>, padding: Padding) -> Conv1d {
        let f = shape[0];
        Conv1d::from_weights(
            "c",
            Tensor::from_vec(&shape, w).unwrap(),
            Tensor::from_vec(&[f], bias).unwrap(),
            padding,
        )
        .unwrap()
    }

    #[test]
    fn sliding_sum_valid() {
        let mut layer = conv(vec![1.0, 1.0], [1, 1, 2], vec![0.0], Padding::Valid);
        let x = Tensor::from_vec(&[1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = layer.forward(&x, Mode::Eval, &mut rng()).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3]);
        assert_eq!(y.data(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn identity_kernel() {
        let mut layer = conv(vec![1.0], [1, 1, 1], vec![0.0], Padding::Same);
        let x = Tensor::from_vec(&[2, 1, 3], vec![0.3, -1.0, 2.0, 5.0, 6.0, -7.5]).unwrap();
        assert_eq!(layer.forward(&x, Mode::Eval, &mut rng()).unwrap(), x);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let mut layer = conv(vec![0.0; 2 * 3 * 3], [2, 3, 3], vec![0.5, 0.5], Padding::Same);
        let x = Tensor::uniform(&[2, 3, 5], 1.0, &mut rng());
        let y = layer.forward(&x, Mode::Eval, &mut rng()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn errors() {
        let mut layer = conv(vec![1.0; 3], [1, 1, 3], vec![0.0], Padding::Valid);
        let short = Tensor::zeros(&[1, 1, 2]);
        assert!(matches!(
            layer.forward(&short, Mode::Eval, &mut rng()),
            Err(Error::TooShort { .. })
        ));
        let wrong = Tensor::zeros(&[1, 2, 5]);
        assert!(layer.forward(&wrong, Mode::Eval, &mut rng()).is_err());
        let nan = Tensor::from_vec(&[1, 1, 3], vec![1.0, f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            layer.forward(&nan, Mode::Eval, &mut rng()),
            Err(Error::NonFinite(_))
        ));
        let mut fresh = conv(vec![1.0; 3], [1, 1, 3], vec![0.0], Padding::Valid);
        assert!(matches!(
            fresh.backward(&Tensor::zeros(&[1, 1, 1])),
            Err(Error::MissingCache(_))
        ));
    }

    #[test]
    fn rejects_empty_dims() {
        assert!(Conv1d::new("c", 0, 1, 1, Padding::Same, &mut rng()).is_err());
        assert!(Conv1d::new("c", 1, 1, 0, Padding::Same, &mut rng()).is_err());
    }
}
