//! Baseline recurrent layers: Elman RNN and GRU.

use crate::error::{Error, Result};
use crate::linalg::{add_col_sums, gemm, Op};
use crate::nn::{glorot_limit, sigmoid, Layer, Mode, Param, SeededRng};
use crate::tensor::Tensor;

/// `h_t = tanh(W_x x_t + W_h h_{t−1} + b)` over B×L×D → B×L×H.
#[derive(Clone, Debug)]
pub struct SimpleRnn {
    pub input_weights: Param,
    pub recurrent_weights: Param,
    pub bias: Param,
    cache: Option<RnnCache>,
}

#[derive(Clone, Debug)]
struct RnnCache {
    batch: usize,
    len: usize,
    x: Vec<f64>,
    /// (L+1) × B × H, index 0 is the zero initial state.
    hidden: Vec<f64>,
}

impl SimpleRnn {
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::config(name, "rnn dims must be >= 1"));
        }
        let (d, h) = (input_dim, hidden_dim);
        Ok(Self {
            input_weights: Param::new(
                format!("{name}.input_weights"),
                Tensor::uniform(&[h, d], glorot_limit(d, h), rng),
            ),
            recurrent_weights: Param::new(
                format!("{name}.recurrent_weights"),
                Tensor::uniform(&[h, h], glorot_limit(h, h), rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[h])),
            cache: None,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.recurrent_weights.value.dim(0)
    }

    fn input_dim(&self) -> usize {
        self.input_weights.value.dim(1)
    }
}

impl Layer for SimpleRnn {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        input.expect_rank("rnn", 3)?;
        let (b, l, d) = (input.dim(0), input.dim(1), input.dim(2));
        let h = self.hidden_dim();
        if d != self.input_dim() {
            return Err(Error::shape("rnn input dim", self.input_dim(), d));
        }
        let mut xw = vec![0.0; b * l * h];
        gemm(b * l, d, h, input.data(), Op::N, self.input_weights.value.data(), Op::T, 0.0, &mut xw);
        let mut hidden = vec![0.0; (l + 1) * b * h];
        let mut out = vec![0.0; b * l * h];
        let bias = self.bias.value.data();
        let mut z = vec![0.0; b * h];
        for t in 0..l {
            for bi in 0..b {
                for j in 0..h {
                    z[bi * h + j] = xw[(bi * l + t) * h + j] + bias[j];
                }
            }
            let h_prev = &hidden[t * b * h..(t + 1) * b * h];
            gemm(b, h, h, h_prev, Op::N, self.recurrent_weights.value.data(), Op::T, 1.0, &mut z);
            for bi in 0..b {
                for j in 0..h {
                    let v = z[bi * h + j].tanh();
                    hidden[(t + 1) * b * h + bi * h + j] = v;
                    out[(bi * l + t) * h + j] = v;
                }
            }
        }
        self.cache = Some(RnnCache {
            batch: b,
            len: l,
            x: input.data().to_vec(),
            hidden,
        });
        Tensor::from_vec(&[b, l, h], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache("rnn"))?;
        let (b, l) = (cache.batch, cache.len);
        let (d, h) = (self.input_dim(), self.hidden_dim());
        grad_output.expect_shape("rnn backward", &[b, l, h])?;
        let g = grad_output.data();
        let mut dpre = vec![0.0; b * l * h];
        let mut dz = vec![0.0; b * h];
        let mut dh_next = vec![0.0; b * h];
        for t in (0..l).rev() {
            let h_t = &cache.hidden[(t + 1) * b * h..(t + 2) * b * h];
            for bi in 0..b {
                for j in 0..h {
                    let k = bi * h + j;
                    let dh = g[(bi * l + t) * h + j] + dh_next[k];
                    dz[k] = dh * (1.0 - h_t[k] * h_t[k]);
                    dpre[(bi * l + t) * h + j] = dz[k];
                }
            }
            let h_prev = &cache.hidden[t * b * h..(t + 1) * b * h];
            gemm(h, b, h, &dz, Op::T, h_prev, Op::N, 1.0, self.recurrent_weights.grad.data_mut());
            gemm(b, h, h, &dz, Op::N, self.recurrent_weights.value.data(), Op::N, 0.0, &mut dh_next);
        }
        gemm(h, b * l, d, &dpre, Op::T, &cache.x, Op::N, 1.0, self.input_weights.grad.data_mut());
        add_col_sums(&dpre, self.bias.grad.data_mut());
        let mut dx = vec![0.0; b * l * d];
        gemm(b * l, h, d, &dpre, Op::N, self.input_weights.value.data(), Op::N, 0.0, &mut dx);
        Tensor::from_vec(&[b, l, d], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }
}

/// Gated recurrent unit, gate blocks stacked as update, reset, candidate:
///
/// ```text
/// z = σ(W_z x + U_z h + b_z)
/// r = σ(W_r x + U_r h + b_r)
/// n = tanh(W_n x + U_n (r ∘ h) + b_n)
/// h' = z ∘ h + (1 − z) ∘ n
/// ```
#[derive(Clone, Debug)]
pub struct Gru {
    pub input_weights: Param,
    pub recurrent_weights: Param,
    pub bias: Param,
    cache: Option<GruCache>,
}

#[derive(Clone, Debug)]
struct GruCache {
    batch: usize,
    len: usize,
    x: Vec<f64>,
    /// Activated (z, r, n) per step: L × B × 3H.
    gates: Vec<f64>,
    /// r ∘ h_{t−1} per step: L × B × H.
    reset_hidden: Vec<f64>,
    /// (L+1) × B × H.
    hidden: Vec<f64>,
}

impl Gru {
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::config(name, "gru dims must be >= 1"));
        }
        let (d, h) = (input_dim, hidden_dim);
        Ok(Self {
            input_weights: Param::new(
                format!("{name}.input_weights"),
                Tensor::uniform(&[3 * h, d], glorot_limit(d, 3 * h), rng),
            ),
            recurrent_weights: Param::new(
                format!("{name}.recurrent_weights"),
                Tensor::uniform(&[3 * h, h], glorot_limit(h, 3 * h), rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[3 * h])),
            cache: None,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.recurrent_weights.value.dim(1)
    }

    fn input_dim(&self) -> usize {
        self.input_weights.value.dim(1)
    }
}

impl Layer for Gru {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        input.expect_rank("gru", 3)?;
        let (b, l, d) = (input.dim(0), input.dim(1), input.dim(2));
        let h = self.hidden_dim();
        if d != self.input_dim() {
            return Err(Error::shape("gru input dim", self.input_dim(), d));
        }
        let h3 = 3 * h;
        let mut xw = vec![0.0; b * l * h3];
        gemm(b * l, d, h3, input.data(), Op::N, self.input_weights.value.data(), Op::T, 0.0, &mut xw);
        let u = self.recurrent_weights.value.data();
        let (u_zr, u_n) = u.split_at(2 * h * h);
        let bias = self.bias.value.data();

        let mut gates = vec![0.0; l * b * h3];
        let mut reset_hidden = vec![0.0; l * b * h];
        let mut hidden = vec![0.0; (l + 1) * b * h];
        let mut out = vec![0.0; b * l * h];
        let mut zr = vec![0.0; b * 2 * h];
        let mut nh = vec![0.0; b * h];
        for t in 0..l {
            let h_prev = hidden[t * b * h..(t + 1) * b * h].to_vec();
            zr.fill(0.0);
            gemm(b, h, 2 * h, &h_prev, Op::N, u_zr, Op::T, 0.0, &mut zr);
            let g = &mut gates[t * b * h3..(t + 1) * b * h3];
            let rh = &mut reset_hidden[t * b * h..(t + 1) * b * h];
            for bi in 0..b {
                let xr = &xw[(bi * l + t) * h3..(bi * l + t + 1) * h3];
                for j in 0..h {
                    let z = sigmoid(xr[j] + zr[bi * 2 * h + j] + bias[j]);
                    let r = sigmoid(xr[h + j] + zr[bi * 2 * h + h + j] + bias[h + j]);
                    g[bi * h3 + j] = z;
                    g[bi * h3 + h + j] = r;
                    rh[bi * h + j] = r * h_prev[bi * h + j];
                }
            }
            gemm(b, h, h, rh, Op::N, u_n, Op::T, 0.0, &mut nh);
            for bi in 0..b {
                let xr = &xw[(bi * l + t) * h3..(bi * l + t + 1) * h3];
                for j in 0..h {
                    let n = (xr[2 * h + j] + nh[bi * h + j] + bias[2 * h + j]).tanh();
                    g[bi * h3 + 2 * h + j] = n;
                    let z = g[bi * h3 + j];
                    let hv = z * h_prev[bi * h + j] + (1.0 - z) * n;
                    hidden[(t + 1) * b * h + bi * h + j] = hv;
                    out[(bi * l + t) * h + j] = hv;
                }
            }
        }
        self.cache = Some(GruCache {
            batch: b,
            len: l,
            x: input.data().to_vec(),
            gates,
            reset_hidden,
            hidden,
        });
        Tensor::from_vec(&[b, l, h], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache("gru"))?;
        let (b, l) = (cache.batch, cache.len);
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let h3 = 3 * h;
        grad_output.expect_shape("gru backward", &[b, l, h])?;
        let g_out = grad_output.data();
        let u = self.recurrent_weights.value.data().to_vec();
        let (u_zr, u_n) = u.split_at(2 * h * h);

        let mut dpre = vec![0.0; b * l * h3];
        let mut dh_next = vec![0.0; b * h];
        let mut d_zr = vec![0.0; b * 2 * h];
        let mut d_n = vec![0.0; b * h];
        let mut d_rh = vec![0.0; b * h];
        let mut tmp = vec![0.0; b * h];
        for t in (0..l).rev() {
            let gates = &cache.gates[t * b * h3..(t + 1) * b * h3];
            let h_prev = &cache.hidden[t * b * h..(t + 1) * b * h];
            let rh = &cache.reset_hidden[t * b * h..(t + 1) * b * h];
            let mut dh_prev = vec![0.0; b * h];
            for bi in 0..b {
                for j in 0..h {
                    let k = bi * h + j;
                    let (z, n) = (gates[bi * h3 + j], gates[bi * h3 + 2 * h + j]);
                    let dh = g_out[(bi * l + t) * h + j] + dh_next[k];
                    d_zr[bi * 2 * h + j] = dh * (h_prev[k] - n) * z * (1.0 - z);
                    d_n[k] = dh * (1.0 - z) * (1.0 - n * n);
                    dh_prev[k] = dh * z;
                }
            }
            // candidate path through U_n (r ∘ h)
            gemm(h, b, h, &d_n, Op::T, rh, Op::N, 1.0, &mut self.recurrent_weights.grad.data_mut()[2 * h * h..]);
            gemm(b, h, h, &d_n, Op::N, u_n, Op::N, 0.0, &mut d_rh);
            for bi in 0..b {
                for j in 0..h {
                    let k = bi * h + j;
                    let r = gates[bi * h3 + h + j];
                    d_zr[bi * 2 * h + h + j] = d_rh[k] * h_prev[k] * r * (1.0 - r);
                    dh_prev[k] += d_rh[k] * r;
                }
            }
            gemm(2 * h, b, h, &d_zr, Op::T, h_prev, Op::N, 1.0, &mut self.recurrent_weights.grad.data_mut()[..2 * h * h]);
            gemm(b, 2 * h, h, &d_zr, Op::N, u_zr, Op::N, 0.0, &mut tmp);
            for (a, v) in dh_prev.iter_mut().zip(&tmp) {
                *a += v;
            }
            for bi in 0..b {
                let row = &mut dpre[(bi * l + t) * h3..(bi * l + t + 1) * h3];
                row[..2 * h].copy_from_slice(&d_zr[bi * 2 * h..(bi + 1) * 2 * h]);
                row[2 * h..].copy_from_slice(&d_n[bi * h..(bi + 1) * h]);
            }
            dh_next = dh_prev;
        }
        gemm(h3, b * l, d, &dpre, Op::T, &cache.x, Op::N, 1.0, self.input_weights.grad.data_mut());
        add_col_sums(&dpre, self.bias.grad.data_mut());
        let mut dx = vec![0.0; b * l * d];
        gemm(b * l, h3, d, &dpre, Op::N, self.input_weights.value.data(), Op::N, 0.0, &mut dx);
        Tensor::from_vec(&[b, l, d], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn shapes_and_cache_errors() {
        let mut rng = SeededRng::seed_from_u64(0);
        let mut rnn = SimpleRnn::new("r", 3, 4, &mut rng).unwrap();
        let mut gru = Gru::new("g", 3, 4, &mut rng).unwrap();
        assert!(rnn.backward(&Tensor::zeros(&[1, 1, 4])).is_err());
        assert!(gru.backward(&Tensor::zeros(&[1, 1, 4])).is_err());
        let x = Tensor::uniform(&[2, 5, 3], 1.0, &mut rng);
        assert_eq!(rnn.forward(&x, Mode::Eval, &mut rng).unwrap().shape(), &[2, 5, 4]);
        assert_eq!(gru.forward(&x, Mode::Eval, &mut rng).unwrap().shape(), &[2, 5, 4]);
        assert_eq!(rnn.param_count(), 4 * 3 + 4 * 4 + 4);
        assert_eq!(gru.param_count(), 3 * (4 * 3 + 4 * 4 + 4));
    }
}
