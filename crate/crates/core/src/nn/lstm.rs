//! LSTM and bidirectional LSTM with backpropagation through time.
//!
//! Gate blocks are stacked row-wise in the order input, forget, output,
//! candidate, so `input_weights` is 4H×D, `recurrent_weights` is 4H×H and
//! `bias` is 4H.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::{add_col_sums, gemm, Op};
use crate::nn::{glorot_limit, sigmoid, Layer, Mode, Param, SeededRng};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Clone, Debug)]
pub struct LstmParams {
    input_dim: usize,
    hidden_dim: usize,
    pub input_weights: Param,
    pub recurrent_weights: Param,
    pub bias: Param,
}

impl LstmParams {
    /// Glorot-uniform weights, zero biases except the forget gate (1.0).
    ///
    /// Draw order: input weights, then recurrent weights, row-major.
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::config(name, "lstm dims must be >= 1"));
        }
        let h4 = 4 * hidden_dim;
        let wx = Tensor::uniform(&[h4, input_dim], glorot_limit(input_dim, h4), rng);
        let wh = Tensor::uniform(&[h4, hidden_dim], glorot_limit(hidden_dim, h4), rng);
        let mut b = Tensor::zeros(&[h4]);
        b.data_mut()[hidden_dim..2 * hidden_dim].fill(1.0);
        Ok(Self::from_tensors(name, wx, wh, b))
    }

    pub fn zeros(name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let h4 = 4 * hidden_dim;
        Self::from_tensors(
            name,
            Tensor::zeros(&[h4, input_dim]),
            Tensor::zeros(&[h4, hidden_dim]),
            Tensor::zeros(&[h4]),
        )
    }

    fn from_tensors(name: &str, wx: Tensor, wh: Tensor, b: Tensor) -> Self {
        Self {
            input_dim: wx.dim(1),
            hidden_dim: wh.dim(1),
            input_weights: Param::new(format!("{name}.input_weights"), wx),
            recurrent_weights: Param::new(format!("{name}.recurrent_weights"), wh),
            bias: Param::new(format!("{name}.bias"), b),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// `(U, W, b)` for one gate: H×D, H×H and H, row-major.
    pub fn gate(&self, gate: Gate) -> (&[f64], &[f64], &[f64]) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let g = gate as usize;
        (
            &self.input_weights.value.data()[g * h * d..(g + 1) * h * d],
            &self.recurrent_weights.value.data()[g * h * h..(g + 1) * h * h],
            &self.bias.value.data()[g * h..(g + 1) * h],
        )
    }

    pub fn gate_mut(&mut self, gate: Gate) -> (&mut [f64], &mut [f64], &mut [f64]) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let g = gate as usize;
        (
            &mut self.input_weights.value.data_mut()[g * h * d..(g + 1) * h * d],
            &mut self.recurrent_weights.value.data_mut()[g * h * h..(g + 1) * h * h],
            &mut self.bias.value.data_mut()[g * h..(g + 1) * h],
        )
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden_dim * self.input_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.bias,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub s: Tensor,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[hidden]),
            s: Tensor::zeros(&[hidden]),
        }
    }
}

/// One LSTM step for a single sample.
pub fn lstm_step(x_t: &Tensor, prev: &LstmState, params: &LstmParams) -> Result<LstmState> {
    let (d, h) = (params.input_dim, params.hidden_dim);
    x_t.expect_shape("lstm_step x_t", &[d])?;
    prev.h.expect_shape("lstm_step h", &[h])?;
    prev.s.expect_shape("lstm_step s", &[h])?;
    let x = x_t.data();
    let hp = prev.h.data();
    let pre = |gate: Gate, j: usize| {
        let (u, w, b) = params.gate(gate);
        let ux: f64 = u[j * d..(j + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
        let wh: f64 = w[j * h..(j + 1) * h].iter().zip(hp).map(|(a, b)| a * b).sum();
        ux + wh + b[j]
    };
    let mut hn = vec![0.0; h];
    let mut sn = vec![0.0; h];
    for j in 0..h {
        let i = sigmoid(pre(Gate::Input, j));
        let f = sigmoid(pre(Gate::Forget, j));
        let o = sigmoid(pre(Gate::Output, j));
        let cand = pre(Gate::Candidate, j).tanh();
        sn[j] = f * prev.s.data()[j] + i * cand;
        hn[j] = o * sn[j].tanh();
    }
    Ok(LstmState {
        h: Tensor::from_vec(&[h], hn)?,
        s: Tensor::from_vec(&[h], sn)?,
    })
}

/// Runs an LSTM over B×L×D from `init`, returning the hidden sequence B×L×H.
pub fn lstm_sequence_forward(x: &Tensor, params: &LstmParams, init: &LstmState) -> Result<Tensor> {
    let mut layer = Lstm::from_params(params.clone()).with_initial_state(init.clone())?;
    layer.forward(x, Mode::Eval, &mut SeededRng::seed_from_u64(0))
}

/// Bidirectional LSTM over B×L×D, returning `[h_fwd ; h_bwd]` per step (B×L×2H).
pub fn bilstm_forward(x: &Tensor, forward: &LstmParams, backward: &LstmParams) -> Result<Tensor> {
    let mut layer = BiLstm::from_params(forward.clone(), backward.clone())?;
    layer.forward(x, Mode::Eval, &mut SeededRng::seed_from_u64(0))
}

#[derive(Clone, Debug)]
pub struct Lstm {
    pub params: LstmParams,
    init: LstmState,
    cache: Option<LstmCache>,
}

#[derive(Clone, Debug)]
struct LstmCache {
    batch: usize,
    len: usize,
    /// Input rows ordered (b, t): (B·L)×D.
    x: Vec<f64>,
    /// Activated gates per step: L × B × 4H.
    gates: Vec<f64>,
    /// Cell states, index 0 is the initial state: (L+1) × B × H.
    cells: Vec<f64>,
    /// Hidden states, index 0 is the initial state: (L+1) × B × H.
    hidden: Vec<f64>,
    /// tanh of each cell state: L × B × H.
    tanh_cells: Vec<f64>,
}

impl Lstm {
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self::from_params(LstmParams::new(name, input_dim, hidden_dim, rng)?))
    }

    pub fn from_params(params: LstmParams) -> Self {
        let h = params.hidden_dim;
        Self {
            params,
            init: LstmState::zeros(h),
            cache: None,
        }
    }

    /// Sets the state every sequence starts from (zeros by default).
    pub fn with_initial_state(mut self, init: LstmState) -> Result<Self> {
        let h = self.params.hidden_dim;
        init.h.expect_shape("lstm initial h", &[h])?;
        init.s.expect_shape("lstm initial s", &[h])?;
        self.init = init;
        Ok(self)
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.hidden_dim
    }

    /// Activated gate values `(i, f, o, s̃)` of the last forward, L×B×4H.
    pub fn cached_gates(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|c| c.gates.as_slice())
    }
}

impl Layer for Lstm {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        input.expect_rank("lstm", 3)?;
        let (b, l, d) = (input.dim(0), input.dim(1), input.dim(2));
        let h = self.params.hidden_dim;
        if d != self.params.input_dim {
            return Err(Error::shape("lstm input dim", self.params.input_dim, d));
        }
        let h4 = 4 * h;
        let x = input.data();

        let mut xw = vec![0.0; b * l * h4];
        gemm(
            b * l,
            d,
            h4,
            x,
            Op::N,
            self.params.input_weights.value.data(),
            Op::T,
            0.0,
            &mut xw,
        );

        let mut gates = vec![0.0; l * b * h4];
        let mut cells = vec![0.0; (l + 1) * b * h];
        let mut hidden = vec![0.0; (l + 1) * b * h];
        let mut tanh_cells = vec![0.0; l * b * h];
        for bi in 0..b {
            cells[bi * h..(bi + 1) * h].copy_from_slice(self.init.s.data());
            hidden[bi * h..(bi + 1) * h].copy_from_slice(self.init.h.data());
        }
        let bias = self.params.bias.value.data();
        let wh = self.params.recurrent_weights.value.data();
        let mut out = vec![0.0; b * l * h];

        for t in 0..l {
            let z = &mut gates[t * b * h4..(t + 1) * b * h4];
            for bi in 0..b {
                let row = &mut z[bi * h4..(bi + 1) * h4];
                let src = &xw[(bi * l + t) * h4..(bi * l + t + 1) * h4];
                for ((zv, xv), bv) in row.iter_mut().zip(src).zip(bias) {
                    *zv = xv + bv;
                }
            }
            let (h_prev_all, h_next_all) = hidden.split_at_mut((t + 1) * b * h);
            let h_prev = &h_prev_all[t * b * h..];
            gemm(b, h, h4, h_prev, Op::N, wh, Op::T, 1.0, z);

            let (c_prev_all, c_next_all) = cells.split_at_mut((t + 1) * b * h);
            let c_prev = &c_prev_all[t * b * h..];
            let c_next = &mut c_next_all[..b * h];
            let h_next = &mut h_next_all[..b * h];
            let th = &mut tanh_cells[t * b * h..(t + 1) * b * h];
            for bi in 0..b {
                let zr = &mut z[bi * h4..(bi + 1) * h4];
                for j in 0..h {
                    let i = sigmoid(zr[j]);
                    let f = sigmoid(zr[h + j]);
                    let o = sigmoid(zr[2 * h + j]);
                    let g = zr[3 * h + j].tanh();
                    zr[j] = i;
                    zr[h + j] = f;
                    zr[2 * h + j] = o;
                    zr[3 * h + j] = g;
                    let s = f * c_prev[bi * h + j] + i * g;
                    let ts = s.tanh();
                    c_next[bi * h + j] = s;
                    th[bi * h + j] = ts;
                    let hv = o * ts;
                    h_next[bi * h + j] = hv;
                    out[(bi * l + t) * h + j] = hv;
                }
            }
        }
        self.cache = Some(LstmCache {
            batch: b,
            len: l,
            x: x.to_vec(),
            gates,
            cells,
            hidden,
            tanh_cells,
        });
        let out = Tensor::from_vec(&[b, l, h], out)?;
        out.expect_finite("lstm output")?;
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache("lstm"))?;
        let (b, l) = (cache.batch, cache.len);
        let (d, h) = (self.params.input_dim, self.params.hidden_dim);
        let h4 = 4 * h;
        grad_output.expect_shape("lstm backward", &[b, l, h])?;
        let g_out = grad_output.data();

        let mut dpre = vec![0.0; b * l * h4];
        let mut dz = vec![0.0; b * h4];
        let mut dh_next = vec![0.0; b * h];
        let mut ds_next = vec![0.0; b * h];
        let rw = &mut self.params.recurrent_weights;

        for t in (0..l).rev() {
            let gates = &cache.gates[t * b * h4..(t + 1) * b * h4];
            let c_prev = &cache.cells[t * b * h..(t + 1) * b * h];
            let th = &cache.tanh_cells[t * b * h..(t + 1) * b * h];
            for bi in 0..b {
                let gr = &gates[bi * h4..(bi + 1) * h4];
                let dzr = &mut dz[bi * h4..(bi + 1) * h4];
                for j in 0..h {
                    let (i, f, o, g) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let k = bi * h + j;
                    let dh = g_out[(bi * l + t) * h + j] + dh_next[k];
                    let ts = th[k];
                    let d_o = dh * ts;
                    let ds = dh * o * (1.0 - ts * ts) + ds_next[k];
                    let di = ds * g;
                    let dg = ds * i;
                    let df = ds * c_prev[k];
                    ds_next[k] = ds * f;
                    dzr[j] = di * i * (1.0 - i);
                    dzr[h + j] = df * f * (1.0 - f);
                    dzr[2 * h + j] = d_o * o * (1.0 - o);
                    dzr[3 * h + j] = dg * (1.0 - g * g);
                }
                dpre[(bi * l + t) * h4..(bi * l + t + 1) * h4].copy_from_slice(dzr);
            }
            let h_prev = &cache.hidden[t * b * h..(t + 1) * b * h];
            gemm(
                h4,
                b,
                h,
                &dz,
                Op::T,
                h_prev,
                Op::N,
                1.0,
                rw.grad.data_mut(),
            );
            gemm(b, h4, h, &dz, Op::N, rw.value.data(), Op::N, 0.0, &mut dh_next);
        }

        gemm(
            h4,
            b * l,
            d,
            &dpre,
            Op::T,
            &cache.x,
            Op::N,
            1.0,
            self.params.input_weights.grad.data_mut(),
        );
        add_col_sums(&dpre, self.params.bias.grad.data_mut());
        let mut dx = vec![0.0; b * l * d];
        gemm(
            b * l,
            h4,
            d,
            &dpre,
            Op::N,
            self.params.input_weights.value.data(),
            Op::N,
            0.0,
            &mut dx,
        );
        Tensor::from_vec(&[b, l, d], dx)
    }

    fn params(&self) -> Vec<&Param> {
        self.params.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.params.params_mut()
    }
}

/// Two independent LSTMs reading the sequence in opposite directions.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    /// Initializes the forward direction first, then the backward one.
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        let forward = Lstm::new(&format!("{name}.forward"), input_dim, hidden_dim, rng)?;
        let backward = Lstm::new(&format!("{name}.backward"), input_dim, hidden_dim, rng)?;
        Ok(Self { forward, backward })
    }

    pub fn from_params(forward: LstmParams, backward: LstmParams) -> Result<Self> {
        if forward.input_dim != backward.input_dim || forward.hidden_dim != backward.hidden_dim {
            return Err(Error::shape(
                "bilstm directions",
                format!("D={}, H={}", forward.input_dim, forward.hidden_dim),
                format!("D={}, H={}", backward.input_dim, backward.hidden_dim),
            ));
        }
        Ok(Self {
            forward: Lstm::from_params(forward),
            backward: Lstm::from_params(backward),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }
}

impl Layer for BiLstm {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        let fwd = self.forward.forward(input, mode, rng)?;
        let reversed = input.reverse_axis1()?;
        let bwd = self.backward.forward(&reversed, mode, rng)?.reverse_axis1()?;
        Tensor::concat_last(&[fwd, bwd])
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let h = self.hidden_dim();
        let parts = grad_output.split_last(&[h, h])?;
        let mut dx = self.forward.backward(&parts[0])?;
        let dx_rev = self.backward.backward(&parts[1].reverse_axis1()?)?;
        dx.add_assign(&dx_rev.reverse_axis1()?)?;
        Ok(dx)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }
}
