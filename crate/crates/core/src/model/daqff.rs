//! The hybrid forecaster: per-branch 1D-CNN stacks, branch concatenation,
//! a bidirectional LSTM and a linear fusion head.
//!
//! ```text
//! x: B×n×L×D
//!   branch i: B×L×D → (conv → relu)* over time → B×L×F → per-step dense → B×L×P
//!   concat over branches → B×L×(n·P) → dropout
//!   bilstm → B×L×2H; O = [h_fwd(t=L) ; h_bwd(t=1)] → dropout
//!   head: dense 2H → horizon (linear)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{BiLstm, Conv1d, Dense, Dropout, DropoutSpec, Layer, Mode, Padding, Param, Relu, SeededRng};
use crate::tensor::Tensor;

fn default_conv_specs() -> Vec<(usize, usize)> {
    vec![(64, 5), (32, 3), (16, 1)]
}

fn default_projection() -> usize {
    16
}

fn default_hidden() -> usize {
    128
}

fn default_dropout() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaqffConfig {
    pub branches: usize,
    pub channels_per_branch: usize,
    pub lookup: usize,
    pub horizon: usize,
    /// `(filters, kernel)` per convolution layer.
    #[serde(default = "default_conv_specs")]
    pub conv_specs: Vec<(usize, usize)>,
    #[serde(default = "default_projection")]
    pub branch_projection_dim: usize,
    #[serde(default = "default_hidden")]
    pub bilstm_hidden: usize,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default)]
    pub padding: Padding,
}

impl DaqffConfig {
    /// Default architecture for the given input and output shape.
    pub fn new(branches: usize, channels_per_branch: usize, lookup: usize, horizon: usize) -> Self {
        Self {
            branches,
            channels_per_branch,
            lookup,
            horizon,
            conv_specs: default_conv_specs(),
            branch_projection_dim: default_projection(),
            bilstm_hidden: default_hidden(),
            dropout_p: default_dropout(),
            padding: Padding::Same,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("branches", self.branches),
            ("channels_per_branch", self.channels_per_branch),
            ("lookup", self.lookup),
            ("horizon", self.horizon),
            ("branch_projection_dim", self.branch_projection_dim),
            ("bilstm_hidden", self.bilstm_hidden),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if self.conv_specs.is_empty() {
            return Err(Error::config("conv_specs", "must not be empty"));
        }
        if let Some((f, k)) = self.conv_specs.iter().find(|(f, k)| *f == 0 || *k == 0) {
            return Err(Error::config(
                "conv_specs",
                format!("filters and kernel must be >= 1, got ({f}, {k})"),
            ));
        }
        let mut t = self.lookup;
        if self.padding == Padding::Valid {
            for &(_, k) in &self.conv_specs {
                if t < k {
                    return Err(Error::config(
                        "lookup",
                        format!("valid padding shrinks the window below kernel {k}"),
                    ));
                }
                t = t - k + 1;
            }
        }
        DropoutSpec::new(self.dropout_p)?;
        Ok(())
    }

    /// Time steps reaching the Bi-LSTM.
    pub fn sequence_len(&self) -> usize {
        match self.padding {
            Padding::Same => self.lookup,
            Padding::Valid => self
                .conv_specs
                .iter()
                .fold(self.lookup, |t, &(_, k)| t + 1 - k),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub convs: Vec<Conv1d>,
    pub relus: Vec<Relu>,
    pub projection: Dense,
}

impl Branch {
    fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        // B×L×D → B×D×L for convolution over time
        let mut h = x.transpose_last2()?;
        for (conv, relu) in self.convs.iter_mut().zip(&mut self.relus) {
            h = conv.forward(&h, mode, rng)?;
            h = relu.forward(&h, mode, rng)?;
        }
        self.projection.forward(&h.transpose_last2()?, mode, rng)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = self.projection.backward(grad)?.transpose_last2()?;
        for (conv, relu) in self.convs.iter_mut().zip(&mut self.relus).rev() {
            g = relu.backward(&g)?;
            g = conv.backward(&g)?;
        }
        g.transpose_last2()
    }

    fn params(&self) -> Vec<&Param> {
        let mut p: Vec<&Param> = self.convs.iter().flat_map(|c| c.params()).collect();
        p.extend(self.projection.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        p.extend(self.projection.params_mut());
        p
    }
}

#[derive(Clone, Debug)]
pub struct DaqffModel {
    config: DaqffConfig,
    pub branches: Vec<Branch>,
    pub concat_dropout: Dropout,
    pub bilstm: BiLstm,
    pub state_dropout: Dropout,
    pub head: Dense,
    cache: Option<(usize, usize)>,
}

impl DaqffModel {
    /// Builds and initializes the network.
    ///
    /// Initialization order: for each branch, each conv layer, then its
    /// projection; then the forward and backward LSTMs; then the head.
    pub fn build(config: DaqffConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let mut branches = Vec::with_capacity(config.branches);
        for b in 0..config.branches {
            let mut convs = Vec::new();
            let mut relus = Vec::new();
            let mut c_in = config.channels_per_branch;
            for (j, &(filters, kernel)) in config.conv_specs.iter().enumerate() {
                convs.push(Conv1d::new(
                    &format!("branch{b}.conv{j}"),
                    c_in,
                    filters,
                    kernel,
                    config.padding,
                    rng,
                )?);
                relus.push(Relu::new());
                c_in = filters;
            }
            let projection = Dense::new(
                &format!("branch{b}.projection"),
                c_in,
                config.branch_projection_dim,
                rng,
            )?;
            branches.push(Branch {
                convs,
                relus,
                projection,
            });
        }
        let dropout = DropoutSpec::new(config.dropout_p)?;
        let bilstm = BiLstm::new(
            "bilstm",
            config.branches * config.branch_projection_dim,
            config.bilstm_hidden,
            rng,
        )?;
        let head = Dense::new("head", 2 * config.bilstm_hidden, config.horizon, rng)?;
        Ok(Self {
            config,
            branches,
            concat_dropout: Dropout::new(dropout),
            bilstm,
            state_dropout: Dropout::new(dropout),
            head,
            cache: None,
        })
    }

    pub fn config(&self) -> &DaqffConfig {
        &self.config
    }

    fn expect_input(&self, x: &Tensor) -> Result<()> {
        let c = &self.config;
        if x.rank() != 4
            || x.dim(1) != c.branches
            || x.dim(2) != c.lookup
            || x.dim(3) != c.channels_per_branch
        {
            return Err(Error::shape(
                "daqff input",
                format!("[B, {}, {}, {}]", c.branches, c.lookup, c.channels_per_branch),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }
}

/// `[h_fwd at the last step ; h_bwd at the first step]` from B×L×2H.
pub(crate) fn final_states(seq: &Tensor, hidden: usize) -> Result<Tensor> {
    let (b, l) = (seq.dim(0), seq.dim(1));
    let w = 2 * hidden;
    let mut out = vec![0.0; b * w];
    for bi in 0..b {
        let last = &seq.data()[(bi * l + l - 1) * w..(bi * l + l) * w];
        let first = &seq.data()[bi * l * w..(bi * l + 1) * w];
        out[bi * w..bi * w + hidden].copy_from_slice(&last[..hidden]);
        out[bi * w + hidden..(bi + 1) * w].copy_from_slice(&first[hidden..]);
    }
    Tensor::from_vec(&[b, w], out)
}

/// Scatters the gradient of [`final_states`] back onto B×L×2H.
pub(crate) fn final_states_backward(grad: &Tensor, len: usize, hidden: usize) -> Result<Tensor> {
    let b = grad.dim(0);
    let w = 2 * hidden;
    let mut out = vec![0.0; b * len * w];
    for bi in 0..b {
        let g = &grad.data()[bi * w..(bi + 1) * w];
        let last = (bi * len + len - 1) * w;
        out[last..last + hidden].copy_from_slice(&g[..hidden]);
        let first = bi * len * w;
        out[first + hidden..first + w].iter_mut().zip(&g[hidden..]).for_each(|(o, v)| *o += v);
    }
    Tensor::from_vec(&[b, len, w], out)
}

impl Layer for DaqffModel {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        self.expect_input(input)?;
        let mut features = Vec::with_capacity(self.branches.len());
        for (i, branch) in self.branches.iter_mut().enumerate() {
            features.push(branch.forward(&input.select_axis1(i)?, mode, rng)?);
        }
        let lc = Tensor::concat_last(&features)?;
        let lc = self.concat_dropout.forward(&lc, mode, rng)?;
        let seq = self.bilstm.forward(&lc, mode, rng)?;
        let len = seq.dim(1);
        let o = final_states(&seq, self.config.bilstm_hidden)?;
        let o = self.state_dropout.forward(&o, mode, rng)?;
        let y = self.head.forward(&o, mode, rng)?;
        y.expect_finite("daqff output")?;
        self.cache = Some((input.dim(0), len));
        Ok(y)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (b, len) = self.cache.ok_or(Error::MissingCache("daqff"))?;
        grad_output.expect_shape("daqff backward", &[b, self.config.horizon])?;
        let g = self.head.backward(grad_output)?;
        let g = self.state_dropout.backward(&g)?;
        let g = final_states_backward(&g, len, self.config.bilstm_hidden)?;
        let g = self.bilstm.backward(&g)?;
        let g = self.concat_dropout.backward(&g)?;
        let widths = vec![self.config.branch_projection_dim; self.branches.len()];
        let parts = g.split_last(&widths)?;
        let mut grads = Vec::with_capacity(parts.len());
        for (branch, part) in self.branches.iter_mut().zip(&parts) {
            grads.push(branch.backward(part)?);
        }
        Tensor::stack_axis1(&grads)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p: Vec<&Param> = self.branches.iter().flat_map(|b| b.params()).collect();
        p.extend(self.bilstm.params());
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = self.branches.iter_mut().flat_map(|b| b.params_mut()).collect();
        p.extend(self.bilstm.params_mut());
        p.extend(self.head.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn defaults_match_published_architecture() {
        let c = DaqffConfig::new(1, 8, 1, 1);
        assert_eq!(c.conv_specs, vec![(64, 5), (32, 3), (16, 1)]);
        assert_eq!(c.bilstm_hidden, 128);
        assert_eq!(c.dropout_p, 0.3);
        assert_eq!(c.padding, Padding::Same);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_configs_are_named() {
        let mut c = DaqffConfig::new(1, 8, 9, 1);
        c.conv_specs.clear();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("conv_specs"), "{err}");
        let mut c = DaqffConfig::new(1, 8, 9, 1);
        c.horizon = 0;
        assert!(c.validate().unwrap_err().to_string().contains("horizon"));
        let mut c = DaqffConfig::new(1, 8, 2, 1);
        c.padding = Padding::Valid;
        assert!(c.validate().is_err());
    }

    #[test]
    fn final_state_selection_round_trip() {
        let seq = Tensor::from_vec(&[1, 3, 4], (0..12).map(f64::from).collect()).unwrap();
        let o = final_states(&seq, 2).unwrap();
        // forward half at t=L (8, 9); backward half at t=1 (2, 3)
        assert_eq!(o.data(), &[8.0, 9.0, 2.0, 3.0]);
        let g = final_states_backward(&Tensor::full(&[1, 4], 1.0), 3, 2).unwrap();
        assert_eq!(g.data(), &[0., 0., 1., 1., 0., 0., 0., 0., 1., 1., 0., 0.]);
    }

    #[test]
    fn output_shape_law() {
        let mut rng = SeededRng::seed_from_u64(0);
        let mut c = DaqffConfig::new(3, 4, 8, 6);
        c.conv_specs = vec![(5, 3), (4, 1)];
        c.bilstm_hidden = 6;
        let mut m = DaqffModel::build(c, &mut rng).unwrap();
        let x = Tensor::uniform(&[2, 3, 8, 4], 1.0, &mut rng);
        let y = m.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y.shape(), &[2, 6]);
        assert!(m.forward(&Tensor::zeros(&[2, 2, 8, 4]), Mode::Eval, &mut rng).is_err());
    }
}
