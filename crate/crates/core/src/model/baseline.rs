//! Reference forecasters: single-layer RNN/LSTM/GRU, a plain CNN stack and
//! persistence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    Conv1d, Dense, Dropout, DropoutSpec, Flatten, Gru, Layer, Lstm, Mode, Padding, Param, Relu,
    SeededRng, SimpleRnn,
};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Rnn,
    Lstm,
    Gru,
    Cnn,
    Persistence,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Rnn,
        BaselineKind::Lstm,
        BaselineKind::Gru,
        BaselineKind::Cnn,
        BaselineKind::Persistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Rnn => "rnn",
            BaselineKind::Lstm => "lstm",
            BaselineKind::Gru => "gru",
            BaselineKind::Cnn => "cnn",
            BaselineKind::Persistence => "persistence",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("kind", format!("unknown baseline `{s}`")))
    }
}

fn default_hidden() -> usize {
    128
}

fn default_conv_specs() -> Vec<(usize, usize)> {
    vec![(64, 5), (32, 3), (16, 1)]
}

fn default_dropout() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub branches: usize,
    pub channels: usize,
    pub lookup: usize,
    pub horizon: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_conv_specs")]
    pub conv_specs: Vec<(usize, usize)>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    /// `(branch, channel)` of the target series inside each window.
    #[serde(default)]
    pub target: (usize, usize),
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, branches: usize, channels: usize, lookup: usize, horizon: usize) -> Self {
        Self {
            kind,
            branches,
            channels,
            lookup,
            horizon,
            hidden: default_hidden(),
            conv_specs: default_conv_specs(),
            dropout_p: default_dropout(),
            target: (0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("branches", self.branches),
            ("channels", self.channels),
            ("lookup", self.lookup),
            ("horizon", self.horizon),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if self.target.0 >= self.branches || self.target.1 >= self.channels {
            return Err(Error::config("target", "outside the input layout"));
        }
        if self.kind == BaselineKind::Cnn && self.conv_specs.is_empty() {
            return Err(Error::config("conv_specs", "must not be empty"));
        }
        DropoutSpec::new(self.dropout_p)?;
        Ok(())
    }
}

/// Merges branches into channels: B×n×L×D → B×L×(n·D).
pub(crate) fn merge_branches(x: &Tensor) -> Result<Tensor> {
    let parts = (0..x.dim(1))
        .map(|i| x.select_axis1(i))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat_last(&parts)
}

pub(crate) fn split_branches(g: &Tensor, branches: usize) -> Result<Tensor> {
    let d = g.dim(2) / branches;
    Tensor::stack_axis1(&g.split_last(&vec![d; branches])?)
}

#[derive(Clone, Debug)]
pub enum RecurrentCell {
    Rnn(SimpleRnn),
    Lstm(Lstm),
    Gru(Gru),
}

impl RecurrentCell {
    fn layer(&mut self) -> &mut dyn Layer {
        match self {
            RecurrentCell::Rnn(l) => l,
            RecurrentCell::Lstm(l) => l,
            RecurrentCell::Gru(l) => l,
        }
    }

    fn params(&self) -> Vec<&Param> {
        match self {
            RecurrentCell::Rnn(l) => l.params(),
            RecurrentCell::Lstm(l) => l.params(),
            RecurrentCell::Gru(l) => l.params(),
        }
    }
}

/// One recurrent layer → last hidden state → dropout → linear head.
#[derive(Clone, Debug)]
pub struct RecurrentBaseline {
    config: BaselineConfig,
    pub cell: RecurrentCell,
    pub dropout: Dropout,
    pub head: Dense,
    cache: Option<(usize, usize)>,
}

impl RecurrentBaseline {
    fn build(config: BaselineConfig, rng: &mut SeededRng) -> Result<Self> {
        let d = config.branches * config.channels;
        let h = config.hidden;
        let cell = match config.kind {
            BaselineKind::Rnn => RecurrentCell::Rnn(SimpleRnn::new("rnn", d, h, rng)?),
            BaselineKind::Lstm => RecurrentCell::Lstm(Lstm::new("lstm", d, h, rng)?),
            BaselineKind::Gru => RecurrentCell::Gru(Gru::new("gru", d, h, rng)?),
            other => return Err(Error::config("kind", format!("{other} is not recurrent"))),
        };
        let head = Dense::new("head", h, config.horizon, rng)?;
        Ok(Self {
            dropout: Dropout::new(DropoutSpec::new(config.dropout_p)?),
            config,
            cell,
            head,
            cache: None,
        })
    }

    pub fn recurrent_layers(&self) -> usize {
        1
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }
}

impl Layer for RecurrentBaseline {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        let x = merge_branches(input)?;
        let seq = self.cell.layer().forward(&x, mode, rng)?;
        let (b, l) = (seq.dim(0), seq.dim(1));
        let last = seq.reshape(&[b * l, self.config.hidden])?.gather_rows(
            &(0..b).map(|bi| bi * l + l - 1).collect::<Vec<_>>(),
        );
        let h = self.dropout.forward(&last, mode, rng)?;
        self.cache = Some((b, l));
        self.head.forward(&h, mode, rng)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (b, l) = self.cache.ok_or(Error::MissingCache("recurrent baseline"))?;
        let h = self.config.hidden;
        let g = self.head.backward(grad_output)?;
        let g = self.dropout.backward(&g)?;
        let mut seq = vec![0.0; b * l * h];
        for bi in 0..b {
            seq[(bi * l + l - 1) * h..(bi * l + l) * h].copy_from_slice(&g.data()[bi * h..(bi + 1) * h]);
        }
        let dx = self.cell.layer().backward(&Tensor::from_vec(&[b, l, h], seq)?)?;
        split_branches(&dx, self.config.branches)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.cell.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = match &mut self.cell {
            RecurrentCell::Rnn(l) => l.params_mut(),
            RecurrentCell::Lstm(l) => l.params_mut(),
            RecurrentCell::Gru(l) => l.params_mut(),
        };
        p.extend(self.head.params_mut());
        p
    }
}

/// Conv stack (same padding, ReLU) → flatten → dropout → linear head.
#[derive(Clone, Debug)]
pub struct CnnBaseline {
    config: BaselineConfig,
    pub convs: Vec<Conv1d>,
    pub relus: Vec<Relu>,
    pub flatten: Flatten,
    pub dropout: Dropout,
    pub head: Dense,
}

impl CnnBaseline {
    fn build(config: BaselineConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut c_in = config.branches * config.channels;
        let mut convs = Vec::new();
        let mut relus = Vec::new();
        for (j, &(f, k)) in config.conv_specs.iter().enumerate() {
            convs.push(Conv1d::new(&format!("cnn.conv{j}"), c_in, f, k, Padding::Same, rng)?);
            relus.push(Relu::new());
            c_in = f;
        }
        let head = Dense::new("head", c_in * config.lookup, config.horizon, rng)?;
        Ok(Self {
            dropout: Dropout::new(DropoutSpec::new(config.dropout_p)?),
            config,
            convs,
            relus,
            flatten: Flatten::new(),
            head,
        })
    }
}

impl Layer for CnnBaseline {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        let mut h = merge_branches(input)?.transpose_last2()?;
        for (conv, relu) in self.convs.iter_mut().zip(&mut self.relus) {
            h = conv.forward(&h, mode, rng)?;
            h = relu.forward(&h, mode, rng)?;
        }
        let h = self.flatten.forward(&h, mode, rng)?;
        let h = self.dropout.forward(&h, mode, rng)?;
        self.head.forward(&h, mode, rng)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.head.backward(grad_output)?;
        let g = self.dropout.backward(&g)?;
        let mut g = self.flatten.backward(&g)?;
        for (conv, relu) in self.convs.iter_mut().zip(&mut self.relus).rev() {
            g = relu.backward(&g)?;
            g = conv.backward(&g)?;
        }
        split_branches(&g.transpose_last2()?, self.config.branches)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p: Vec<&Param> = self.convs.iter().flat_map(|c| c.params()).collect();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        p.extend(self.head.params_mut());
        p
    }
}

/// Repeats the last observed target value over the horizon.
#[derive(Clone, Debug)]
pub struct Persistence {
    horizon: usize,
    target: (usize, usize),
    input_shape: Option<Vec<usize>>,
}

impl Persistence {
    pub fn new(horizon: usize, target: (usize, usize)) -> Self {
        Self {
            horizon,
            target,
            input_shape: None,
        }
    }
}

/// `ŷ_{t+h} = y_t` for `h = 1…horizon`.
pub fn persistence_forecast(history: &[f64], horizon: usize) -> Result<Tensor> {
    let last = *history
        .last()
        .ok_or_else(|| Error::Empty("persistence history".into()))?;
    Tensor::from_vec(&[horizon], vec![last; horizon])
}

impl Layer for Persistence {
    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut SeededRng) -> Result<Tensor> {
        input.expect_rank("persistence", 4)?;
        let (b, n, l, d) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
        let (tb, tc) = self.target;
        if tb >= n || tc >= d {
            return Err(Error::shape("persistence target", format!("({tb}, {tc})"), format!("{:?}", input.shape())));
        }
        let mut out = Vec::with_capacity(b * self.horizon);
        for bi in 0..b {
            let v = input.data()[((bi * n + tb) * l + l - 1) * d + tc];
            out.extend(std::iter::repeat_n(v, self.horizon));
        }
        self.input_shape = Some(input.shape().to_vec());
        Tensor::from_vec(&[b, self.horizon], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or(Error::MissingCache("persistence"))?;
        let mut g = Tensor::zeros(shape);
        let (n, l, d) = (shape[1], shape[2], shape[3]);
        let (tb, tc) = self.target;
        for bi in 0..shape[0] {
            let s: f64 = grad_output.data()[bi * self.horizon..(bi + 1) * self.horizon].iter().sum();
            g.data_mut()[((bi * n + tb) * l + l - 1) * d + tc] = s;
        }
        Ok(g)
    }
}

#[derive(Clone, Debug)]
pub enum BaselineNet {
    Recurrent(RecurrentBaseline),
    Cnn(CnnBaseline),
    Persistence(Persistence),
}

pub(crate) fn build_baseline_net(config: &BaselineConfig, rng: &mut SeededRng) -> Result<BaselineNet> {
    config.validate()?;
    Ok(match config.kind {
        BaselineKind::Rnn | BaselineKind::Lstm | BaselineKind::Gru => {
            BaselineNet::Recurrent(RecurrentBaseline::build(config.clone(), rng)?)
        }
        BaselineKind::Cnn => BaselineNet::Cnn(CnnBaseline::build(config.clone(), rng)?),
        BaselineKind::Persistence => {
            BaselineNet::Persistence(Persistence::new(config.horizon, config.target))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("LSTM".parse::<BaselineKind>().unwrap(), BaselineKind::Lstm);
        assert_eq!("persistence".parse::<BaselineKind>().unwrap(), BaselineKind::Persistence);
        assert!("transformer".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn persistence_repeats_last_value() {
        assert_eq!(persistence_forecast(&[1.0, 3.0], 2).unwrap().data(), &[3.0, 3.0]);
        assert_eq!(persistence_forecast(&[7.0], 1).unwrap().data(), &[7.0]);
        assert!(persistence_forecast(&[], 3).is_err());
    }
}
