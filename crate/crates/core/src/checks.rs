//! Gradient-check suite over every layer kind and whole models.

use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::model::{BaselineConfig, BaselineKind, DaqffConfig, DaqffModel, ModelGraph, ModelSpec};
use crate::nn::{
    gradient_check, nudge_from_zero, BiLstm, Conv1d, Dense, Dropout, DropoutSpec, Flatten, GradCheckReport, Gru,
    Layer, Lstm, LstmParams, LstmState, Padding, Relu, SeededRng, SimpleRnn,
};
use crate::tensor::Tensor;

/// Tolerance on the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    ConvSame,
    ConvValid,
    Dense,
    Relu,
    Flatten,
    Dropout,
    LstmStep,
    LstmSequence,
    BiLstm,
    Rnn,
    Gru,
    Daqff,
    CnnBaseline,
}

impl CheckKind {
    pub const LAYERS: [CheckKind; 11] = [
        CheckKind::ConvSame,
        CheckKind::ConvValid,
        CheckKind::Dense,
        CheckKind::Relu,
        CheckKind::Flatten,
        CheckKind::Dropout,
        CheckKind::LstmStep,
        CheckKind::LstmSequence,
        CheckKind::BiLstm,
        CheckKind::Rnn,
        CheckKind::Gru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::ConvSame => "conv1d (same)",
            CheckKind::ConvValid => "conv1d (valid)",
            CheckKind::Dense => "dense",
            CheckKind::Relu => "relu (nudged)",
            CheckKind::Flatten => "flatten",
            CheckKind::Dropout => "dropout (frozen mask)",
            CheckKind::LstmStep => "lstm step",
            CheckKind::LstmSequence => "lstm sequence",
            CheckKind::BiLstm => "bi-lstm",
            CheckKind::Rnn => "simple rnn",
            CheckKind::Gru => "gru",
            CheckKind::Daqff => "daqff end-to-end",
            CheckKind::CnnBaseline => "cnn baseline end-to-end",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub kind: CheckKind,
    pub seed: u64,
    pub report: GradCheckReport,
}

fn randomize_biases(layer: &mut dyn Layer, rng: &mut SeededRng) {
    for p in layer.params_mut() {
        if p.value.rank() == 1 {
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.2..0.2);
            }
        }
    }
}

/// The small end-to-end configuration: two branches of two channels,
/// six steps, convs `[(3,3),(2,1)]`, hidden width 3, two horizons.
pub fn small_daqff_config() -> DaqffConfig {
    let mut c = DaqffConfig::new(2, 2, 6, 2);
    c.conv_specs = vec![(3, 3), (2, 1)];
    c.branch_projection_dim = 3;
    c.bilstm_hidden = 3;
    c
}

/// Builds one randomized instance of `kind` with its input.
pub fn instance(kind: CheckKind, seed: u64) -> Result<(Box<dyn Layer>, Tensor)> {
    let mut rng = SeededRng::seed_from_u64(seed);
    let b = rng.random_range(1..=3);
    let (layer, input): (Box<dyn Layer>, Tensor) = match kind {
        CheckKind::ConvSame | CheckKind::ConvValid => {
            let c = rng.random_range(1..=3);
            let f = rng.random_range(1..=4);
            let k = rng.random_range(1..=4);
            let t = rng.random_range(k..=k + 4);
            let padding = if kind == CheckKind::ConvSame { Padding::Same } else { Padding::Valid };
            let conv = Conv1d::new("conv", c, f, k, padding, &mut rng)?;
            (Box::new(conv), Tensor::uniform(&[b, c, t], 1.0, &mut rng))
        }
        CheckKind::Dense => {
            let (i, o) = (rng.random_range(1..=5), rng.random_range(1..=4));
            let d = Dense::new("dense", i, o, &mut rng)?;
            (Box::new(d), Tensor::uniform(&[b, 2, i], 1.0, &mut rng))
        }
        CheckKind::Relu => {
            let x = nudge_from_zero(&Tensor::uniform(&[b, 5], 1.0, &mut rng), 1e-3);
            (Box::new(Relu::new()), x)
        }
        CheckKind::Flatten => (Box::new(Flatten::new()), Tensor::uniform(&[b, 2, 3], 1.0, &mut rng)),
        CheckKind::Dropout => {
            let d = Dropout::new(DropoutSpec::new(0.3)?);
            (Box::new(d), Tensor::uniform(&[b, 6], 1.0, &mut rng))
        }
        CheckKind::LstmStep => {
            let (d, h) = (rng.random_range(1..=3), rng.random_range(1..=3));
            let init = LstmState {
                h: Tensor::uniform(&[h], 0.5, &mut rng),
                s: Tensor::uniform(&[h], 0.5, &mut rng),
            };
            let lstm = Lstm::from_params(LstmParams::new("lstm", d, h, &mut rng)?).with_initial_state(init)?;
            (Box::new(lstm), Tensor::uniform(&[b, 1, d], 1.0, &mut rng))
        }
        CheckKind::LstmSequence => {
            let (d, h, l) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(2..=5));
            let lstm = Lstm::new("lstm", d, h, &mut rng)?;
            (Box::new(lstm), Tensor::uniform(&[b, l, d], 1.0, &mut rng))
        }
        CheckKind::BiLstm => {
            let (d, h, l) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
            let bi = BiLstm::new("bilstm", d, h, &mut rng)?;
            (Box::new(bi), Tensor::uniform(&[b, l, d], 1.0, &mut rng))
        }
        CheckKind::Rnn => {
            let (d, h, l) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
            let r = SimpleRnn::new("rnn", d, h, &mut rng)?;
            (Box::new(r), Tensor::uniform(&[b, l, d], 1.0, &mut rng))
        }
        CheckKind::Gru => {
            let (d, h, l) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
            let g = Gru::new("gru", d, h, &mut rng)?;
            (Box::new(g), Tensor::uniform(&[b, l, d], 1.0, &mut rng))
        }
        CheckKind::Daqff => {
            let c = small_daqff_config();
            let m = DaqffModel::build(c, &mut rng)?;
            (Box::new(m), Tensor::uniform(&[b, 2, 6, 2], 1.0, &mut rng))
        }
        CheckKind::CnnBaseline => {
            let mut c = BaselineConfig::new(BaselineKind::Cnn, 2, 2, 5, 2);
            c.conv_specs = vec![(3, 3), (2, 1)];
            let m = ModelGraph::build(ModelSpec::Baseline(c), &mut rng)?;
            (Box::new(m), Tensor::uniform(&[b, 2, 5, 2], 1.0, &mut rng))
        }
    };
    let mut layer = layer;
    randomize_biases(layer.as_mut(), &mut rng);
    Ok((layer, input))
}

pub fn check(kind: CheckKind, seed: u64) -> Result<SuiteEntry> {
    let (mut layer, input) = instance(kind, seed)?;
    let report = gradient_check(layer.as_mut(), &input, TOLERANCE)?;
    Ok(SuiteEntry { kind, seed, report })
}

/// Every layer kind plus both end-to-end graphs, `instances` seeds each.
pub fn gradient_suite(instances: usize) -> Result<Vec<SuiteEntry>> {
    let kinds = CheckKind::LAYERS.into_iter().chain([CheckKind::Daqff, CheckKind::CnnBaseline]);
    let mut out = Vec::new();
    for kind in kinds {
        for seed in 0..instances as u64 {
            out.push(check(kind, 1000 + seed)?);
        }
    }
    Ok(out)
}
