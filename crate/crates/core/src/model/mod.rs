//! Network assembly: the hybrid forecaster, baselines, and checkpoints.

mod baseline;
mod checkpoint;
mod daqff;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{Layer, Mode, Param, SeededRng};
use crate::tensor::Tensor;

pub use baseline::{
    persistence_forecast, BaselineConfig, BaselineKind, BaselineNet, CnnBaseline, Persistence,
    RecurrentBaseline, RecurrentCell,
};
pub use checkpoint::{load_checkpoint, parse_checkpoint, render_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use daqff::{Branch, DaqffConfig, DaqffModel};

/// Serializable description of any supported forecaster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    Daqff(DaqffConfig),
    Baseline(BaselineConfig),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Daqff(c) => c.validate(),
            ModelSpec::Baseline(c) => c.validate(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Daqff(_) => "daqff".into(),
            ModelSpec::Baseline(c) => c.kind.to_string(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ModelSpec::Daqff(c) => c.horizon,
            ModelSpec::Baseline(c) => c.horizon,
        }
    }

    pub fn lookup(&self) -> usize {
        match self {
            ModelSpec::Daqff(c) => c.lookup,
            ModelSpec::Baseline(c) => c.lookup,
        }
    }

    /// `(branches, channels per branch)` of the expected input.
    pub fn input_layout(&self) -> (usize, usize) {
        match self {
            ModelSpec::Daqff(c) => (c.branches, c.channels_per_branch),
            ModelSpec::Baseline(c) => (c.branches, c.channels),
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, ModelSpec::Baseline(c) if c.kind == BaselineKind::Persistence)
    }
}

#[derive(Clone, Debug)]
pub enum Net {
    Daqff(DaqffModel),
    Baseline(BaselineNet),
}

/// A built forecaster mapping B×n×L×D windows to B×H predictions.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    spec: ModelSpec,
    pub net: Net,
}

impl ModelGraph {
    pub fn build(spec: ModelSpec, rng: &mut SeededRng) -> Result<Self> {
        let net = match &spec {
            ModelSpec::Daqff(c) => Net::Daqff(DaqffModel::build(c.clone(), rng)?),
            ModelSpec::Baseline(c) => Net::Baseline(baseline::build_baseline_net(c, rng)?),
        };
        Ok(Self { spec, net })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    fn layer(&mut self) -> &mut dyn Layer {
        match &mut self.net {
            Net::Daqff(m) => m,
            Net::Baseline(BaselineNet::Recurrent(m)) => m,
            Net::Baseline(BaselineNet::Cnn(m)) => m,
            Net::Baseline(BaselineNet::Persistence(m)) => m,
        }
    }

    /// Eval-mode forward pass.
    pub fn predict(&mut self, x: &Tensor) -> Result<Tensor> {
        use rand::SeedableRng;
        // eval mode draws nothing from the generator
        self.forward(x, Mode::Eval, &mut SeededRng::seed_from_u64(0))
    }
}

impl Layer for ModelGraph {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
        self.layer().forward(input, mode, rng)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        self.layer().backward(grad_output)
    }

    fn params(&self) -> Vec<&Param> {
        match &self.net {
            Net::Daqff(m) => m.params(),
            Net::Baseline(BaselineNet::Recurrent(m)) => m.params(),
            Net::Baseline(BaselineNet::Cnn(m)) => m.params(),
            Net::Baseline(BaselineNet::Persistence(m)) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match &mut self.net {
            Net::Daqff(m) => m.params_mut(),
            Net::Baseline(BaselineNet::Recurrent(m)) => m.params_mut(),
            Net::Baseline(BaselineNet::Cnn(m)) => m.params_mut(),
            Net::Baseline(BaselineNet::Persistence(m)) => m.params_mut(),
        }
    }
}

pub fn build_daqff(config: DaqffConfig, rng: &mut SeededRng) -> Result<DaqffModel> {
    DaqffModel::build(config, rng)
}

/// Baseline with the default hidden width for a single-branch input.
pub fn build_baseline(
    kind: BaselineKind,
    lookup: usize,
    channels: usize,
    horizon: usize,
    rng: &mut SeededRng,
) -> Result<ModelGraph> {
    ModelGraph::build(
        ModelSpec::Baseline(BaselineConfig::new(kind, 1, channels, lookup, horizon)),
        rng,
    )
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn lstm_baseline_has_one_layer_of_128() {
        let mut rng = SeededRng::seed_from_u64(1);
        let g = build_baseline(BaselineKind::Lstm, 4, 3, 2, &mut rng).unwrap();
        match &g.net {
            Net::Baseline(BaselineNet::Recurrent(r)) => {
                assert_eq!(r.recurrent_layers(), 1);
                assert_eq!(r.hidden(), 128);
                assert!(matches!(r.cell, RecurrentCell::Lstm(_)));
            }
            _ => panic!("expected a recurrent baseline"),
        }
    }

    #[test]
    fn every_kind_produces_b_by_h() {
        let mut rng = SeededRng::seed_from_u64(2);
        let x = Tensor::uniform(&[3, 2, 5, 2], 1.0, &mut rng);
        for kind in BaselineKind::ALL {
            let mut c = BaselineConfig::new(kind, 2, 2, 5, 4);
            c.hidden = 6;
            c.conv_specs = vec![(3, 3), (2, 1)];
            let mut g = ModelGraph::build(ModelSpec::Baseline(c), &mut rng).unwrap();
            assert_eq!(g.predict(&x).unwrap().shape(), &[3, 4], "{kind}");
        }
    }

    #[test]
    fn persistence_repeats_target_channel() {
        let mut rng = SeededRng::seed_from_u64(3);
        let mut c = BaselineConfig::new(BaselineKind::Persistence, 1, 2, 3, 2);
        c.target = (0, 1);
        let mut g = ModelGraph::build(ModelSpec::Baseline(c), &mut rng).unwrap();
        let x = Tensor::from_vec(&[1, 1, 3, 2], vec![0., 1., 0., 2., 0., 5.]).unwrap();
        assert_eq!(g.predict(&x).unwrap().data(), &[5.0, 5.0]);
        assert_eq!(g.param_count(), 0);
    }

    #[test]
    fn spec_json_is_tagged() {
        let spec = ModelSpec::Daqff(DaqffConfig::new(1, 8, 24, 1));
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.starts_with("{\"daqff\":"), "{json}");
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }
}
