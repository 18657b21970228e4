//! Differentiable layer primitives with analytic backward passes.
//!
//! Every layer caches what it needs during `forward` and consumes that cache
//! in `backward`, which returns the gradient with respect to the layer input
//! and accumulates parameter gradients into each [`Param::grad`].

mod activation;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod init;
mod lstm;
mod recurrent;

pub use activation::{flatten, unflatten, Flatten, Relu};
pub use conv::{Conv1d, Padding};
pub use dense::Dense;
pub use dropout::{dropout_forward, Dropout, DropoutSpec};
pub use gradcheck::{gradient_check, nudge_from_zero, relative_error, GradCheckReport, GroupError};
pub use init::glorot_limit;
pub use lstm::{
    bilstm_forward, lstm_sequence_forward, lstm_step, BiLstm, Lstm, LstmParams, LstmState,
};
pub use recurrent::{Gru, SimpleRnn};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

/// The seeded generator shared by initialization, shuffling and dropout.
pub type SeededRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// A named parameter tensor and its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

pub trait Layer: Send {
    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor>;

    /// Returns ∂loss/∂input and accumulates ∂loss/∂params.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// Gradients detached from a parameter set, in parameter order.
#[derive(Clone, Debug)]
pub struct GradBuffer {
    grads: Vec<Tensor>,
}

impl GradBuffer {
    pub fn take<L: Layer + ?Sized>(layer: &L) -> Self {
        Self {
            grads: layer.params().iter().map(|p| p.grad.clone()).collect(),
        }
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }

    /// Adds `other` elementwise; both must come from the same parameter set.
    pub fn accumulate(&mut self, other: &GradBuffer) -> Result<()> {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    /// Writes the buffer into the layer's gradient slots.
    pub fn store_into<L: Layer + ?Sized>(&self, layer: &mut L) -> Result<()> {
        for (p, g) in layer.params_mut().into_iter().zip(&self.grads) {
            p.grad.expect_shape("GradBuffer::store_into", g.shape())?;
            p.grad.data_mut().copy_from_slice(g.data());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().all(Tensor::all_finite)
    }

    pub fn l2_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Generator for parameter initialization, on a stream separate from the one
/// [`crate::optim::fit`] uses for shuffling and dropout under the same seed.
pub fn init_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
