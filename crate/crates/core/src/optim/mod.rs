//! Squared-error objective, Adam, and the deterministic training loop.

mod adam;
mod train;

pub use adam::{adam_step, AdamState};
pub use train::{fit, fit_with, predict_batched, EpochRecord, TrainConfig, TrainLog};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean squared error over all `B·H` elements and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    mse_loss_scaled(pred, target, pred.len())
}

/// As [`mse_loss`], but normalized by `denom` elements. Lets a batch split into
/// chunks produce partial sums of the full-batch loss and gradient.
pub(crate) fn mse_loss_scaled(pred: &Tensor, target: &Tensor, denom: usize) -> Result<(f64, Tensor)> {
    target.expect_shape("mse_loss", pred.shape())?;
    if pred.is_empty() || denom == 0 {
        return Err(Error::Empty("mse_loss batch".into()));
    }
    let n = denom as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    Ok((loss / n, Tensor::from_vec(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let z = Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
        let (l, g) = mse_loss(&z, &z).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));

        let (l, g) = mse_loss(&Tensor::full(&[1, 1], 2.0), &Tensor::zeros(&[1, 1])).unwrap();
        assert_eq!((l, g.data()), (4.0, &[4.0][..]));

        let p = Tensor::from_vec(&[1, 2], vec![1.0, 3.0]).unwrap();
        assert_eq!(mse_loss(&p, &z).unwrap().0, 5.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(mse_loss(&Tensor::zeros(&[1, 2]), &Tensor::zeros(&[2, 1])).is_err());
    }
}
