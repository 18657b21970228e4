//! Central finite-difference gradient checking.
//!
//! The scalar objective is the sum of all layer outputs. Every evaluation
//! runs in train mode with a generator reseeded to the same value, which
//! freezes dropout masks across evaluations.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, SeededRng};
use crate::tensor::Tensor;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Denominator floor of the relative error.
pub const FLOOR: f64 = 1e-8;
const CHECK_SEED: u64 = 0x5eed_c4ec;

#[derive(Clone, Debug)]
pub struct GroupError {
    /// Parameter name, or `"input"` for the input gradient.
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.groups.iter().fold(0.0, |m, g| m.max(g.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.tolerance
    }

    pub fn worst(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn objective(layer: &mut dyn Layer, input: &Tensor) -> Result<f64> {
    let mut rng = SeededRng::seed_from_u64(CHECK_SEED);
    Ok(layer.forward(input, Mode::Train, &mut rng)?.sum())
}

fn central_difference(layer: &mut dyn Layer, input: &Tensor, bump: impl Fn(&mut dyn Layer, &mut Tensor, f64)) -> Result<f64> {
    let mut x = input.clone();
    bump(layer, &mut x, STEP);
    let plus = objective(layer, &x)?;
    let mut x = input.clone();
    bump(layer, &mut x, -STEP);
    let minus = objective(layer, &x)?;
    bump(layer, &mut x, 0.0);
    Ok((plus - minus) / (2.0 * STEP))
}

fn group(name: String, analytic: &[f64], numeric: &[f64]) -> GroupError {
    let mut worst = GroupError {
        name,
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(a, n);
        if e > worst.max_rel_error || i == 0 {
            worst.max_rel_error = e;
            worst.worst_index = i;
            worst.analytic = a;
            worst.numeric = n;
        }
    }
    worst
}

/// Compares analytic gradients of `sum(layer(input))` against central
/// differences for every parameter element and every input element.
pub fn gradient_check(layer: &mut dyn Layer, input: &Tensor, tolerance: f64) -> Result<GradCheckReport> {
    let first = {
        let mut rng = SeededRng::seed_from_u64(CHECK_SEED);
        layer.forward(input, Mode::Train, &mut rng)?
    };
    let mut rng = SeededRng::seed_from_u64(CHECK_SEED);
    let second = layer.forward(input, Mode::Train, &mut rng)?;
    if first.data() != second.data() {
        return Err(Error::NonDeterministic(
            "repeated forward passes disagree".into(),
        ));
    }

    layer.zero_grad();
    let upstream = Tensor::full(second.shape(), 1.0);
    let input_grad = layer.backward(&upstream)?;
    let analytic: Vec<(String, Vec<f64>)> = layer
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let mut groups = Vec::with_capacity(analytic.len() + 1);
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grads.len());
        for e in 0..grads.len() {
            let original = layer.params()[pi].value.data()[e];
            let n = central_difference(layer, input, |l, _, h| {
                l.params_mut()[pi].value.data_mut()[e] = original + h;
            })?;
            numeric.push(n);
        }
        groups.push(group(name.clone(), grads, &numeric));
    }

    let mut numeric = Vec::with_capacity(input.len());
    for e in 0..input.len() {
        let original = input.data()[e];
        let n = central_difference(layer, input, |_, x, h| {
            x.data_mut()[e] = original + h;
        })?;
        numeric.push(n);
    }
    groups.push(group("input".into(), input_grad.data(), &numeric));

    // leave caches and grads consistent with the unperturbed input
    layer.zero_grad();
    objective(layer, input)?;

    Ok(GradCheckReport { groups, tolerance })
}

/// Pushes every element at least `margin` away from zero, keeping its sign.
pub fn nudge_from_zero(t: &Tensor, margin: f64) -> Tensor {
    t.map(|v| {
        if v.abs() >= margin {
            v
        } else if v >= 0.0 {
            v + margin
        } else {
            v - margin
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, Param, Relu};

    /// Wraps a layer and reports doubled analytic gradients.
    struct Doubled(Dense);

    impl Layer for Doubled {
        fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeededRng) -> Result<Tensor> {
            self.0.forward(input, mode, rng)
        }
        fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
            let dx = self.0.backward(g)?;
            for p in self.0.params_mut() {
                p.grad = p.grad.map(|v| 2.0 * v);
            }
            Ok(dx.map(|v| 2.0 * v))
        }
        fn params(&self) -> Vec<&Param> {
            self.0.params()
        }
        fn params_mut(&mut self) -> Vec<&mut Param> {
            self.0.params_mut()
        }
    }

    #[test]
    fn dense_passes_tightly() {
        let mut rng = SeededRng::seed_from_u64(10);
        let mut d = Dense::new("d", 4, 3, &mut rng).unwrap();
        d.bias.value = Tensor::uniform(&[3], 0.5, &mut rng);
        let x = Tensor::uniform(&[2, 4], 1.0, &mut rng);
        let report = gradient_check(&mut d, &x, 1e-6).unwrap();
        assert!(report.passed(), "{:?}", report.worst());
    }

    #[test]
    fn doubled_gradient_fails() {
        let mut rng = SeededRng::seed_from_u64(11);
        let d = Dense::new("d", 3, 2, &mut rng).unwrap();
        let x = Tensor::uniform(&[2, 3], 1.0, &mut rng);
        let report = gradient_check(&mut Doubled(d), &x, 1e-4).unwrap();
        assert!(!report.passed());
        assert!((report.max_error() - 0.5).abs() < 1e-6, "{}", report.max_error());
    }

    #[test]
    fn relu_checks_input_only() {
        let mut rng = SeededRng::seed_from_u64(12);
        let x = nudge_from_zero(&Tensor::uniform(&[3, 4], 1.0, &mut rng), 1e-3);
        let report = gradient_check(&mut Relu::new(), &x, 1e-4).unwrap();
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].name, "input");
        assert!(report.passed());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-12, 0.0) - 1e-4).abs() < 1e-15);
    }
}
