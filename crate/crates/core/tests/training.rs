use proptest::prelude::*;
use rand::SeedableRng;

use daqff::data::{encode_categoricals, make_windows, minmax_apply, minmax_fit, synth_table, CsvSchema, SynthKind};
use daqff::model::{DaqffConfig, ModelGraph, ModelSpec};
use daqff::nn::{init_rng, Param, SeededRng};
use daqff::optim::{adam_step, fit, mse_loss, AdamState, TrainConfig};
use daqff::parallel::Execution;
use daqff::Tensor;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mse_is_non_negative_and_zero_only_on_equality(
        rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()
    ) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let p = Tensor::uniform(&[rows, cols], 3.0, &mut rng);
        let t = Tensor::uniform(&[rows, cols], 3.0, &mut rng);
        prop_assert!(mse_loss(&p, &t).unwrap().0 > 0.0);
        prop_assert_eq!(mse_loss(&p, &p).unwrap().0, 0.0);
    }

    #[test]
    fn mse_gradient_matches_central_differences(rows in 1usize..4, cols in 1usize..4, seed in any::<u64>()) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let p = Tensor::uniform(&[rows, cols], 3.0, &mut rng);
        let t = Tensor::uniform(&[rows, cols], 3.0, &mut rng);
        let (_, grad) = mse_loss(&p, &t).unwrap();
        let step = 1e-5;
        for i in 0..p.len() {
            let (mut up, mut down) = (p.clone(), p.clone());
            up.data_mut()[i] += step;
            down.data_mut()[i] -= step;
            let numeric = (mse_loss(&up, &t).unwrap().0 - mse_loss(&down, &t).unwrap().0) / (2.0 * step);
            prop_assert!((numeric - grad.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_moves_against_a_constant_gradient(g in prop_oneof![-10.0f64..-1e-6, 1e-6f64..10.0], steps in 1usize..50) {
        let mut param = Param::new("w", Tensor::full(&[1], 0.5));
        let mut state = AdamState::for_params(&[&param]);
        let cfg = TrainConfig::new(0);
        for _ in 0..steps {
            let before = param.value.data()[0];
            param.grad.data_mut()[0] = g;
            adam_step(vec![&mut param], &mut state, &cfg).unwrap();
            let delta = param.value.data()[0] - before;
            prop_assert!(delta != 0.0 && delta.signum() == -g.signum());
        }
    }
}

#[test]
fn loss_falls_on_the_linear_fixture() {
    let table = synth_table(SynthKind::Linear, 200, 1, 0).unwrap();
    let table = encode_categoricals(&table, &CsvSchema::beijing().categoricals, false).unwrap();
    let table = minmax_apply(&table, &minmax_fit(&table, 0..table.len()).unwrap()).unwrap();
    let w = make_windows(&table, 6, 2).unwrap();
    let mut c = DaqffConfig::new(1, 8, 6, 2);
    c.conv_specs = vec![(8, 3)];
    c.branch_projection_dim = 4;
    c.bilstm_hidden = 8;
    let mut model = ModelGraph::build(ModelSpec::Daqff(c), &mut init_rng(1)).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::new(1)
    };
    let losses = fit(&mut model, &w.inputs, &w.targets, &cfg, Execution::default()).unwrap().losses();
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
}
