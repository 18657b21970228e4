//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use daqff::nn::LstmParams;
use daqff::Tensor;

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Straight loops over (batch, filter, position, channel, tap).
pub fn naive_conv(x: &Tensor, w: &Tensor, bias: &Tensor, same: bool) -> Vec<f64> {
    let (b, c, t) = (x.dim(0), x.dim(1), x.dim(2));
    let (f, k) = (w.dim(0), w.dim(2));
    let left = if same { (k - 1) / 2 } else { 0 };
    let out_len = if same { t } else { t - k + 1 };
    let mut y = Vec::with_capacity(b * f * out_len);
    for bi in 0..b {
        for fi in 0..f {
            for o in 0..out_len {
                let mut acc = bias.data()[fi];
                for ci in 0..c {
                    for ki in 0..k {
                        let pos = (o + ki) as isize - left as isize;
                        if (0..t as isize).contains(&pos) {
                            acc += w.data()[(fi * c + ci) * k + ki] * x.data()[(bi * c + ci) * t + pos as usize];
                        }
                    }
                }
                y.push(acc);
            }
        }
    }
    y
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Hidden sequence of one sample (L×D → L×H), unrolled gate by gate.
pub fn unrolled_lstm(x: &[Vec<f64>], p: &LstmParams, hidden: usize) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let u = p.input_weights.value.data();
    let w = p.recurrent_weights.value.data();
    let b = p.bias.value.data();
    let (mut h, mut s) = (vec![0.0; hidden], vec![0.0; hidden]);
    let mut out = Vec::new();
    for xt in x {
        let pre = |gate: usize, j: usize, h: &[f64]| {
            let row = gate * hidden + j;
            let mut acc = b[row];
            for k in 0..d {
                acc += u[row * d + k] * xt[k];
            }
            for k in 0..hidden {
                acc += w[row * hidden + k] * h[k];
            }
            acc
        };
        let mut hn = vec![0.0; hidden];
        for j in 0..hidden {
            let i = sigmoid(pre(0, j, &h));
            let f = sigmoid(pre(1, j, &h));
            let o = sigmoid(pre(2, j, &h));
            let cand = pre(3, j, &h).tanh();
            s[j] = f * s[j] + i * cand;
            hn[j] = o * s[j].tanh();
        }
        h = hn;
        out.push(h.clone());
    }
    out
}
