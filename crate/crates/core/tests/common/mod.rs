//! Reference implementations used as test oracles. They share no code path
//! with the library beyond its public data types.
#![allow(dead_code)]

use dr_blend::dnn::{loss, Mlp};
use dr_blend::PoolMode;
use ndarray::{Array2, ArrayView2};

/// 1-based transcription of the pairwise pooling formulas:
/// out_i = op(u_{2i-1}, u_{2i}) for i = 1..=floor(d/2).
pub fn naive_pool1d(u: &[f32], mode: PoolMode) -> Vec<f64> {
    let d2 = u.len() / 2;
    let mut out = Vec::with_capacity(d2);
    let at = |k: usize| f64::from(u[k - 1]);
    for i in 1..=d2 {
        let (a, b) = (at(2 * i - 1), at(2 * i));
        out.push(match mode {
            PoolMode::Max => {
                if a >= b {
                    a
                } else {
                    b
                }
            }
            PoolMode::Min => {
                if a <= b {
                    a
                } else {
                    b
                }
            }
            PoolMode::Avg => (a + b) * 0.5,
            PoolMode::Sum => a + b,
        });
    }
    out
}

pub fn naive_cross_pool(x: &[f32], y: &[f32], mode: PoolMode) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (a, b) = (f64::from(x[i]), f64::from(y[i]));
        out.push(match mode {
            PoolMode::Max => {
                if a >= b {
                    a
                } else {
                    b
                }
            }
            PoolMode::Min => {
                if a <= b {
                    a
                } else {
                    b
                }
            }
            PoolMode::Avg => (a + b) * 0.5,
            PoolMode::Sum => a + b,
        });
    }
    out
}

/// Algorithm-style trace of the default blend (max 1-D pooling, then two
/// average cross poolings), written as explicit loops in f64.
pub fn literal_default_blend(v: &[f32], u: &[f32], w: &[f32]) -> Vec<f64> {
    let d = w.len();
    let mut x = vec![0.0; d];
    for i in 0..d {
        let v_hat = f64::from(v[2 * i]).max(f64::from(v[2 * i + 1]));
        let u_hat = f64::from(u[2 * i]).max(f64::from(u[2 * i + 1]));
        let uv = (v_hat + u_hat) / 2.0;
        x[i] = (uv + f64::from(w[i])) / 2.0;
    }
    x
}

fn batch_loss(
    m: &Mlp,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: Option<&Array2<f64>>,
) -> f64 {
    let cache = m.forward_masked(x, mask).unwrap();
    loss(cache.probabilities().view(), labels, m.config().task_kind).unwrap()
}

/// Largest relative error between backprop gradients and central
/// differences of the forward-pass loss, over every parameter.
pub fn max_gradient_rel_error(
    m: &Mlp,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: Option<&Array2<f64>>,
    h: f64,
) -> f64 {
    let (analytic, _) = m.gradients(x, labels, mask).unwrap();
    let mut probe = m.clone();
    let mut worst = 0.0f64;
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-6);

    for l in 0..m.layers().len() {
        let (rows, cols) = m.layers()[l].weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = probe.layers()[l].weights[[r, c]];
                probe.layers_mut()[l].weights[[r, c]] = orig + h;
                let up = batch_loss(&probe, x, labels, mask);
                probe.layers_mut()[l].weights[[r, c]] = orig - h;
                let down = batch_loss(&probe, x, labels, mask);
                probe.layers_mut()[l].weights[[r, c]] = orig;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max(rel(analytic.layers[l].weights[[r, c]], numeric));
            }
        }
        for c in 0..cols {
            let orig = probe.layers()[l].bias[c];
            probe.layers_mut()[l].bias[c] = orig + h;
            let up = batch_loss(&probe, x, labels, mask);
            probe.layers_mut()[l].bias[c] = orig - h;
            let down = batch_loss(&probe, x, labels, mask);
            probe.layers_mut()[l].bias[c] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel(analytic.layers[l].bias[c], numeric));
        }
    }
    worst
}
