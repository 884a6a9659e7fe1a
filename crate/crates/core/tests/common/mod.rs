//! Independent oracles shared by the integration suites. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use camtrap::manifest::{ImageRecord, LabelVocabulary, Manifest};
use camtrap::rng::SplitMix64;
use camtrap::trainer::{Gradients, Layer, ModelState};

/// Model with every parameter drawn from N(0, 1), Adam moments zero.
pub fn random_model(dims: &[usize], rng: &mut SplitMix64) -> ModelState {
    let layers = dims
        .windows(2)
        .map(|w| {
            let mut l = Layer::zeros(w[0], w[1]);
            l.weights.iter_mut().for_each(|v| *v = rng.normal());
            l.bias.iter_mut().for_each(|v| *v = rng.normal());
            l
        })
        .collect();
    ModelState { layers, step: 0 }
}

/// Pre-activations of every layer, computed directly from the weights.
fn preactivations(model: &ModelState, x: &[f64]) -> Vec<Vec<f64>> {
    let mut a = x.to_vec();
    let mut out = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        let z: Vec<f64> = (0..layer.out_dim)
            .map(|o| layer.bias[o] + (0..layer.in_dim).map(|i| layer.weights[o * layer.in_dim + i] * a[i]).sum::<f64>())
            .collect();
        if li + 1 < model.layers.len() {
            a = z.iter().map(|v| v.max(0.0)).collect();
        }
        out.push(z);
    }
    out
}

/// Summed BCE from logits in the overflow-free form, with no probability clamp,
/// so saturated outputs still have a slope.
fn loss(model: &ModelState, x: &[f64], t: &[f64]) -> f64 {
    let z = preactivations(model, x).pop().unwrap();
    z.iter().zip(t).map(|(z, t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p()).sum()
}

/// Central differences of the summed BCE with respect to every parameter.
pub fn finite_difference_gradient(model: &ModelState, x: &[f64], t: &[f64], h: f64) -> Gradients {
    let mut out = Gradients::zeros_like(model);
    let mut probe = model.clone();
    for li in 0..model.layers.len() {
        for pi in 0..model.layers[li].weights.len() {
            let orig = probe.layers[li].weights[pi];
            probe.layers[li].weights[pi] = orig + h;
            let up = loss(&probe, x, t);
            probe.layers[li].weights[pi] = orig - h;
            let down = loss(&probe, x, t);
            probe.layers[li].weights[pi] = orig;
            out.weights[li][pi] = (up - down) / (2.0 * h);
        }
        for pi in 0..model.layers[li].bias.len() {
            let orig = probe.layers[li].bias[pi];
            probe.layers[li].bias[pi] = orig + h;
            let up = loss(&probe, x, t);
            probe.layers[li].bias[pi] = orig - h;
            let down = loss(&probe, x, t);
            probe.layers[li].bias[pi] = orig;
            out.bias[li][pi] = (up - down) / (2.0 * h);
        }
    }
    out
}

/// Largest relative disagreement between two gradient sets, with a floor on the denominator.
pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    let flat = |g: &Gradients| -> Vec<f64> { g.weights.iter().chain(&g.bias).flatten().copied().collect() };
    flat(a)
        .into_iter()
        .zip(flat(b))
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Textbook Adam on a scalar, written out step by step.
pub fn reference_adam_trace(theta0: f64, grad: impl Fn(f64) -> f64, lrs: &[f64], beta1: f64, beta2: f64, eps: f64) -> Vec<f64> {
    let mut theta = theta0;
    let mut m = 0.0;
    let mut v = 0.0;
    let mut b1t = 1.0;
    let mut b2t = 1.0;
    let mut out = Vec::new();
    for lr in lrs {
        let g = grad(theta);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        b1t *= beta1;
        b2t *= beta2;
        let m_hat = m / (1.0 - b1t);
        let v_hat = v / (1.0 - b2t);
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(theta);
    }
    out
}

/// AggLogLoss computed directly from its definition: per sequence, the sum over
/// categories of binary log losses with 1e-15 clamping; then the plain mean
/// over sequences, and that mean divided by the category count.
pub fn brute_force_agg_log_loss(preds: &[Vec<f64>], truths: &[Vec<u8>]) -> (f64, f64) {
    let c = truths[0].len() as f64;
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        let mut s = 0.0;
        for (pi, ti) in p.iter().zip(t) {
            let q = pi.clamp(1e-15, 1.0 - 1e-15);
            s += if *ti == 1 { -q.ln() } else { -(1.0 - q).ln() };
        }
        total += s;
    }
    let raw = total / preds.len() as f64;
    (raw, raw / c)
}

pub fn vocabulary(names: &[&str]) -> LabelVocabulary {
    LabelVocabulary::new(names.iter().map(|s| s.to_string()).collect(), 0).unwrap()
}

/// One record per label row, each its own sequence, feature rows in order.
pub fn manifest_from_labels(vocab: &LabelVocabulary, labels: Vec<Vec<u8>>, season: impl Fn(usize) -> String) -> Manifest {
    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, labels)| ImageRecord {
            season: season(i),
            sequence_id: format!("S{i:06}"),
            image_id: "0".into(),
            feature_row: i,
            labels,
        })
        .collect();
    Manifest::new(vocab.clone(), records).unwrap()
}

/// Smallest |pre-activation| over the hidden layers for input `x`. Central
/// differences are meaningless within `h` of a ReLU kink.
pub fn min_hidden_margin(model: &ModelState, x: &[f64]) -> f64 {
    let mut z = preactivations(model, x);
    z.pop();
    z.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}
