//! Central finite-difference check of [`Network::backward`].
//!
//! A probe whose `+h` or `-h` evaluation flips the sign of any ReLU input is
//! not differentiable across the step; such probes are counted in
//! `kinks` and left out of the error.

use alloc::vec::Vec;

use super::{seeded_rng, uniform, LayerSpec, Network, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-7)`.
    pub max_rel_error: f64,
    /// Number of compared entries.
    pub checked: usize,
    /// Where the largest error occurred: parameter tensor index, or `None` for the input.
    pub worst_tensor: Option<usize>,
    /// Probes skipped because the step crossed a ReLU kink.
    pub kinks: usize,
}

/// Loss value and the activation pattern of every rectifier input.
fn evaluate(net: &Network, x: &Tensor, r: &Tensor) -> Result<(f64, Vec<bool>)> {
    let (out, trace) = net.forward(x)?;
    let loss = out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum();
    let mut pattern = Vec::new();
    for (layer, input) in net.spec().layers.iter().zip(&trace.inputs) {
        if matches!(layer, LayerSpec::Relu | LayerSpec::LeakyRelu(_)) {
            pattern.extend(input.data().iter().map(|&v| v > 0.0));
        }
    }
    Ok((loss, pattern))
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

/// Indices to probe in a tensor of `len` entries: all of them, or `limit`
/// distinct seeded picks.
fn probe_indices(len: usize, limit: Option<usize>, rng: &mut super::Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if let Some(limit) = limit {
        if limit < len {
            super::shuffle(&mut idx, rng);
            idx.truncate(limit);
            idx.sort_unstable();
        }
    }
    idx
}

/// Compare analytic gradients of `L = sum(r * net(input))`, `r` a seeded
/// random tensor in `[-1, 1)`, with central differences of step `h`.
pub fn gradient_check(net: &Network, input: &Tensor, h: f64, per_tensor: Option<usize>, seed: u64) -> Result<GradCheck> {
    let mut rng = seeded_rng(seed);
    let out = net.predict(input)?;
    let r: Vec<f64> = (0..out.len()).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
    let r = Tensor::from_vec(out.shape().to_vec(), r)?;
    let (_, trace) = net.forward(input)?;
    let (_, base) = evaluate(net, input, &r)?;
    let grads = net.backward(&trace, &r)?;

    let mut report = GradCheck { max_rel_error: 0.0, checked: 0, worst_tensor: None, kinks: 0 };
    let record = |report: &mut GradCheck, analytic: f64, up: (f64, Vec<bool>), down: (f64, Vec<bool>), tensor| {
        if up.1 != base || down.1 != base {
            report.kinks += 1;
            return;
        }
        let e = rel_error(analytic, (up.0 - down.0) / (2.0 * h));
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst_tensor = tensor;
        }
        report.checked += 1;
    };
    let mut probe = net.clone();
    for t in 0..net.params().len() {
        for i in probe_indices(net.params()[t].len(), per_tensor, &mut rng) {
            let orig = net.params()[t].data()[i];
            probe.params_mut()[t].data_mut()[i] = orig + h;
            let up = evaluate(&probe, input, &r)?;
            probe.params_mut()[t].data_mut()[i] = orig - h;
            let down = evaluate(&probe, input, &r)?;
            probe.params_mut()[t].data_mut()[i] = orig;
            record(&mut report, grads.params[t].data()[i], up, down, Some(t));
        }
    }
    let mut x = input.clone();
    for i in probe_indices(input.len(), per_tensor, &mut rng) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let up = evaluate(net, &x, &r)?;
        x.data_mut()[i] = orig - h;
        let down = evaluate(net, &x, &r)?;
        x.data_mut()[i] = orig;
        record(&mut report, grads.input.data()[i], up, down, None);
    }
    Ok(report)
}
