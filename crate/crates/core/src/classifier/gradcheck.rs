//! Finite-difference verification of the backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{Cnn3, Cnn3Spec, Tensor, Workspace};
use crate::seed;
use crate::{Error, Result};

/// Below this magnitude gradients are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor name, max relative error)` per parameter tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub num_params: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Analytic gradient of `loss_scale * cross_entropy(x, label)`.
pub fn analytic_gradient(
    model: &Cnn3<f64>,
    x: &[f64],
    label: usize,
    loss_scale: f64,
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(model.spec());
    let mut grad = vec![0.0; model.num_params()];
    model.accumulate_gradient(x, label, loss_scale, &mut ws, &mut grad)?;
    Ok(grad)
}

/// Central-difference gradient with step `h`.
pub fn numeric_gradient(model: &Cnn3<f64>, x: &[f64], label: usize, h: f64) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(model.num_params());
    for i in 0..model.num_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = probe.loss(&[x], &[label])?;
        probe.params_mut()[i] = orig - h;
        let down = probe.loss(&[x], &[label])?;
        probe.params_mut()[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Compares analytic and central-difference gradients of every parameter
/// of a freshly initialized `spec` network on a random input and label.
pub fn gradient_check(spec: Cnn3Spec, step: f64, check_seed: u64) -> Result<GradCheckReport> {
    let model = Cnn3::<f64>::init(spec, check_seed)?;
    let mut rng = seed::derived_stream(check_seed, &[0x6763]);
    let x: Vec<f64> = (0..spec.input_len())
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let label = rng.random_range(0..spec.num_classes);
    check_model(&model, &x, label, step)
}

pub fn check_model(
    model: &Cnn3<f64>,
    x: &[f64],
    label: usize,
    step: f64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradient(model, x, label, 1.0)?;
    let numeric = numeric_gradient(model, x, label, step)?;
    if let Some(i) = analytic.iter().chain(&numeric).position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient component {i}")));
    }
    let layout = model.layout();
    let per_tensor: Vec<(String, f64)> = Tensor::ALL
        .iter()
        .map(|&t| {
            let worst = layout
                .range(t)
                .map(|i| relative_error(analytic[i], numeric[i]))
                .fold(0.0, f64::max);
            (t.name().to_string(), worst)
        })
        .collect();
    Ok(GradCheckReport {
        max_relative_error: per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max),
        per_tensor,
        num_params: model.num_params(),
    })
}
