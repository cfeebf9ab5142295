//! Central finite-difference check of the analytic gradients.

use crate::error::Result;

use super::model::Model;

/// Denominator floor for relative errors, so entries whose true gradient is
/// numerically zero are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Location of the worst entry, e.g. `layer 2 tensor 0 [5]` or `input 1 [3]`.
    pub worst: String,
}

impl GradCheckReport {
    fn record(&mut self, err: f64, location: impl FnOnce() -> String) {
        self.checked += 1;
        if err > self.max_rel_error {
            self.max_rel_error = err;
            self.worst = location();
        }
    }
}

/// Compares every parameter gradient (and, with `check_inputs`, every input
/// gradient) of the mean batch loss against `(f(x+h) - f(x-h)) / 2h`.
pub fn check_gradients(
    model: &Model,
    inputs: &[Vec<f64>],
    labels: &[usize],
    h: f64,
    check_inputs: bool,
) -> Result<GradCheckReport> {
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let analytic = model.backward(&refs, labels, check_inputs)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: String::new(),
    };

    let mut probe = model.clone();
    for l in 0..model.layers.len() {
        for t in 0..model.layers[l].params.len() {
            for i in 0..model.layers[l].params[t].len() {
                let orig = model.layers[l].params[t][i];
                probe.layers[l].params[t][i] = orig + h;
                let up = probe.loss(&refs, labels)?;
                probe.layers[l].params[t][i] = orig - h;
                let down = probe.loss(&refs, labels)?;
                probe.layers[l].params[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let err = relative_error(analytic.grads.layers[l][t][i], numeric);
                report.record(err, || format!("layer {l} tensor {t} [{i}]"));
            }
        }
    }

    if check_inputs {
        for (n, grad) in analytic.input_grads.iter().enumerate() {
            let mut shifted = inputs.to_vec();
            for i in 0..inputs[n].len() {
                let orig = inputs[n][i];
                shifted[n][i] = orig + h;
                let up = model.loss(&shifted.iter().map(Vec::as_slice).collect::<Vec<_>>(), labels)?;
                shifted[n][i] = orig - h;
                let down = model.loss(&shifted.iter().map(Vec::as_slice).collect::<Vec<_>>(), labels)?;
                shifted[n][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                report.record(relative_error(grad[i], numeric), || format!("input {n} [{i}]"));
            }
        }
    }
    Ok(report)
}
