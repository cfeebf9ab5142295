//! Additive training-set corruption: white Gaussian noise and a linear ramp
//! (baseline drift). Strengths are in raw amplitude units.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{SignalRecord, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{derive_seed_u64, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Awgn,
    Linear,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Awgn => "awgn",
            NoiseKind::Linear => "linear",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseKind::None),
            "awgn" => Ok(NoiseKind::Awgn),
            "linear" => Ok(NoiseKind::Linear),
            other => Err(Error::invalid(format!("unknown noise kind `{other}`"))),
        }
    }
}

fn default_x_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Standard deviation for AWGN, slope per sample for LINEAR.
    pub strength: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sample-index scale for the ramp's abscissa (1 = raw sample index).
    #[serde(default = "default_x_scale")]
    pub x_scale: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::new(NoiseKind::None, 0.0, 0)
    }

    pub fn awgn(sigma: f64, seed: u64) -> Self {
        Self::new(NoiseKind::Awgn, sigma, seed)
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(NoiseKind::Linear, slope, 0)
    }

    pub fn new(kind: NoiseKind, strength: f64, seed: u64) -> Self {
        Self {
            kind,
            strength,
            seed,
            x_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != NoiseKind::None && !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::invalid(format!(
                "{} strength must be a non-negative finite number, got {}",
                self.kind, self.strength
            )));
        }
        if !(self.x_scale.is_finite() && self.x_scale > 0.0) {
            return Err(Error::invalid(format!("x_scale must be positive, got {}", self.x_scale)));
        }
        Ok(())
    }

    /// True when the spec leaves signals untouched.
    pub fn is_identity(&self) -> bool {
        self.kind == NoiseKind::None || self.strength == 0.0
    }

    /// Column label used in preview and report files, e.g. `awgn_40`.
    pub fn label(&self) -> String {
        match self.kind {
            NoiseKind::None => "none".to_string(),
            k => format!("{}_{}", k, self.strength),
        }
    }

    /// Applies the spec to one sequence, using `seed` for AWGN draws.
    pub fn apply_with_seed(&self, values: &[f64], seed: u64) -> Result<Vec<f64>> {
        match self.kind {
            NoiseKind::None => Ok(values.to_vec()),
            NoiseKind::Awgn => apply_awgn(values, self.strength, seed),
            NoiseKind::Linear => apply_linear_scaled(values, self.strength, self.x_scale),
        }
    }
}

/// Adds i.i.d. N(0, sigma) noise drawn from a stream fixed by `seed`.
pub fn apply_awgn(values: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = SeededRng::new(seed);
    Ok(values.iter().map(|v| v + sigma * rng.normal()).collect())
}

/// Adds the ramp `slope * i` for 0-based sample index `i`.
pub fn apply_linear(values: &[f64], slope: f64) -> Result<Vec<f64>> {
    apply_linear_scaled(values, slope, 1.0)
}

/// Adds the ramp `slope * (i * x_scale)`.
pub fn apply_linear_scaled(values: &[f64], slope: f64, x_scale: f64) -> Result<Vec<f64>> {
    if !(slope.is_finite() && slope >= 0.0) {
        return Err(Error::invalid(format!("slope must be >= 0, got {slope}")));
    }
    if slope == 0.0 {
        return Ok(values.to_vec());
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, v)| v + slope * (i as f64 * x_scale))
        .collect())
}

/// Corrupts every training window. AWGN windows draw from a per-window seed
/// derived from `(run_seed, position)`, so the result does not depend on
/// execution order. Only ever call this on the training split.
pub fn corrupt_training_set(
    windows: &[Window],
    spec: &NoiseSpec,
    run_seed: u64,
    exec: Execution,
) -> Result<Vec<Window>> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(windows.to_vec());
    }
    exec.map_indexed(windows, |pos, w| {
        let seed = derive_seed_u64(run_seed, &[pos as u64]);
        Ok(Window {
            values: spec.apply_with_seed(&w.values, seed)?,
            label: w.label.clone(),
            source_id: w.source_id.clone(),
        })
    })
    .into_iter()
    .collect()
}

/// Writes `index,clean,<one column per spec>` for a single record. Each spec
/// uses its own `seed` for AWGN.
pub fn preview(record: &SignalRecord, specs: &[NoiseSpec], out_path: &Path) -> Result<()> {
    if record.samples.is_empty() {
        return Err(Error::invalid("cannot preview an empty record"));
    }
    let columns: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| {
            s.validate()?;
            s.apply_with_seed(&record.samples, s.seed)
        })
        .collect::<Result<_>>()?;

    let mut out = String::from("index,clean");
    for s in specs {
        out.push(',');
        out.push_str(&s.label());
    }
    out.push('\n');
    for (i, clean) in record.samples.iter().enumerate() {
        out.push_str(&format!("{i},{clean}"));
        for col in &columns {
            out.push_str(&format!(",{}", col[i]));
        }
        out.push('\n');
    }
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(out_path, out).map_err(|e| Error::io(out_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassLabel;

    #[test]
    fn linear_on_zeros() {
        let out = apply_linear(&[0.0; 5], 0.2).unwrap();
        let expect = [0.0, 0.2, 0.4, 0.6000000000000001, 0.8];
        assert_eq!(out, expect);
        assert_eq!(apply_linear(&[5.0, 5.0], 0.8).unwrap(), vec![5.0, 5.8]);
    }

    #[test]
    fn zero_strength_is_identity() {
        let x = vec![1.5, -2.25, 3.0e5, f64::MIN_POSITIVE];
        assert_eq!(apply_awgn(&x, 0.0, 9).unwrap(), x);
        assert_eq!(apply_linear(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn negative_strength_rejected() {
        assert!(apply_awgn(&[1.0], -1.0, 0).is_err());
        assert!(apply_linear(&[1.0], -0.1).is_err());
    }

    #[test]
    fn awgn_is_deterministic() {
        let x = vec![0.0; 64];
        assert_eq!(apply_awgn(&x, 20.0, 3).unwrap(), apply_awgn(&x, 20.0, 3).unwrap());
        assert_ne!(apply_awgn(&x, 20.0, 3).unwrap(), apply_awgn(&x, 20.0, 4).unwrap());
    }

    #[test]
    fn none_kind_ignores_strength() {
        let w = vec![Window {
            values: vec![1.0, 2.0],
            label: ClassLabel { index: 0, name: "a".into() },
            source_id: "s".into(),
        }];
        let spec = NoiseSpec::new(NoiseKind::None, 123.0, 0);
        assert_eq!(corrupt_training_set(&w, &spec, 1, Execution::Sequential).unwrap(), w);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("AWGN".parse::<NoiseKind>().unwrap(), NoiseKind::Awgn);
        assert!("salt".parse::<NoiseKind>().is_err());
        assert_eq!(NoiseSpec::awgn(40.0, 0).label(), "awgn_40");
        assert_eq!(NoiseSpec::linear(0.2).label(), "linear_0.2");
    }
}
