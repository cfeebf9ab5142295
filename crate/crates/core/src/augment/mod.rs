//! Training-set augmentation: class-balancing oversampling and per-class
//! GMM sampling. Both only ever see the (already corrupted) training windows.

mod gmm;

pub use gmm::{gmm_fit, gmm_sample, EmOptions, GmmFit, GmmModel};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{ClassLabel, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{derive_seed_u64, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentKind {
    None,
    Oversample,
    Gmm,
}

impl AugmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentKind::None => "none",
            AugmentKind::Oversample => "oversample",
            AugmentKind::Gmm => "gmm",
        }
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AugmentKind::None),
            "oversample" => Ok(AugmentKind::Oversample),
            "gmm" => Ok(AugmentKind::Gmm),
            other => Err(Error::invalid(format!("unknown augmentation `{other}`"))),
        }
    }
}

/// Per-class size the augmenters fill up to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetPerClass {
    #[default]
    MatchMajority,
    Count(usize),
}

impl Serialize for TargetPerClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TargetPerClass::MatchMajority => s.serialize_str("match-majority"),
            TargetPerClass::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TargetPerClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(TargetPerClass::Count(n as usize)),
            Raw::Name(s) if s == "match-majority" => Ok(TargetPerClass::MatchMajority),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "target_per_class must be an integer or \"match-majority\", got \"{s}\""
            ))),
        }
    }
}

fn default_components() -> usize {
    3
}
fn default_max_iters() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    #[serde(default = "default_components")]
    pub gmm_components: usize,
    #[serde(default)]
    pub target_per_class: TargetPerClass,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl AugmentSpec {
    pub fn new(kind: AugmentKind, seed: u64) -> Self {
        Self {
            kind,
            gmm_components: default_components(),
            target_per_class: TargetPerClass::MatchMajority,
            seed,
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentOutcome {
    pub windows: Vec<Window>,
    pub synthetic: usize,
    pub warnings: Vec<String>,
}

/// Indices of each class's windows, keyed by class index.
fn group_by_class(windows: &[Window]) -> BTreeMap<usize, (ClassLabel, Vec<usize>)> {
    let mut groups: BTreeMap<usize, (ClassLabel, Vec<usize>)> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        groups
            .entry(w.label.index)
            .or_insert_with(|| (w.label.clone(), Vec::new()))
            .1
            .push(i);
    }
    groups
}

fn resolve_target(target: TargetPerClass, groups: &BTreeMap<usize, (ClassLabel, Vec<usize>)>) -> usize {
    match target {
        TargetPerClass::MatchMajority => groups.values().map(|g| g.1.len()).max().unwrap_or(0),
        TargetPerClass::Count(n) => n,
    }
}

/// Dispatches on `spec.kind`.
pub fn augment(windows: &[Window], spec: &AugmentSpec, exec: Execution) -> Result<AugmentOutcome> {
    match spec.kind {
        AugmentKind::None => Ok(AugmentOutcome {
            windows: windows.to_vec(),
            ..Default::default()
        }),
        AugmentKind::Oversample => {
            let out = oversample_to(windows, spec.target_per_class, spec.seed)?;
            Ok(AugmentOutcome {
                synthetic: out.len() - windows.len(),
                windows: out,
                warnings: Vec::new(),
            })
        }
        AugmentKind::Gmm => augment_gmm(windows, spec, exec),
    }
}

/// Tops minority classes up to the majority count by drawing existing
/// windows of the same class uniformly with replacement. Originals come
/// first, in input order; duplicates follow, grouped by class.
pub fn oversample(windows: &[Window], seed: u64) -> Result<Vec<Window>> {
    oversample_to(windows, TargetPerClass::MatchMajority, seed)
}

fn oversample_to(windows: &[Window], target: TargetPerClass, seed: u64) -> Result<Vec<Window>> {
    if windows.is_empty() {
        return Err(Error::invalid("cannot oversample an empty window set"));
    }
    let groups = group_by_class(windows);
    let target = resolve_target(target, &groups);
    let mut out = windows.to_vec();
    for (class, (_, members)) in &groups {
        let missing = target.saturating_sub(members.len());
        let mut rng = SeededRng::new(derive_seed_u64(seed, &[*class as u64]));
        for _ in 0..missing {
            out.push(windows[members[rng.below(members.len())]].clone());
        }
    }
    Ok(out)
}

/// Fits one GMM per class on that class's window vectors and samples
/// synthetic windows until each class reaches the target count. A class with
/// fewer windows than `gmm_components` is fitted with one component per
/// window and a warning is recorded.
pub fn augment_gmm(windows: &[Window], spec: &AugmentSpec, exec: Execution) -> Result<AugmentOutcome> {
    if spec.gmm_components == 0 {
        return Err(Error::invalid("gmm_components must be >= 1"));
    }
    if windows.is_empty() {
        return Err(Error::invalid("cannot augment an empty window set"));
    }
    let groups = group_by_class(windows);
    let target = resolve_target(spec.target_per_class, &groups);
    let classes: Vec<(&usize, &(ClassLabel, Vec<usize>))> = groups.iter().collect();

    let per_class = exec.map(&classes, |&(&class, (label, members))| -> Result<(Vec<Window>, Option<String>)> {
        let missing = target.saturating_sub(members.len());
        if missing == 0 {
            return Ok((Vec::new(), None));
        }
        let mut warning = None;
        let components = if members.len() < spec.gmm_components {
            warning = Some(format!(
                "class {} has {} windows, fewer than {} gmm components; using {}",
                label.name,
                members.len(),
                spec.gmm_components,
                members.len()
            ));
            members.len()
        } else {
            spec.gmm_components
        };
        let data: Vec<Vec<f64>> = members.iter().map(|&i| windows[i].values.clone()).collect();
        let fit_seed = derive_seed_u64(spec.seed, &[class as u64, 0]);
        let sample_seed = derive_seed_u64(spec.seed, &[class as u64, 1]);
        let fit = gmm_fit(
            &data,
            &EmOptions {
                components,
                max_iters: spec.max_iters,
                tol: spec.tol,
                seed: fit_seed,
            },
        )?;
        let synthetic = gmm_sample(&fit.model, missing, sample_seed)
            .into_iter()
            .enumerate()
            .map(|(j, values)| Window {
                values,
                label: label.clone(),
                source_id: format!("gmm:{}:{j}", label.name),
            })
            .collect();
        Ok((synthetic, warning))
    });

    let mut out = AugmentOutcome {
        windows: windows.to_vec(),
        ..Default::default()
    };
    for r in per_class {
        let (synthetic, warning) = r?;
        out.synthetic += synthetic.len();
        out.windows.extend(synthetic);
        out.warnings.extend(warning);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows(counts: &[usize]) -> Vec<Window> {
        let mut out = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                out.push(Window {
                    values: vec![c as f64 * 10.0 + i as f64, i as f64 * 0.5, (i * i) as f64],
                    label: ClassLabel {
                        index: c,
                        name: format!("c{c}"),
                    },
                    source_id: format!("c{c}_{i}"),
                });
            }
        }
        out
    }

    fn counts(ws: &[Window]) -> Vec<usize> {
        group_by_class(ws).values().map(|g| g.1.len()).collect()
    }

    #[test]
    fn balanced_oversample_unchanged() {
        let w = windows(&[5, 5]);
        assert_eq!(oversample(&w, 1).unwrap(), w);
    }

    #[test]
    fn oversample_tops_up() {
        let w = windows(&[10, 4]);
        let out = oversample(&w, 1).unwrap();
        assert_eq!(counts(&out), vec![10, 10]);
        assert_eq!(&out[..14], &w[..]);
    }

    #[test]
    fn oversample_empty_is_error() {
        assert!(oversample(&[], 0).is_err());
    }

    #[test]
    fn gmm_balanced_adds_nothing() {
        let w = windows(&[6, 6]);
        let out = augment_gmm(&w, &AugmentSpec::new(AugmentKind::Gmm, 3), Execution::Sequential).unwrap();
        assert_eq!(out.synthetic, 0);
        assert_eq!(out.windows, w);
    }

    #[test]
    fn gmm_small_class_falls_back() {
        let w = windows(&[8, 2]);
        let out = augment_gmm(&w, &AugmentSpec::new(AugmentKind::Gmm, 3), Execution::Sequential).unwrap();
        assert_eq!(counts(&out.windows), vec![8, 8]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn explicit_target_count() {
        let w = windows(&[4, 4]);
        let mut spec = AugmentSpec::new(AugmentKind::Gmm, 0);
        spec.gmm_components = 2;
        spec.target_per_class = TargetPerClass::Count(7);
        let out = augment(&w, &spec, Execution::Sequential).unwrap();
        assert_eq!(counts(&out.windows), vec![7, 7]);
        spec.kind = AugmentKind::Oversample;
        let out = augment(&w, &spec, Execution::Sequential).unwrap();
        assert_eq!(counts(&out.windows), vec![7, 7]);
    }

    #[test]
    fn target_serde() {
        let t: TargetPerClass = serde_json::from_str("\"match-majority\"").unwrap();
        assert_eq!(t, TargetPerClass::MatchMajority);
        let t: TargetPerClass = serde_json::from_str("12").unwrap();
        assert_eq!(t, TargetPerClass::Count(12));
        assert!(serde_json::from_str::<TargetPerClass>("\"most\"").is_err());
        assert_eq!(serde_json::to_string(&TargetPerClass::Count(3)).unwrap(), "3");
    }
}
