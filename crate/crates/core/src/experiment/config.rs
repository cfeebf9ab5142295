use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentKind, TargetPerClass};
use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::metrics::Averaging;
use crate::nn::{LayerSpec, Preset, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synth {
        classes: usize,
        records_per_class: usize,
        record_length: usize,
        seed: u64,
    },
    /// Path is resolved relative to the working directory.
    Manifest { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub length: usize,
    pub stride: usize,
}

/// Strength lists per noise kind. An empty list leaves that kind out of the
/// grid; a non-empty list must contain 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub awgn: Vec<f64>,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        Self {
            linear: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            awgn: vec![0.0, 20.0, 40.0, 60.0, 80.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearNoiseConfig {
    /// Abscissa units per sample for the ramp `a * x`.
    pub x_scale: f64,
}

impl Default for LinearNoiseConfig {
    fn default() -> Self {
        Self { x_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub gmm_components: usize,
    pub target_per_class: TargetPerClass,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            gmm_components: 3,
            target_per_class: TargetPerClass::MatchMajority,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architectures {
    pub cnn: Vec<LayerSpec>,
    pub sepcnn: Vec<LayerSpec>,
}

impl Default for Architectures {
    fn default() -> Self {
        Self {
            cnn: Preset::Cnn.layers(),
            sepcnn: Preset::SepCnn.layers(),
        }
    }
}

impl Architectures {
    pub fn get(&self, preset: Preset) -> &[LayerSpec] {
        match preset {
            Preset::Cnn => &self.cnn,
            Preset::SepCnn => &self.sepcnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    pub window: WindowConfig,
    pub classifiers: Vec<Preset>,
    pub augmentations: Vec<AugmentKind>,
    pub noise: NoiseGrid,
    pub linear_noise: LinearNoiseConfig,
    pub augment: AugmentConfig,
    /// `train.seed` is replaced by a per-cell seed inside the grid.
    pub train: TrainConfig,
    pub architectures: Architectures,
    pub metric: Averaging,
    pub global_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synth {
                classes: 4,
                records_per_class: 50,
                record_length: 1024,
                seed: 1,
            },
            split: SplitSpec::default(),
            window: WindowConfig {
                length: 256,
                stride: 128,
            },
            classifiers: vec![Preset::Cnn, Preset::SepCnn],
            augmentations: vec![AugmentKind::None, AugmentKind::Gmm],
            noise: NoiseGrid::default(),
            linear_noise: LinearNoiseConfig::default(),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            architectures: Architectures::default(),
            metric: Averaging::Macro,
            global_seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Error::Config(m);
        if self.classifiers.is_empty() {
            return Err(cfg("at least one classifier is required".into()));
        }
        if self.augmentations.is_empty() {
            return Err(cfg("at least one augmentation is required".into()));
        }
        if self.noise.linear.is_empty() && self.noise.awgn.is_empty() {
            return Err(cfg("at least one noise kind needs a strength list".into()));
        }
        for (name, list) in [("linear", &self.noise.linear), ("awgn", &self.noise.awgn)] {
            if list.is_empty() {
                continue;
            }
            if !list.contains(&0.0) {
                return Err(cfg(format!("noise.{name} must include the clean strength 0")));
            }
            if list.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(cfg(format!("noise.{name} strengths must be non-negative")));
            }
        }
        if !(self.linear_noise.x_scale.is_finite() && self.linear_noise.x_scale > 0.0) {
            return Err(cfg("linear_noise.x_scale must be positive".into()));
        }
        if self.window.length == 0 || self.window.stride == 0 {
            return Err(cfg("window length and stride must be >= 1".into()));
        }
        if self.augmentations.contains(&AugmentKind::Gmm) && self.augment.gmm_components == 0 {
            return Err(cfg("augment.gmm_components must be >= 1".into()));
        }
        self.split.validate().map_err(|e| cfg(e.to_string()))?;
        self.train.validate().map_err(|e| cfg(e.to_string()))?;
        if let DatasetSource::Synth {
            classes,
            records_per_class,
            record_length,
            ..
        } = self.dataset
        {
            if classes < 2 || records_per_class < 3 || record_length < 64 {
                return Err(cfg(
                    "synthetic dataset needs >= 2 classes, >= 3 records per class and length >= 64".into(),
                ));
            }
        }
        Ok(())
    }

    /// Reads TOML, or JSON when the extension is `.json`. A run report
    /// (`run.json`) is accepted too: its embedded `config` is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config: GridConfig = if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let inner = match value.get("config") {
                Some(c) => c.clone(),
                None => value,
            };
            serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
