//! Cell execution and the full grid sweep.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentKind, AugmentSpec};
use crate::data::{load_dataset, split, standardize, synth_dataset, window_all, Dataset, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{evaluate_windows, train, EpochRecord, Model, Preset};
use crate::noise::{corrupt_training_set, NoiseKind, NoiseSpec};
use crate::rng::derive_seed;

use super::config::{DatasetSource, GridConfig};

/// One grid coordinate. Strength 0 (or kind NONE) is the clean baseline and
/// shares its identity, and therefore its seed, across noise kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub classifier: Preset,
    pub augmentation: AugmentKind,
    pub noise_kind: NoiseKind,
    pub strength: f64,
}

impl Cell {
    pub fn is_clean(&self) -> bool {
        self.noise_kind == NoiseKind::None || self.strength == 0.0
    }

    /// Stable identity string; seeds are derived from it.
    pub fn key(&self) -> String {
        if self.is_clean() {
            format!("{}/{}/clean", self.classifier, self.augmentation)
        } else {
            format!(
                "{}/{}/{}/{}",
                self.classifier, self.augmentation, self.noise_kind, self.strength
            )
        }
    }

    pub fn seed(&self, global_seed: u64) -> u64 {
        derive_seed(global_seed, &[self.key().as_bytes()])
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.classifier, self.augmentation, self.noise_kind, self.strength
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub classifier: Preset,
    pub augmentation: AugmentKind,
    pub noise_kind: NoiseKind,
    pub strength: f64,
    /// Test-set score in [0, 1].
    pub f1: f64,
    /// `f1` as a percentage rounded to two decimals.
    pub macro_f1: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub wall_seconds: f64,
    pub cell_seed: u64,
    /// Hex digest of the test windows the cell was scored on.
    pub test_checksum: String,
    pub train_windows: usize,
    pub synthetic_windows: usize,
    pub warnings: Vec<String>,
    pub history: Vec<EpochRecord>,
}

impl CellResult {
    pub fn cell(&self) -> Cell {
        Cell {
            classifier: self.classifier,
            augmentation: self.augmentation,
            noise_kind: self.noise_kind,
            strength: self.strength,
        }
    }

    /// Same result, relabelled under another noise kind (clean baseline reuse).
    fn relabel(&self, kind: NoiseKind) -> Self {
        Self {
            noise_kind: kind,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

/// Windows shared by every cell of a grid. `train` is raw (noise goes in
/// before standardization); `val` and `test` are standardized and clean.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub labels: Vec<String>,
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
}

pub fn load_source(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Synth {
            classes,
            records_per_class,
            record_length,
            seed,
        } => synth_dataset(*classes, *records_per_class, *record_length, *seed),
        DatasetSource::Manifest { path } => load_dataset(path),
    }
}

/// load -> split -> window; validation and test are standardized here.
pub fn prepare(config: &GridConfig) -> Result<Prepared> {
    let dataset = load_source(&config.dataset)?;
    let parts = split(&dataset.records, &config.split)?;
    let (len, stride) = (config.window.length, config.window.stride);
    Ok(Prepared {
        labels: dataset.labels,
        train: window_all(&parts.train, len, stride)?,
        val: window_all(&parts.val, len, stride)?.iter().map(standardize).collect(),
        test: window_all(&parts.test, len, stride)?.iter().map(standardize).collect(),
    })
}

/// FNV-1a digest over labels and value bits.
pub fn checksum_windows(windows: &[Window]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for w in windows {
        feed(&(w.label.index as u64).to_le_bytes());
        feed(&(w.values.len() as u64).to_le_bytes());
        for v in &w.values {
            feed(&v.to_bits().to_le_bytes());
        }
    }
    format!("{h:016x}")
}

/// Runs one cell from scratch (loads and prepares the dataset itself).
pub fn run_cell(config: &GridConfig, cell: Cell, exec: Execution) -> Result<CellResult> {
    config.validate()?;
    let prepared = prepare(config).map_err(|e| annotate(&cell, e))?;
    run_cell_prepared(config, &prepared, cell, exec)
}

fn annotate(cell: &Cell, e: Error) -> Error {
    Error::Cell {
        cell: cell.to_string(),
        source: Box::new(e),
    }
}

/// corrupt train -> augment train -> standardize -> train -> score on test.
pub fn run_cell_prepared(config: &GridConfig, prepared: &Prepared, cell: Cell, exec: Execution) -> Result<CellResult> {
    run_cell_with_model(config, prepared, cell, exec).map(|(r, _)| r)
}

/// Like [`run_cell_prepared`], also returning the trained model.
pub fn run_cell_with_model(
    config: &GridConfig,
    prepared: &Prepared,
    cell: Cell,
    exec: Execution,
) -> Result<(CellResult, Model)> {
    let start = Instant::now();
    let seed = cell.seed(config.global_seed);
    let sub = |name: &str| derive_seed(seed, &[name.as_bytes()]);
    let run = || -> Result<(CellResult, Model)> {
        let mut spec = NoiseSpec::new(cell.noise_kind, cell.strength, sub("noise"));
        spec.x_scale = config.linear_noise.x_scale;
        if cell.is_clean() {
            spec = NoiseSpec::none();
        }
        let noisy = corrupt_training_set(&prepared.train, &spec, sub("noise"), exec)?;

        let aug_spec = AugmentSpec {
            kind: cell.augmentation,
            gmm_components: config.augment.gmm_components,
            target_per_class: config.augment.target_per_class,
            seed: sub("augment"),
            max_iters: config.augment.max_iters,
            tol: config.augment.tol,
        };
        let augmented = augment(&noisy, &aug_spec, exec)?;
        let train_set: Vec<Window> = exec.map(&augmented.windows, standardize);

        let mut train_cfg = config.train;
        train_cfg.seed = sub("train");
        train_cfg.metric = config.metric;
        let arch = config.architectures.get(cell.classifier);
        let num_classes = prepared.labels.len();
        let (model, history) = train(arch, &train_set, &prepared.val, num_classes, &train_cfg, exec)?;
        let f1 = evaluate_windows(&model, &prepared.test, config.metric, exec)?;
        let result = CellResult {
            classifier: cell.classifier,
            augmentation: cell.augmentation,
            noise_kind: cell.noise_kind,
            strength: cell.strength,
            f1,
            macro_f1: (f1 * 10_000.0).round() / 100.0,
            epochs_run: history.epochs.len(),
            best_epoch: history.best_epoch,
            wall_seconds: start.elapsed().as_secs_f64(),
            cell_seed: seed,
            test_checksum: checksum_windows(&prepared.test),
            train_windows: train_set.len(),
            synthetic_windows: augmented.synthetic,
            warnings: augmented.warnings,
            history: history.epochs,
        };
        Ok((result, model))
    };
    run().map_err(|e| annotate(&cell, e))
}

/// Display order for noise kinds: linear first, then AWGN.
fn kind_rank(kind: NoiseKind) -> u8 {
    match kind {
        NoiseKind::Linear => 0,
        NoiseKind::Awgn => 1,
        NoiseKind::None => 2,
    }
}

/// Sorts by (classifier, augmentation, noise kind, strength).
pub fn sort_results(results: &mut [CellResult]) {
    results.sort_by(|a, b| {
        a.classifier
            .cmp(&b.classifier)
            .then(a.augmentation.cmp(&b.augmentation))
            .then(kind_rank(a.noise_kind).cmp(&kind_rank(b.noise_kind)))
            .then(a.strength.total_cmp(&b.strength))
    });
}

fn dedup_strengths(list: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &s in list {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Every displayed cell of the grid, including the clean column once per
/// noise kind.
pub fn grid_cells(config: &GridConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &classifier in &config.classifiers {
        for &augmentation in &config.augmentations {
            for (kind, list) in [(NoiseKind::Linear, &config.noise.linear), (NoiseKind::Awgn, &config.noise.awgn)] {
                for strength in dedup_strengths(list) {
                    cells.push(Cell {
                        classifier,
                        augmentation,
                        noise_kind: kind,
                        strength,
                    });
                }
            }
        }
    }
    cells
}

/// Distinct training runs: clean cells collapse to one per
/// (classifier, augmentation).
pub fn distinct_runs(config: &GridConfig) -> Vec<Cell> {
    let mut runs: Vec<Cell> = Vec::new();
    for cell in grid_cells(config) {
        let key = cell.key();
        if !runs.iter().any(|r| r.key() == key) {
            runs.push(cell);
        }
    }
    runs
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub labels: Vec<String>,
    pub results: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub distinct_runs: usize,
}

impl GridRun {
    pub fn any_failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs every distinct cell (concurrently when `exec` allows) and expands
/// clean results across noise kinds. A failing cell is recorded and the rest
/// continue.
pub fn run_grid(config: &GridConfig, exec: Execution) -> Result<GridRun> {
    config.validate()?;
    let prepared = prepare(config)?;
    let runs = distinct_runs(config);
    let outcomes = exec.map(&runs, |cell| {
        let r = run_cell_prepared(config, &prepared, *cell, exec);
        match &r {
            Ok(res) => log::info!("{cell}: macro F1 {:.2} ({:.1}s)", res.macro_f1, res.wall_seconds),
            Err(e) => log::warn!("{e}"),
        }
        r
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for cell in grid_cells(config) {
        let idx = runs
            .iter()
            .position(|r| r.key() == cell.key())
            .expect("every grid cell maps to a run");
        match &outcomes[idx] {
            Ok(res) => results.push(res.relabel(cell.noise_kind)),
            Err(e) => failures.push(CellFailure {
                cell,
                error: e.to_string(),
            }),
        }
    }
    sort_results(&mut results);
    Ok(GridRun {
        labels: prepared.labels,
        results,
        failures,
        distinct_runs: runs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_36_runs() {
        let c = GridConfig::default();
        assert_eq!(grid_cells(&c).len(), 40);
        assert_eq!(distinct_runs(&c).len(), 36);
    }

    #[test]
    fn awgn_only_single_cells() {
        let mut c = GridConfig {
            classifiers: vec![Preset::Cnn],
            augmentations: vec![AugmentKind::None],
            ..GridConfig::default()
        };
        c.noise.linear.clear();
        assert_eq!(grid_cells(&c).len(), 5);
        assert_eq!(distinct_runs(&c).len(), 5);
    }

    #[test]
    fn clean_cells_share_seed() {
        let a = Cell {
            classifier: Preset::Cnn,
            augmentation: AugmentKind::Gmm,
            noise_kind: NoiseKind::Linear,
            strength: 0.0,
        };
        let b = Cell {
            noise_kind: NoiseKind::Awgn,
            ..a
        };
        assert_eq!(a.seed(7), b.seed(7));
        let c = Cell { strength: 20.0, ..b };
        assert_ne!(a.seed(7), c.seed(7));
    }

    #[test]
    fn checksum_sensitive_to_values() {
        let w = |v: f64| Window {
            values: vec![v, 1.0],
            label: crate::data::ClassLabel {
                index: 0,
                name: "a".into(),
            },
            source_id: "s".into(),
        };
        assert_eq!(checksum_windows(&[w(0.5)]), checksum_windows(&[w(0.5)]));
        assert_ne!(checksum_windows(&[w(0.5)]), checksum_windows(&[w(0.25)]));
    }
}
