//! Report files: `table.csv` (one row per classifier/augmentation, one column
//! per noise kind and strength), `curves.csv` (long format, for plotting F1
//! against strength) and `run.json` (resolved config, labels, per-cell
//! metadata and a trend summary).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentKind;
use crate::error::{Error, Result};
use crate::nn::Preset;
use crate::noise::NoiseKind;

use super::config::GridConfig;
use super::grid::{sort_results, CellFailure, CellResult, GridRun};

pub const RUN_FORMAT: &str = "noisebench-run v1";

/// Pipeline-ordering choices recorded with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub noise_before_standardize: bool,
    pub corrupt_once_per_run: bool,
    pub augment_after_noise_before_standardize: bool,
    pub linear_noise_abscissa: String,
    pub test_and_validation_clean: bool,
}

impl Default for Decisions {
    fn default() -> Self {
        Self {
            noise_before_standardize: true,
            corrupt_once_per_run: true,
            augment_after_noise_before_standardize: true,
            linear_noise_abscissa: "0-based sample index times linear_noise.x_scale".into(),
            test_and_validation_clean: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTrend {
    pub classifier: Preset,
    pub augmentation: AugmentKind,
    pub noise_kind: NoiseKind,
    pub strengths: Vec<f64>,
    /// Percent.
    pub f1: Vec<f64>,
    pub clean_f1: Option<f64>,
    pub worst_f1: f64,
    /// Clean F1 minus the mean F1 over non-zero strengths.
    pub mean_drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrend {
    pub classifier: Preset,
    pub mean_drop_linear: Option<f64>,
    pub mean_drop_awgn: Option<f64>,
    /// Standard deviation of F1 over all of the classifier's cells.
    pub f1_spread: f64,
}

/// Descriptive only; nothing here is asserted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trends {
    pub curves: Vec<CurveTrend>,
    pub classifiers: Vec<ClassifierTrend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub format: String,
    pub config: GridConfig,
    pub labels: Vec<String>,
    pub decisions: Decisions,
    pub distinct_runs: usize,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub trends: Trends,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub table: PathBuf,
    pub curves: PathBuf,
    pub run: PathBuf,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn trends(results: &[CellResult]) -> Trends {
    let mut curves: BTreeMap<(Preset, AugmentKind, u8), CurveTrend> = BTreeMap::new();
    for r in results {
        let rank = u8::from(r.noise_kind != NoiseKind::Linear);
        let c = curves
            .entry((r.classifier, r.augmentation, rank))
            .or_insert_with(|| CurveTrend {
                classifier: r.classifier,
                augmentation: r.augmentation,
                noise_kind: r.noise_kind,
                strengths: Vec::new(),
                f1: Vec::new(),
                clean_f1: None,
                worst_f1: f64::INFINITY,
                mean_drop: None,
            });
        c.strengths.push(r.strength);
        c.f1.push(r.macro_f1);
        c.worst_f1 = c.worst_f1.min(r.macro_f1);
        if r.strength == 0.0 {
            c.clean_f1 = Some(r.macro_f1);
        }
    }
    let curves: Vec<CurveTrend> = curves
        .into_values()
        .map(|mut c| {
            let noisy: Vec<f64> = c
                .strengths
                .iter()
                .zip(&c.f1)
                .filter(|(s, _)| **s > 0.0)
                .map(|(_, f)| *f)
                .collect();
            if let (Some(clean), false) = (c.clean_f1, noisy.is_empty()) {
                c.mean_drop = Some(clean - mean(&noisy));
            }
            c
        })
        .collect();

    let mut classifiers: Vec<Preset> = results.iter().map(|r| r.classifier).collect();
    classifiers.dedup();
    let classifiers = classifiers
        .into_iter()
        .map(|clf| {
            let drop = |kind: NoiseKind| {
                let drops: Vec<f64> = curves
                    .iter()
                    .filter(|c| c.classifier == clf && c.noise_kind == kind)
                    .filter_map(|c| c.mean_drop)
                    .collect();
                (!drops.is_empty()).then(|| mean(&drops))
            };
            let all: Vec<f64> = results.iter().filter(|r| r.classifier == clf).map(|r| r.macro_f1).collect();
            let m = mean(&all);
            let spread = (all.iter().map(|f| (f - m) * (f - m)).sum::<f64>() / all.len() as f64).sqrt();
            ClassifierTrend {
                classifier: clf,
                mean_drop_linear: drop(NoiseKind::Linear),
                mean_drop_awgn: drop(NoiseKind::Awgn),
                f1_spread: spread,
            }
        })
        .collect();
    Trends { curves, classifiers }
}

fn sorted_strengths(list: &[f64]) -> Vec<f64> {
    let mut s = list.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn sorted_unique<T: Ord + Copy>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort();
    v.dedup();
    v
}

fn f1_text(r: Option<&CellResult>) -> String {
    r.map(|r| format!("{:.2}", r.macro_f1)).unwrap_or_default()
}

/// Table rows follow (classifier, augmentation); columns are the linear
/// strengths then the AWGN strengths, ascending. Failed cells are blank.
pub fn render_table(results: &[CellResult], config: &GridConfig) -> String {
    let columns: Vec<(NoiseKind, f64)> = [(NoiseKind::Linear, &config.noise.linear), (NoiseKind::Awgn, &config.noise.awgn)]
        .into_iter()
        .flat_map(|(k, list)| sorted_strengths(list).into_iter().map(move |s| (k, s)))
        .collect();
    let mut out = String::from("classifier,augmentation");
    for (k, s) in &columns {
        let _ = write!(out, ",{k}_{s}");
    }
    out.push('\n');
    for clf in sorted_unique(&config.classifiers) {
        for aug in sorted_unique(&config.augmentations) {
            let _ = write!(out, "{clf},{aug}");
            for (k, s) in &columns {
                let r = results
                    .iter()
                    .find(|r| r.classifier == clf && r.augmentation == aug && r.noise_kind == *k && r.strength == *s);
                let _ = write!(out, ",{}", f1_text(r));
            }
            out.push('\n');
        }
    }
    out
}

pub fn render_curves(results: &[CellResult]) -> String {
    let mut out = String::from("classifier,augmentation,noise_kind,strength,f1\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.2}",
            r.classifier, r.augmentation, r.noise_kind, r.strength, r.macro_f1
        );
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the three report files for a finished grid. Results are sorted
/// first, so the files do not depend on cell completion order.
pub fn report(run: &GridRun, config: &GridConfig, output_dir: &Path) -> Result<ReportPaths> {
    if run.results.is_empty() && run.failures.is_empty() {
        return Err(Error::invalid("no results to report"));
    }
    let mut cells = run.results.clone();
    sort_results(&mut cells);
    let file = RunFile {
        format: RUN_FORMAT.to_string(),
        config: config.clone(),
        labels: run.labels.clone(),
        decisions: Decisions::default(),
        distinct_runs: run.distinct_runs,
        trends: trends(&cells),
        cells,
        failures: run.failures.clone(),
    };
    write_run_file(&file, output_dir)
}

/// Re-renders `table.csv`, `curves.csv` and `run.json` from a run file.
pub fn write_run_file(file: &RunFile, output_dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let paths = ReportPaths {
        table: output_dir.join("table.csv"),
        curves: output_dir.join("curves.csv"),
        run: output_dir.join("run.json"),
    };
    write(&paths.table, &render_table(&file.cells, &file.config))?;
    write(&paths.curves, &render_curves(&file.cells))?;
    let json = serde_json::to_string_pretty(file).map_err(|e| Error::invalid(e.to_string()))?;
    write(&paths.run, &(json + "\n"))?;
    Ok(paths)
}
