//! Signal records, dataset loading, synthetic data, windowing, splitting and
//! per-window standardization.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed_u64, SeededRng};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub id: String,
    /// Raw amplitude units.
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub label: ClassLabel,
}

impl SignalRecord {
    pub fn new(
        id: impl Into<String>,
        samples: Vec<f64>,
        sampling_rate_hz: f64,
        label: ClassLabel,
    ) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::invalid(format!("record {id} has no samples")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "record {id} has a non-finite sample at index {i}"
            )));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "record {id} has invalid sampling rate {sampling_rate_hz}"
            )));
        }
        Ok(Self {
            id,
            samples,
            sampling_rate_hz,
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub values: Vec<f64>,
    pub label: ClassLabel,
    pub source_id: String,
}

impl Window {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A set of records plus the dense label map (index -> name).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SignalRecord>,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|x| !(x.is_finite() && *x > 0.0 && *x < 1.0)) {
            return Err(Error::invalid(format!(
                "split fractions must lie in (0,1), got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<SignalRecord>,
    pub val: Vec<SignalRecord>,
    pub test: Vec<SignalRecord>,
}

/// Loads a manifest CSV (`id,label,sampling_rate_hz,path`). Signal paths are
/// resolved relative to the manifest's directory. Labels get dense indices in
/// order of first appearance.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let parse_err = |line: u64, message: String| Error::Parse {
        path: manifest_path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let expected = ["id", "label", "sampling_rate_hz", "path"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }

    let mut labels: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields, found {}", row.len()),
            ));
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty record id".into()));
        }
        let label_name = row[1].to_string();
        if label_name.is_empty() {
            return Err(parse_err(line, "unknown label reference (empty label)".into()));
        }
        let rate: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid sampling rate `{}`", &row[2])))?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(parse_err(line, format!("sampling rate must be positive, got {rate}")));
        }
        let signal_path = base.join(&row[3]);
        let samples = read_signal_file(&signal_path)?;

        let index = *label_index.entry(label_name.clone()).or_insert_with(|| {
            labels.push(label_name.clone());
            labels.len() - 1
        });
        let label = ClassLabel {
            index,
            name: label_name,
        };
        records.push(
            SignalRecord::new(id, samples, rate, label).map_err(|e| parse_err(line, e.to_string()))?,
        );
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { records, labels })
}

/// One decimal number per line; blank lines are skipped.
pub fn read_signal_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let token = raw.trim();
        if token.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message,
        };
        let v: f64 = token
            .parse()
            .map_err(|_| err(format!("not a number: `{token}`")))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite sample `{token}`")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "signal file holds no samples".into(),
        });
    }
    Ok(values)
}

/// Writes `dataset` as a manifest plus one signal file per record under
/// `dir/signals/`. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let signals = dir.join("signals");
    fs::create_dir_all(&signals).map_err(|e| Error::io(&signals, e))?;
    let manifest = dir.join("manifest.csv");
    let mut out = String::from("id,label,sampling_rate_hz,path\n");
    for rec in &dataset.records {
        let rel = format!("signals/{}.csv", rec.id);
        let mut body = String::with_capacity(rec.samples.len() * 12);
        for v in &rec.samples {
            body.push_str(&v.to_string());
            body.push('\n');
        }
        let p = dir.join(&rel);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.id, rec.label.name, rec.sampling_rate_hz, rel
        ));
    }
    fs::write(&manifest, out).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

/// Shape parameters of one synthetic class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub period: f64,
    pub width: f64,
    pub amplitude: f64,
    /// Relative standard deviation of the inter-pulse interval.
    pub jitter: f64,
}

/// Per-class pulse-train parameters. Neighbouring classes differ in period
/// and pulse width; odd classes have an inverted polarity.
pub fn class_pulse_shape(class: usize) -> PulseShape {
    let c = class as f64;
    PulseShape {
        period: 32.0 + 16.0 * c,
        width: 2.0 + 1.5 * c,
        amplitude: if class.is_multiple_of(2) { 1.0 } else { -1.0 },
        jitter: 0.08,
    }
}

pub const SYNTH_SAMPLING_RATE_HZ: f64 = 300.0;

/// Deterministic synthetic pulse-train dataset. Each record is rescaled so its
/// sample standard deviation falls in [85, 115] amplitude units.
pub fn synth_dataset(
    classes: usize,
    records_per_class: usize,
    record_length: usize,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::invalid("synthetic dataset needs at least 2 classes"));
    }
    if records_per_class < 1 {
        return Err(Error::invalid("records_per_class must be >= 1"));
    }
    if record_length < 64 {
        return Err(Error::invalid("record_length must be >= 64"));
    }
    let labels: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
    let mut records = Vec::with_capacity(classes * records_per_class);
    for (c, name) in labels.iter().enumerate() {
        let shape = class_pulse_shape(c);
        for r in 0..records_per_class {
            let mut rng = SeededRng::new(derive_seed_u64(seed, &[c as u64, r as u64]));
            let samples = synth_record(&shape, record_length, &mut rng);
            records.push(SignalRecord {
                id: format!("{name}_{r:04}"),
                samples,
                sampling_rate_hz: SYNTH_SAMPLING_RATE_HZ,
                label: ClassLabel {
                    index: c,
                    name: name.clone(),
                },
            });
        }
    }
    Ok(Dataset { records, labels })
}

fn synth_record(shape: &PulseShape, length: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut x = vec![0.0; length];
    // pulse centres, starting at a random phase before the record
    let mut centre = -shape.period * rng.uniform();
    let reach = 5.0 * shape.width;
    while centre < length as f64 + reach {
        let amp = shape.amplitude * (1.0 + 0.1 * rng.normal());
        let lo = ((centre - reach).floor().max(0.0)) as usize;
        let hi = ((centre + reach).ceil().min(length as f64 - 1.0)).max(0.0) as usize;
        if centre + reach >= 0.0 {
            for (t, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = (t as f64 - centre) / shape.width;
                *v += amp * (-0.5 * d * d).exp();
            }
        }
        let step = shape.period * (1.0 + shape.jitter * rng.normal());
        centre += step.max(0.25 * shape.period);
    }
    let floor = 0.1 * shape.amplitude.abs();
    for v in x.iter_mut() {
        *v += floor * rng.normal();
    }
    let (mean, std) = moments(&x);
    let target_std = rng.uniform_in(85.0, 115.0);
    let offset = rng.uniform_in(-50.0, 50.0);
    let scale = if std > 0.0 { target_std / std } else { 0.0 };
    x.iter().map(|v| (v - mean) * scale + offset).collect()
}

/// Mean and population standard deviation.
pub fn moments(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stratified split. Per class, the records are shuffled with a class-keyed
/// sub-seed, then divided by largest-remainder rounding with at least one
/// record per split. Each split keeps the input order.
pub fn split(records: &[SignalRecord], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let c = r.label.index;
        if by_class.len() <= c {
            by_class.resize_with(c + 1, Vec::new);
        }
        by_class[c].push(i);
    }
    let fractions = [spec.train_fraction, spec.val_fraction, spec.test_fraction];
    let mut assignment = vec![usize::MAX; records.len()];
    for (c, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(Error::invalid(format!(
                "class {c} has {} records; splitting needs at least 3",
                members.len()
            )));
        }
        let counts = largest_remainder(members.len(), &fractions);
        let mut order = members.clone();
        SeededRng::new(derive_seed_u64(spec.seed, &[c as u64])).shuffle(&mut order);
        let mut cursor = 0;
        for (part, &n) in counts.iter().enumerate() {
            for &idx in &order[cursor..cursor + n] {
                assignment[idx] = part;
            }
            cursor += n;
        }
    }
    let mut out = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (r, part) in records.iter().zip(assignment) {
        match part {
            0 => out.train.push(r.clone()),
            1 => out.val.push(r.clone()),
            _ => out.test.push(r.clone()),
        }
    }
    Ok(out)
}

/// Integer counts summing to `n`, proportional to `fractions`, each at least 1
/// (requires `n >= fractions.len()`).
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..counts.len() {
        if counts[i] == 0 {
            let donor = (0..counts.len())
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("non-empty fractions");
            if counts[donor] > 1 {
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Cuts fixed-length windows at offsets 0, stride, 2*stride, ... A record
/// shorter than `length` yields one zero-padded window.
pub fn window(record: &SignalRecord, length: usize, stride: usize) -> Result<Vec<Window>> {
    if length == 0 || stride == 0 {
        return Err(Error::invalid("window length and stride must be >= 1"));
    }
    let make = |values: Vec<f64>| Window {
        values,
        label: record.label.clone(),
        source_id: record.id.clone(),
    };
    let n = record.samples.len();
    if n < length {
        let mut values = record.samples.clone();
        values.resize(length, 0.0);
        return Ok(vec![make(values)]);
    }
    Ok((0..=(n - length))
        .step_by(stride)
        .map(|off| make(record.samples[off..off + length].to_vec()))
        .collect())
}

pub fn window_all(records: &[SignalRecord], length: usize, stride: usize) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for r in records {
        out.extend(window(r, length, stride)?);
    }
    Ok(out)
}

/// Zero mean, unit population standard deviation. Near-constant windows
/// (std < 1e-12) map to all zeros.
pub fn standardize(window: &Window) -> Window {
    let (mean, std) = moments(&window.values);
    let values = if std < 1e-12 {
        vec![0.0; window.values.len()]
    } else {
        window.values.iter().map(|v| (v - mean) / std).collect()
    };
    Window {
        values,
        label: window.label.clone(),
        source_id: window.source_id.clone(),
    }
}
