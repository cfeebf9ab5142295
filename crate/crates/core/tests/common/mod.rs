//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use noisebench::data::{ClassLabel, Window};
use noisebench::nn::{check_gradients, LayerSpec, Model, Padding};
use noisebench::rng::SeededRng;

/// Direct triple loop over (output channel, position, input channel x tap),
/// with padding recomputed from the TensorFlow-style SAME rule.
pub fn conv_oracle(
    x: &[Vec<f64>],
    w: &[Vec<Vec<f64>>],
    b: &[f64],
    stride: usize,
    padding: Padding,
) -> Vec<Vec<f64>> {
    let len = x[0].len();
    let k = w[0][0].len();
    let (out_len, pad) = match padding {
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + k) as i64 - len as i64;
            (out, total.max(0) as usize / 2)
        }
        Padding::Valid => ((len - k) / stride + 1, 0),
    };
    let mut out = vec![vec![0.0; out_len]; w.len()];
    for (o, row) in out.iter_mut().enumerate() {
        for (t, y) in row.iter_mut().enumerate() {
            let mut acc = b[o];
            for (c, xc) in x.iter().enumerate() {
                for j in 0..k {
                    let pos = (t * stride + j) as i64 - pad as i64;
                    if pos >= 0 && (pos as usize) < len {
                        acc += w[o][c][j] * xc[pos as usize];
                    }
                }
            }
            *y = acc;
        }
    }
    out
}

/// Per-class precision/recall/F1 from raw label lists, without a confusion
/// matrix. Returns (macro over supported classes, per-class F1).
pub fn brute_force_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> (f64, Vec<f64>) {
    let mut per_class = Vec::new();
    let mut supported = Vec::new();
    for c in 0..k {
        let tp = y_true.iter().zip(y_pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
        let fp = y_true.iter().zip(y_pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
        let fn_ = y_true.iter().zip(y_pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(f1);
        if tp + fn_ > 0.0 {
            supported.push(f1);
        }
    }
    (supported.iter().sum::<f64>() / supported.len() as f64, per_class)
}

pub fn random_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
}

/// The layer kinds whose gradients are checked against finite differences.
pub const GRAD_KINDS: [&str; 6] = ["conv1d", "sepconv1d", "maxpool", "dense", "globalavgpool", "softmax-ce"];

/// Random small architecture exercising `kind`, plus its input shape.
/// ReLU is left out on purpose: its kink makes finite differences unreliable.
pub fn grad_case(kind: &str, rng: &mut SeededRng) -> (Vec<LayerSpec>, usize, usize, usize) {
    let ch = 1 + rng.below(3);
    let len = 4 + rng.below(12);
    let classes = 2 + rng.below(3);
    let k = 1 + rng.below(5);
    let stride = 1 + rng.below(3);
    let padding = if rng.below(2) == 0 { Padding::Same } else { Padding::Valid };
    let k = if padding == Padding::Valid { k.min(len) } else { k };
    let out = 1 + rng.below(4);
    let arch = match kind {
        "conv1d" => vec![LayerSpec::conv(k, out, stride, padding), LayerSpec::dense(None), LayerSpec::softmax()],
        "sepconv1d" => vec![LayerSpec::sepconv(k, out, stride, padding), LayerSpec::dense(None), LayerSpec::softmax()],
        "maxpool" => vec![
            LayerSpec::conv(k, out, 1, Padding::Same),
            LayerSpec::maxpool(1 + rng.below(len.min(4))),
            LayerSpec::dense(None),
            LayerSpec::softmax(),
        ],
        "dense" => vec![LayerSpec::dense(Some(1 + rng.below(6))), LayerSpec::dense(None), LayerSpec::softmax()],
        "globalavgpool" => vec![
            LayerSpec::conv(k, out, stride, Padding::Same),
            LayerSpec::global_avg_pool(),
            LayerSpec::dense(None),
            LayerSpec::softmax(),
        ],
        "softmax-ce" => vec![LayerSpec::dense(None), LayerSpec::softmax()],
        other => panic!("unknown kind {other}"),
    };
    (arch, ch, len, classes)
}

/// Worst relative error over `trials` random cases of one layer kind
/// (parameters and inputs), with central differences at h = 1e-5.
pub fn grad_check_kind(kind: &str, trials: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let (arch, ch, len, classes) = grad_case(kind, &mut rng);
        let model = Model::new(&arch, ch, len, classes, 1000 + trial as u64).unwrap();
        let batch = 1 + rng.below(3);
        let inputs: Vec<Vec<f64>> = (0..batch).map(|_| random_vec(&mut rng, ch * len)).collect();
        let labels: Vec<usize> = (0..batch).map(|_| rng.below(classes)).collect();
        let report = check_gradients(&model, &inputs, &labels, 1e-5, true).unwrap();
        assert!(report.checked > 0);
        worst = worst.max(report.max_rel_error);
    }
    worst
}

/// Two classes split by a random hyperplane with a margin; D = 8.
pub fn separable_toy(n: usize, seed: u64) -> Vec<Window> {
    let mut rng = SeededRng::new(seed);
    let normal = random_vec(&mut rng, 8);
    let mut out = Vec::new();
    while out.len() < n {
        let x = random_vec(&mut rng, 8);
        let score: f64 = x.iter().zip(&normal).map(|(a, b)| a * b).sum();
        if score.abs() < 0.2 {
            continue;
        }
        let c = usize::from(score > 0.0);
        out.push(Window {
            values: x,
            label: ClassLabel {
                index: c,
                name: format!("c{c}"),
            },
            source_id: format!("t{}", out.len()),
        });
    }
    out
}

/// Scalars from 0.5*N(0,1) + 0.5*N(10,1), drawn without the library's sampler.
pub fn two_bumps(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| {
            let centre = if rng.uniform() < 0.5 { 0.0 } else { 10.0 };
            vec![centre + rng.normal()]
        })
        .collect()
}

/// The scalar Adam recurrence on f(x) = x^2, written out directly.
pub fn adam_scalar_oracle(x0: f64, lr: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
    let mut path = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = 2.0 * x;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        x -= lr * m_hat / (v_hat.sqrt() + eps);
        path.push(x);
    }
    path
}

/// A grid small enough for debug-speed tests: one classifier, two
/// augmentations, two strengths per noise kind (6 distinct runs).
pub fn small_grid() -> noisebench::experiment::GridConfig {
    use noisebench::augment::{AugmentKind, TargetPerClass};
    use noisebench::experiment::{DatasetSource, GridConfig, WindowConfig};
    use noisebench::nn::Preset;
    let mut c = GridConfig {
        dataset: DatasetSource::Synth {
            classes: 3,
            records_per_class: 6,
            record_length: 256,
            seed: 3,
        },
        window: WindowConfig { length: 64, stride: 64 },
        classifiers: vec![Preset::SepCnn],
        augmentations: vec![AugmentKind::None, AugmentKind::Gmm],
        global_seed: 11,
        ..GridConfig::default()
    };
    c.noise.linear = vec![0.0, 0.4];
    c.noise.awgn = vec![0.0, 40.0];
    c.augment.target_per_class = TargetPerClass::Count(24);
    c.augment.gmm_components = 2;
    c.train.epochs = 3;
    c.train.early_stop_patience = 2;
    c
}
