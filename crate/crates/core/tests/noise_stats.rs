use noisebench::data::{moments, synth_dataset, ClassLabel, Window};
use noisebench::noise::{apply_awgn, apply_linear, apply_linear_scaled, corrupt_training_set, preview, NoiseSpec};
use noisebench::Execution;
use proptest::prelude::*;

fn windows(n: usize, len: usize) -> Vec<Window> {
    (0..n)
        .map(|i| Window {
            values: (0..len).map(|t| ((t * (i + 1)) as f64).cos() * 30.0).collect(),
            label: ClassLabel {
                index: i % 2,
                name: format!("c{}", i % 2),
            },
            source_id: format!("w{i}"),
        })
        .collect()
}

#[test]
fn awgn_moments_on_zero_vector() {
    let zeros = vec![0.0; 100_000];
    for (i, sigma) in [20.0, 40.0, 60.0, 80.0].into_iter().enumerate() {
        let out = apply_awgn(&zeros, sigma, 1000 + i as u64).unwrap();
        let (mean, std) = moments(&out);
        assert!((std - sigma).abs() / sigma < 0.01, "sigma {sigma}: std {std}");
        assert!(mean.abs() < 3.0 * sigma / (zeros.len() as f64).sqrt(), "sigma {sigma}: mean {mean}");
    }
}

#[test]
fn linear_adds_exact_ramp() {
    let x: Vec<f64> = (0..512).map(|i| (i as f64 * 0.1).sin() * 100.0).collect();
    for a in [0.2, 0.4, 0.6, 0.8] {
        let y = apply_linear(&x, a).unwrap();
        for (i, (yi, xi)) in y.iter().zip(&x).enumerate() {
            // the ramp is x + a*i, so subtracting recovers a*i up to one rounding of the sum
            let diff = yi - xi;
            let ramp = a * i as f64;
            assert!((diff - ramp).abs() <= f64::EPSILON * yi.abs().max(1.0) * 2.0, "a={a} i={i}");
        }
        // on a zero input the output is the ramp bit-for-bit
        let z = apply_linear(&vec![0.0; 512], a).unwrap();
        assert!(z.iter().enumerate().all(|(i, v)| *v == a * i as f64));
    }
}

#[test]
fn x_scale_stretches_the_ramp() {
    let z = apply_linear_scaled(&[0.0; 8], 0.5, 0.25).unwrap();
    for (i, v) in z.iter().enumerate() {
        assert_eq!(*v, 0.5 * (i as f64 * 0.25));
    }
}

#[test]
fn zero_strength_is_bit_identity() {
    let ws = windows(6, 64);
    for spec in [NoiseSpec::awgn(0.0, 3), NoiseSpec::linear(0.0), NoiseSpec::none()] {
        let out = corrupt_training_set(&ws, &spec, 11, Execution::Parallel).unwrap();
        for (a, b) in out.iter().zip(&ws) {
            let bits = |w: &Window| w.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }
}

#[test]
fn corruption_is_deterministic_and_order_free() {
    let ws = windows(10, 128);
    let spec = NoiseSpec::awgn(40.0, 0);
    let seq = corrupt_training_set(&ws, &spec, 77, Execution::Sequential).unwrap();
    let par = corrupt_training_set(&ws, &spec, 77, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let other = corrupt_training_set(&ws, &spec, 78, Execution::Sequential).unwrap();
    assert_ne!(seq, other);
    // distinct windows get distinct noise streams
    let zeros = vec![
        Window {
            values: vec![0.0; 32],
            ..ws[0].clone()
        };
        2
    ];
    let z = corrupt_training_set(&zeros, &spec, 5, Execution::Sequential).unwrap();
    assert_ne!(z[0].values, z[1].values);
}

fn preview_columns(specs: &[NoiseSpec]) -> (Vec<String>, Vec<Vec<f64>>) {
    let ds = synth_dataset(2, 3, 512, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("preview.csv");
    preview(&ds.records[0], specs, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for row in reader.records() {
        for (c, v) in row.unwrap().iter().enumerate() {
            cols[c].push(v.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

#[test]
fn preview_layout() {
    let (header, cols) = preview_columns(&[NoiseSpec::none()]);
    assert_eq!(header, vec!["index", "clean", "none"]);
    assert_eq!(cols[1], cols[2]);

    let linear: Vec<NoiseSpec> = [0.2, 0.4, 0.6, 0.8].map(NoiseSpec::linear).to_vec();
    let (header, cols) = preview_columns(&linear);
    assert_eq!(header.len(), 6);
    assert_eq!(header[2..], ["linear_0.2", "linear_0.4", "linear_0.6", "linear_0.8"]);
    assert_eq!(cols[0].len(), 512);

    let (_, cols) = preview_columns(&[NoiseSpec::awgn(80.0, 1)]);
    assert!(moments(&cols[2]).1 > moments(&cols[1]).1);
}

proptest! {
    #[test]
    fn linear_slopes_compose(a in 0.0f64..2.0, b in 0.0f64..2.0, len in 1usize..400) {
        let x: Vec<f64> = (0..len).map(|i| (i as f64).sqrt() * 10.0 - 50.0).collect();
        let ab = apply_linear(&apply_linear(&x, a).unwrap(), b).unwrap();
        let sum = apply_linear(&x, a + b).unwrap();
        for (p, q) in ab.iter().zip(&sum) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1.0));
        }
    }

    #[test]
    fn awgn_seed_determinism(seed in any::<u64>(), sigma in 0.1f64..100.0) {
        let x = vec![1.0; 64];
        prop_assert_eq!(apply_awgn(&x, sigma, seed).unwrap(), apply_awgn(&x, sigma, seed).unwrap());
    }
}
