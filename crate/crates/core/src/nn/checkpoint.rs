//! Plain-text model checkpoints.
//!
//! ```text
//! noisebench-model v1
//! input <channels> <length> classes <k>
//! layers <n>
//! layer <kind> kernel <k> out <c|-> stride <s> padding <same|valid>
//! tensor <len>
//! <values separated by spaces>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip exponent formatting, so
//! write -> read -> write reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::layers::{LayerKind, LayerSpec, Padding};
use super::model::Model;

const MAGIC: &str = "noisebench-model v1";

pub fn to_string(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "input {} {} classes {}",
        model.input_channels, model.input_len, model.num_classes
    );
    let _ = writeln!(out, "layers {}", model.layers.len());
    for layer in &model.layers {
        let s = layer.spec;
        let oc = s.out_channels.map_or_else(|| "-".to_string(), |c| c.to_string());
        let _ = writeln!(
            out,
            "layer {} kernel {} out {} stride {} padding {}",
            s.kind.as_str(),
            s.kernel,
            oc,
            s.stride,
            s.padding.as_str()
        );
        for tensor in &layer.params {
            let _ = writeln!(out, "tensor {}", tensor.len());
            let mut first = true;
            for v in tensor {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn from_str(text: &str) -> Result<Model> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let bad = |line: u64, msg: &str| Error::Parse {
        path: "<checkpoint>".into(),
        line,
        message: msg.to_string(),
    };
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(0, &format!("unexpected end of checkpoint, expected {what}")));

    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err(bad(n, "not a noisebench model checkpoint"));
    }
    let (n, dims) = next("input line")?;
    let f: Vec<&str> = dims.split_whitespace().collect();
    let parse_usize = |s: &str, n: u64| s.parse::<usize>().map_err(|_| bad(n, &format!("invalid integer `{s}`")));
    if f.len() != 5 || f[0] != "input" || f[3] != "classes" {
        return Err(bad(n, "malformed input line"));
    }
    let (channels, length, classes) = (parse_usize(f[1], n)?, parse_usize(f[2], n)?, parse_usize(f[4], n)?);
    let (n, count) = next("layer count")?;
    let count = match count.split_whitespace().collect::<Vec<_>>()[..] {
        ["layers", c] => parse_usize(c, n)?,
        _ => return Err(bad(n, "malformed layers line")),
    };

    let mut specs = Vec::with_capacity(count);
    let mut tensors: Vec<Vec<Vec<f64>>> = Vec::with_capacity(count);
    let mut current: Vec<Vec<f64>> = Vec::new();
    // tensor counts are checked against the rebuilt model below
    let mut rest: Vec<(u64, &str)> = Vec::new();
    while let Ok(l) = next("") {
        rest.push(l);
    }
    let mut idx = 0;
    while idx < rest.len() {
        let (n, line) = rest[idx];
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.first().copied() {
            Some("layer") => {
                if f.len() != 10 {
                    return Err(bad(n, "malformed layer line"));
                }
                if !specs.is_empty() {
                    tensors.push(std::mem::take(&mut current));
                }
                let kind = LayerKind::parse(f[1]).ok_or_else(|| bad(n, &format!("unknown layer kind `{}`", f[1])))?;
                let out_channels = if f[5] == "-" { None } else { Some(parse_usize(f[5], n)?) };
                let padding = match f[9] {
                    "same" => Padding::Same,
                    "valid" => Padding::Valid,
                    p => return Err(bad(n, &format!("unknown padding `{p}`"))),
                };
                specs.push(LayerSpec {
                    kind,
                    kernel: parse_usize(f[3], n)?,
                    out_channels,
                    stride: parse_usize(f[7], n)?,
                    padding,
                });
                idx += 1;
            }
            Some("tensor") if f.len() == 2 => {
                let len = parse_usize(f[1], n)?;
                let (vn, values) = *rest.get(idx + 1).ok_or_else(|| bad(n, "tensor without values"))?;
                let parsed: Vec<f64> = values
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(vn, &format!("invalid number `{t}`"))))
                    .collect::<Result<_>>()?;
                if parsed.len() != len {
                    return Err(bad(vn, &format!("expected {len} values, got {}", parsed.len())));
                }
                current.push(parsed);
                idx += 2;
            }
            _ => return Err(bad(n, "expected `layer` or `tensor`")),
        }
    }
    if !specs.is_empty() {
        tensors.push(current);
    }
    if specs.len() != count {
        return Err(bad(0, &format!("declared {count} layers, found {}", specs.len())));
    }
    let mut model = Model::uninitialized(&specs, channels, length, classes)?;
    for (i, (layer, params)) in model.layers.iter_mut().zip(tensors).enumerate() {
        if layer.params.len() != params.len() || layer.params.iter().zip(&params).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape(format!("checkpoint tensors do not match layer {i}")));
        }
        layer.params = params;
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::presets::Preset;

    #[test]
    fn write_read_write_is_byte_identical() {
        let arch = Preset::SepCnn.layers();
        let model = Model::new(&arch, 1, 64, 4, 17).unwrap();
        let first = to_string(&model);
        let back = from_str(&first).unwrap();
        assert_eq!(back, model);
        assert_eq!(to_string(&back), first);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_str("hello").is_err());
        let model = Model::new(&Preset::Cnn.layers(), 1, 64, 2, 1).unwrap();
        let text = to_string(&model).replacen("tensor 256", "tensor 255", 1);
        assert!(from_str(&text).is_err());
    }
}
