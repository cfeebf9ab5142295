use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

use super::layers::LayerSpec;
use super::model::conv_block;

/// The two shipped classifiers. They share one macro-structure and differ
/// only in the convolution kind:
/// conv(k=16, 16ch, same) -> relu -> maxpool(4) -> conv(k=16, 32ch, same)
/// -> relu -> maxpool(4) -> global average pool -> dense(classes) -> softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cnn,
    SepCnn,
}

impl Preset {
    pub fn layers(self) -> Vec<LayerSpec> {
        let sep = self == Preset::SepCnn;
        vec![
            conv_block(sep, 16, 16),
            LayerSpec::relu(),
            LayerSpec::maxpool(4),
            conv_block(sep, 16, 32),
            LayerSpec::relu(),
            LayerSpec::maxpool(4),
            LayerSpec::global_avg_pool(),
            LayerSpec::dense(None),
            LayerSpec::softmax(),
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Cnn => "cnn",
            Preset::SepCnn => "sepcnn",
        }
    }

    /// Table label.
    pub fn display_name(self) -> &'static str {
        match self {
            Preset::Cnn => "CNN",
            Preset::SepCnn => "Separable CNN",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Preset::Cnn),
            "sepcnn" => Ok(Preset::SepCnn),
            other => Err(Error::invalid(format!("unknown classifier `{other}`"))),
        }
    }
}
