//! From-scratch 1D network engine: standard and depthwise-separable
//! convolutions with analytic gradients, pooling, a dense/softmax head, Adam,
//! and a finite-difference gradient checker.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod layers;
mod model;
mod presets;
mod train;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use layers::{
    conv1d_forward, conv1d_param_count, conv_geometry, sepconv1d_forward, sepconv1d_param_count, FeatureMap,
    LayerKind, LayerSpec, Padding,
};
pub use model::{argmax, cross_entropy, BackwardResult, Gradients, Layer, Model};
pub use presets::Preset;
pub use train::{evaluate_windows, train, EarlyStopping, EpochRecord, History, StopDecision, TrainConfig};
