//! Dataset container, validation and synthetic generation.

mod container;
mod dataset;
mod synth;

pub use container::{Container, Tensor, TensorData, MAGIC, VERSION};
pub use dataset::{
    load_container, save_container, validate_dataset, Dataset, FeatureStack, Violation,
};
pub use synth::{generate_synthetic, SynthSpec, GENERATOR_MAP, REGION_ATTRIBUTES};

pub(crate) use dataset::{i32_payload, matrix_from, matrix_tensor};
pub(crate) use synth::parse_kv;
