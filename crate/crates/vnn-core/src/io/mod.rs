//! File formats: binary tensors (`VNNT`), binary models (`VNNM`), JSON
//! dataset manifests, and the synthetic motion dataset generator.
//!
//! All binary formats are little-endian and byte-exact: data tensors store
//! f32 payloads to keep clips small, model files store f64 parameters so a
//! training run resumes bit-identically.

pub mod dataset;
pub mod model_file;
pub mod tensor_file;

pub use dataset::{
    gen_synthetic, load_dataset, ClipEntry, DatasetManifest, MotionClass, StreamKind,
    SyntheticConfig,
};
pub use model_file::{load_model, save_cascade, save_two_stream, LoadedModel};
pub use tensor_file::{decode_tensor, encode_tensor, load_tensor, save_tensor};
