//! Persistence, the synthetic delayed-coincidence task and the command line.
//!
//! All formats are little-endian or plain JSON, so files are portable and
//! byte-identical across runs with the same inputs and seed.

pub mod cli;
mod model_file;
mod records;
mod synthetic;

pub use model_file::{
    decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION,
};
pub use records::{
    load_dataset, load_log, load_raster, load_traces, raster_from_json, raster_to_json,
    save_dataset, save_log, save_raster, save_traces, RasterFile,
};
pub use synthetic::{gen_synthetic, SyntheticTask};
