//! On-disk formats: binary tensor/matrix containers and JSON/CSV dataset
//! descriptions.

pub mod container;
pub mod dataset;

pub use container::{
    decode_matrix, decode_tensor, encode_matrix, encode_tensor, read_matrix, read_tensor, write_matrix, write_tensor,
};
pub use dataset::{
    apply_mask, encode_labels, encode_trace, load_viewset, parse_labels, parse_manifest, parse_mask, parse_trace,
    read_labels, read_manifest, read_mask, read_metrics, read_trace, save_result, save_viewset, write_labels,
    write_mask, DatasetManifest, ManifestView, MaskFile, MaskView, ResultPaths, RunResult,
};
