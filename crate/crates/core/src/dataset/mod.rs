//! Labeled samples, neuron-level fold splits and the `.nqcd` patch format.

mod folds;
mod nqcd;
mod pairs;

pub use folds::{split_folds, FoldSplit, DEFAULT_FOLDS};
pub use nqcd::{
    export_dataset, import_dataset, Group, NqcdReader, NqcdWriter, SampleRecord, HEADER_LEN, MAGIC, PAYLOAD_LEN,
    RECORD_LEN, VERSION,
};
pub use pairs::{build_control_pool, build_pairs, Catalog, CatalogEntry};
