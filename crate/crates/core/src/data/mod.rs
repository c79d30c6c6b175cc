//! Dataset and taxonomy files, synthetic generators, and fold planning.

mod folds;
mod io;
mod synth;

pub use folds::{make_folds, mask_labels, FoldPlan, FoldSplit, NUM_FOLDS};
pub use io::{
    load_dataset, load_points, load_taxonomy, read_dataset, save_dataset, save_taxonomy, write_dataset, write_taxonomy,
    TaxonomyFile,
};
pub use synth::{synth_blobs, synth_chains, synth_taxonomy_blobs, BlobsConfig, ChainSynthConfig, TaxonomyBlobsConfig};
