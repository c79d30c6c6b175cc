//! Concrete output spaces: flat multiclass labels, leaves of a taxonomy tree,
//! and label sequences with a linear-chain feature map.

mod chain;
pub mod enumerate;
mod multiclass;
mod taxonomy;

pub use chain::{ChainLoss, ChainSpace, DEFAULT_ENUMERATION_CAP};
pub use multiclass::MulticlassSpace;
pub use taxonomy::{Taxonomy, TaxonomyNode, TaxonomySpace};
