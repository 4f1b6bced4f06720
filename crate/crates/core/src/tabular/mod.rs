//! Metadata encoding, feature scaling and assembly of fused vectors.

mod fuse;
mod metadata;
mod scaler;

pub use fuse::{flatten_spectrogram, fuse, BlockKind, FusedVector, FusionLayout, LayoutBlock};
pub use metadata::{encode_metadata, MetadataImputer, N_METADATA};
pub use scaler::{Partition, Scaler};
