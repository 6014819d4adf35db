//! Class-per-directory image datasets: indexing, decoding, augmentation and batching.

mod augment;
mod batch;
mod image;
mod index;

pub use augment::{apply_transform, augment, AugmentConfig, AugmentParams};
pub use batch::{batch_count, batches, Batch, BatchIter};
pub use image::{decode_rgb, load_sample, resize_bilinear, LoadOptions, Normalization, Sample};
pub use index::{scan_dataset, DatasetIndex, Entry, Split};
