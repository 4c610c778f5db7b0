//! Schemas, vocabularies, encoding, splitting, and mini-batching.

mod dataset;
mod record;
mod schema;
mod vocab;

pub use dataset::{batch_iter, split_dataset, Batch, BatchIter, Dataset, InstanceRef};
pub use record::{parse_records, read_records, write_records, RawRecord};
pub use schema::{FieldKind, FieldSchema, Schema};
pub use vocab::{EncodedInstance, FieldVocab, Vocabulary, OOV_INDEX};
