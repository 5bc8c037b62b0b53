//! Raw review text to padded index sequences and an embedding matrix.

mod dataset;
mod embeddings;
mod tokenize;
mod vocab;

pub use dataset::{
    load_jsonl, split_stratified, write_jsonl, DomainDataset, Review, Split, Splits, SPLIT_PERCENT,
};
pub use embeddings::{load_embeddings, random_embeddings, EmbeddingMatrix};
pub use tokenize::tokenize;
pub use vocab::{EncodedExample, Vocabulary, DEFAULT_MAX_VOCAB, PAD_INDEX};
