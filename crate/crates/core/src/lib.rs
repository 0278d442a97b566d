//! Language-discriminative and meaning-discriminative ABX analysis of
//! multilingual embedding stores.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod rng;
pub mod scorer;
pub mod selection;
pub mod stats;
pub mod store;
pub mod synthetic;
pub mod table;
pub mod triplet;

pub use config::RunConfig;
pub use corpus::{ingest_corpus, AlignmentIndex, SentenceRecord};
pub use error::{AbxError, Result};
pub use retrieval::{retrieval_top1, RetrievalResult};
pub use scorer::{cosine_distance, score_cell, score_triplet, AbxRecord, LayerScope};
pub use store::{get_vector, open_store, EmbeddingMatrix, EmbeddingSource, InMemoryStore, Store};
pub use triplet::{enumerate_all_triplets, sample_triplets, Triplet, TripletMode};
