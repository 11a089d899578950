//! Subword n-gram completion: vocabulary learning, LM training and beam
//! search with optional early stopping.

pub mod model;
pub mod search;
pub mod vocab;

pub use model::{train_ngram, NGramModel, QbModel, DEFAULT_ORDER, DEFAULT_PRUNE};
pub use search::{entropy, qb_candidates, qb_search, qb_suggest, SearchConfig, StopPolicy};
pub use vocab::{learn_vocabulary, SubwordVocabulary, TokenId, DEFAULT_VOCAB_SIZE};
