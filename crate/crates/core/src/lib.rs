pub mod config;
pub mod container;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod eval;
pub mod ngram;
pub mod pipeline;
pub mod rerank;
pub mod service;
pub mod suggestion;
pub mod text;
pub mod trie;

pub use engine::{Engine, ModelKind, SuggestRequest};
pub use error::{Error, Result};
pub use suggestion::{Source, Suggestion};
