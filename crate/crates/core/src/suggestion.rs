use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::char_len;

/// Which model produced a suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "MPC")]
    Mpc,
    #[serde(rename = "MPCPP")]
    Mpcpp,
    #[serde(rename = "QB")]
    Qb,
    #[serde(rename = "RERANKED")]
    Reranked,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Mpc => "MPC",
            Source::Mpcpp => "MPCPP",
            Source::Qb => "QB",
            Source::Reranked => "RERANKED",
        })
    }
}

/// A single ghost suggestion: the text that would be rendered after the
/// caret. Scores are oriented so that higher means more confident.
///
/// An empty `text` is an abstention. Abstentions are kept (they count
/// against trigger rate) and carry `f64::NEG_INFINITY` as score.
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub text: String,
    pub score: f64,
    pub source: Source,
    pub len_chars: usize,
    pub abstain_reason: Option<String>,
}

impl Suggestion {
    pub fn new(text: impl Into<String>, score: f64, source: Source) -> Self {
        let text = text.into();
        if text.is_empty() {
            return Suggestion::abstain(source, "empty completion");
        }
        Suggestion {
            len_chars: char_len(&text),
            text,
            score,
            source,
            abstain_reason: None,
        }
    }

    pub fn abstain(source: Source, reason: impl Into<String>) -> Self {
        Suggestion {
            text: String::new(),
            score: f64::NEG_INFINITY,
            source,
            len_chars: 0,
            abstain_reason: Some(reason.into()),
        }
    }

    pub fn is_shown(&self) -> bool {
        !self.text.is_empty()
    }

    /// Returns an abstention unless `score >= min`.
    pub fn gate(self, min: Option<f64>) -> Self {
        match min {
            Some(min) if self.is_shown() && !(self.score >= min) => {
                Suggestion::abstain(self.source, "below confidence threshold")
            }
            _ => self,
        }
    }
}
