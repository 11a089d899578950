//! Fixtures shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ghost_core::corpus::Utterance;
use ghost_core::pipeline::{cmd_build, cmd_train_ngram, BuildConfig, NGramConfig};

/// Small hand-written dialogs: (human turns, bot reply after each).
pub const SMALL: &[&[&str]] = &[
    &["how are you", "what is your name"],
    &["how are you", "where do you live"],
    &["how are you doing today", "what is your name"],
    &["how is work", "where do you work"],
    &["hi there", "how are you"],
    &["what time is it", "i live in paris"],
];

pub fn small_utterances() -> Vec<Utterance> {
    let mut out = Vec::new();
    for (d, turns) in SMALL.iter().enumerate() {
        let mut ctx = Vec::new();
        for (t, text) in turns.iter().enumerate() {
            out.push(Utterance::new(format!("d{d}-{t}"), *text, ctx.clone()));
            ctx.push(text.to_string());
            ctx.push("ok".to_string());
        }
    }
    out
}

pub fn write_small_jsonl(path: &Path) {
    let mut s = String::new();
    for (d, turns) in SMALL.iter().enumerate() {
        let mut t = Vec::new();
        for text in turns.iter() {
            t.push(json!({"speaker": "human", "text": text}));
            t.push(json!({"speaker": "bot", "text": "ok"}));
        }
        s.push_str(&json!({"dialog_id": format!("d{d}"), "turns": t}).to_string());
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

pub fn small_ngram_config() -> NGramConfig {
    NGramConfig {
        order: 3,
        vocab_size: 60,
        prune: vec![0, 0, 0],
    }
}

/// All four index files for [`small_utterances`] in `dir`.
pub fn build_small(dir: &Path) {
    let utts = small_utterances();
    cmd_build(
        &utts,
        dir,
        &BuildConfig {
            max_len: 500,
            min_suffix_freq: 2,
        },
    )
    .unwrap();
    cmd_train_ngram(&utts, dir, &small_ngram_config()).unwrap();
}

const WORDS: &[&str] = &[
    "i",
    "you",
    "we",
    "they",
    "it",
    "the",
    "a",
    "my",
    "your",
    "is",
    "are",
    "was",
    "do",
    "did",
    "have",
    "can",
    "will",
    "would",
    "like",
    "love",
    "want",
    "need",
    "think",
    "know",
    "go",
    "going",
    "to",
    "and",
    "but",
    "so",
    "not",
    "really",
    "very",
    "good",
    "great",
    "nice",
    "bad",
    "time",
    "day",
    "today",
    "tomorrow",
    "work",
    "home",
    "school",
    "movie",
    "music",
    "food",
    "dinner",
    "weekend",
    "friend",
    "family",
    "dog",
    "cat",
    "book",
    "game",
    "what",
    "where",
    "when",
    "how",
    "why",
    "who",
    "that",
    "this",
    "there",
    "here",
    "of",
    "in",
    "on",
    "at",
    "with",
    "for",
    "about",
    "from",
    "some",
    "any",
    "more",
    "too",
    "just",
    "yes",
    "no",
    "sure",
    "thanks",
    "please",
    "sorry",
    "hello",
    "hi",
    "okay",
    "maybe",
    "never",
    "always",
    "sometimes",
    "now",
    "later",
    "again",
    "new",
    "old",
];

const COMMON: &[&str] = &[
    "how are you",
    "i am fine thanks",
    "what do you do for a living",
    "where are you from",
    "nice to meet you",
    "what is your name",
    "do you have any pets",
    "i like to read books",
    "what are you doing today",
    "thank you so much",
    "see you later",
    "have a nice day",
    "i love music",
    "what time is it",
    "do you like movies",
    "i am going to work",
    "that sounds great",
    "how was your weekend",
    "me too",
    "i do not know",
];

/// Deterministic synthetic chat corpus: a fixed pool of frequent
/// utterances drawn with Zipf-like weights, mixed with sentences from a
/// seeded first-order word chain.
pub struct SyntheticCorpus {
    rng: ChaCha8Rng,
    next: Vec<Vec<usize>>,
}

impl SyntheticCorpus {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next = (0..WORDS.len())
            .map(|_| (0..6).map(|_| rng.random_range(0..WORDS.len())).collect())
            .collect();
        SyntheticCorpus { rng, next }
    }

    pub fn sentence(&mut self) -> String {
        let len = self.rng.random_range(2..=12);
        let mut w = self.rng.random_range(0..WORDS.len());
        let mut out = vec![WORDS[w]];
        for _ in 1..len {
            w = if self.rng.random_bool(0.85) {
                *self.next[w].choose(&mut self.rng).unwrap()
            } else {
                self.rng.random_range(0..WORDS.len())
            };
            out.push(WORDS[w]);
        }
        out.join(" ")
    }

    pub fn utterance(&mut self) -> String {
        if self.rng.random_bool(0.3) {
            let r: f64 = self.rng.random();
            let i = ((COMMON.len() as f64).powf(r) - 1.0) as usize;
            COMMON[i.min(COMMON.len() - 1)].to_string()
        } else {
            self.sentence()
        }
    }

    pub fn texts(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.utterance()).collect()
    }

    /// Utterances grouped into dialogs of 2 to 6 turns; each one carries
    /// the earlier turns of its dialog as context.
    pub fn utterances(&mut self, n: usize) -> Vec<Utterance> {
        let mut out = Vec::with_capacity(n);
        let mut dialog = 0;
        while out.len() < n {
            let turns = self.rng.random_range(2..=6);
            let mut ctx: Vec<String> = Vec::new();
            for t in 0..turns {
                if out.len() == n {
                    break;
                }
                let text = self.utterance();
                out.push(Utterance::new(format!("s{dialog}-{t}"), text.clone(), ctx.clone()));
                ctx.push(text);
            }
            dialog += 1;
        }
        out
    }
}
