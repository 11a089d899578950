//! Beam search over the n-gram model.
//!
//! The prefix is split into a body (every piece but the last, LPM-encoded
//! after `<s>`) and a dangling fragment (the last `\s*\S+` piece, or trailing
//! whitespace). Generated tokens must reproduce the fragment before they may
//! add new text. Hypotheses that share their n-gram state, fragment progress
//! and word state have identical futures, so only the cheapest one is kept
//! per state.

use std::cmp::Ordering;
use std::collections::HashSet;

use super::model::NGramModel;
use super::vocab::{SubwordVocabulary, TokenId, BOS, EOS};
use crate::error::{Error, Result};
use crate::suggestion::{Source, Suggestion};
use crate::text::{char_len, pieces};

pub const DEFAULT_BEAM_WIDTH: usize = 10;
pub const DEFAULT_MAX_CHARS: usize = 256;
pub const DEFAULT_FRAGMENT_TOKENS: usize = 3;
pub const DEFAULT_ENTROPY_THRESHOLDS: [f64; 2] = [3.0, 0.6];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StopPolicy {
    #[default]
    None,
    /// Finish once the completion holds `t` words.
    MaxWords(u32),
    /// Finish before emitting from a distribution whose entropy (nats)
    /// exceeds the threshold.
    Entropy(f64),
}

impl StopPolicy {
    pub fn validate(self) -> Result<Self> {
        match self {
            StopPolicy::MaxWords(t) if !(1..=10).contains(&t) => {
                Err(Error::InvalidArgument(format!("max words must be in 1..=10, got {t}")))
            }
            StopPolicy::Entropy(h) if !(h > 0.0) || !h.is_finite() => Err(Error::InvalidArgument(format!(
                "entropy threshold must be positive, got {h}"
            ))),
            p => Ok(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub stop: StopPolicy,
    pub max_chars: usize,
    /// Hard cap on generated tokens. When set, the search runs every depth up
    /// to the cap; otherwise it ends once no live hypothesis has a better
    /// running score than the best finished one.
    pub max_tokens: Option<usize>,
    /// The fragment must be reproduced within this many tokens.
    pub fragment_tokens: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: DEFAULT_BEAM_WIDTH,
            stop: StopPolicy::None,
            max_chars: DEFAULT_MAX_CHARS,
            max_tokens: None,
            fragment_tokens: DEFAULT_FRAGMENT_TOKENS,
        }
    }
}

/// −Σ p ln p, with 0 ln 0 = 0.
pub fn entropy(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// A finished hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Finished {
    /// Text after the fragment.
    pub completion: String,
    pub tokens: Vec<TokenId>,
    pub cum_nll: f64,
    /// −cum_nll / token count (higher is better).
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Distinct completions, best first.
    pub finished: Vec<Finished>,
    pub abstain_reason: Option<String>,
}

impl SearchOutcome {
    fn abstain(reason: impl Into<String>) -> Self {
        SearchOutcome {
            finished: Vec::new(),
            abstain_reason: Some(reason.into()),
        }
    }

    pub fn best(&self) -> Option<&Finished> {
        self.finished.first()
    }
}

/// Splits a prefix into its encoded body context and the dangling fragment.
pub fn split_prefix<'a>(vocab: &SubwordVocabulary, prefix: &'a str) -> Result<(Vec<TokenId>, &'a str)> {
    let ps = pieces(prefix);
    let frag = ps.last().copied().unwrap_or("");
    let body = &prefix[..prefix.len() - frag.len()];
    let mut ctx = vec![BOS];
    ctx.extend(vocab.encode_lpm(body)?);
    Ok((ctx, frag))
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    surface: String,
    cum_nll: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct StateKey {
    lm: u128,
    fragment: u32,
    words: u32,
    in_word: bool,
}

const FRAGMENT_DONE: u32 = u32::MAX;

fn word_state(completion: &str) -> (u32, bool) {
    let mut words = 0;
    let mut in_word = false;
    for c in completion.chars() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
        }
    }
    (words, in_word)
}

struct Searcher<'a> {
    model: &'a NGramModel,
    vocab: &'a SubwordVocabulary,
    cfg: SearchConfig,
    context: Vec<TokenId>,
    fragment: &'a str,
}

impl Searcher<'_> {
    fn done(&self, surface: &str) -> bool {
        surface.len() >= self.fragment.len()
    }

    fn admissible(&self, surface: &str) -> bool {
        if surface.len() <= self.fragment.len() {
            self.fragment.starts_with(surface)
        } else {
            surface.starts_with(self.fragment)
        }
    }

    fn completion<'s>(&self, surface: &'s str) -> &'s str {
        &surface[self.fragment.len().min(surface.len())..]
    }

    fn key(&self, tokens: &[TokenId], surface: &str) -> StateKey {
        let keep = self.model.order().saturating_sub(1);
        let mut lm = 0u128;
        let hist = self.context.iter().chain(tokens.iter());
        let total = self.context.len() + tokens.len();
        for &t in hist.skip(total.saturating_sub(keep)) {
            lm = (lm << 16) | (t as u128 + 1);
        }
        let (fragment, (words, in_word)) = if self.done(surface) {
            let ws = match self.cfg.stop {
                StopPolicy::MaxWords(_) => word_state(self.completion(surface)),
                _ => (0, false),
            };
            (FRAGMENT_DONE, ws)
        } else {
            (surface.len() as u32, (0, false))
        };
        StateKey {
            lm,
            fragment,
            words,
            in_word,
        }
    }

    fn finish(&self, out: &mut Vec<Finished>, h: &Hyp, extra: Option<(TokenId, f64)>) {
        let mut tokens = h.tokens.clone();
        let mut cum = h.cum_nll;
        if let Some((t, nll)) = extra {
            tokens.push(t);
            cum += nll;
        }
        let score = if tokens.is_empty() {
            f64::NEG_INFINITY
        } else {
            -cum / tokens.len() as f64
        };
        out.push(Finished {
            completion: self.completion(&h.surface).to_string(),
            tokens,
            cum_nll: cum,
            score,
        });
    }

    fn run(&self) -> Vec<Finished> {
        let cfg = &self.cfg;
        let mut finished = Vec::new();
        let mut live = vec![Hyp {
            tokens: Vec::new(),
            surface: String::new(),
            cum_nll: 0.0,
        }];
        let mut ctx_buf = Vec::new();
        // (parent, token, cum_nll)
        let mut cands: Vec<(usize, TokenId, f64)> = Vec::new();

        while !live.is_empty() {
            cands.clear();
            for (i, h) in live.iter().enumerate() {
                let done = self.done(&h.surface);
                let n = h.tokens.len();
                let capped = cfg.max_tokens.is_some_and(|m| n >= m);
                if done && (capped || char_len(self.completion(&h.surface)) >= cfg.max_chars) {
                    self.finish(&mut finished, h, None);
                    continue;
                }
                if !done && (capped || n >= cfg.fragment_tokens) {
                    continue;
                }
                ctx_buf.clear();
                ctx_buf.extend_from_slice(&self.context);
                ctx_buf.extend_from_slice(&h.tokens);
                let dist = self.model.next_token_distribution(&ctx_buf);
                if done {
                    if let StopPolicy::Entropy(th) = cfg.stop {
                        if entropy(&dist) > th {
                            self.finish(&mut finished, h, None);
                            continue;
                        }
                    }
                }
                let mut over_budget = false;
                for (t, &p) in dist.iter().enumerate() {
                    let t = t as TokenId;
                    if p <= 0.0 || t == BOS {
                        continue;
                    }
                    let nll = -p.ln();
                    if t == EOS {
                        if done {
                            self.finish(&mut finished, h, Some((EOS, nll)));
                        }
                        continue;
                    }
                    let tok = self.vocab.surface(t);
                    let fits = if done {
                        true
                    } else {
                        let mut s = String::with_capacity(h.surface.len() + tok.len());
                        s.push_str(&h.surface);
                        s.push_str(tok);
                        self.admissible(&s)
                    };
                    if !fits {
                        continue;
                    }
                    if let StopPolicy::MaxWords(limit) = cfg.stop {
                        let mut s = h.surface.clone();
                        s.push_str(tok);
                        if word_state(self.completion(&s)).0 > limit {
                            over_budget = true;
                            continue;
                        }
                    }
                    cands.push((i, t, h.cum_nll + nll));
                }
                if over_budget {
                    self.finish(&mut finished, h, None);
                }
            }
            live = self.select(&live, &mut cands);

            if cfg.max_tokens.is_none() && !live.is_empty() {
                let best_fin = finished.iter().map(|f| f.score).fold(f64::NEG_INFINITY, f64::max);
                let best_live = live
                    .iter()
                    .map(|h| -h.cum_nll / h.tokens.len() as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                if best_fin >= best_live {
                    break;
                }
            }
        }
        finished
    }

    /// Keeps the `beam_width` cheapest candidates with distinct state keys.
    fn select(&self, live: &[Hyp], cands: &mut [(usize, TokenId, f64)]) -> Vec<Hyp> {
        let text_of = |c: &(usize, TokenId, f64)| -> String {
            let mut s = live[c.0].surface.clone();
            s.push_str(self.vocab.surface(c.1));
            s
        };
        cands.sort_unstable_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap_or(Ordering::Equal)
                .then_with(|| text_of(a).cmp(&text_of(b)))
                .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        let mut seen: HashSet<StateKey> = HashSet::new();
        let mut next = Vec::with_capacity(self.cfg.beam_width);
        for c in cands.iter() {
            if next.len() >= self.cfg.beam_width {
                break;
            }
            let parent = &live[c.0];
            let mut tokens = parent.tokens.clone();
            tokens.push(c.1);
            let surface = text_of(c);
            let key = self.key(&tokens, &surface);
            if !seen.insert(key) {
                continue;
            }
            next.push(Hyp {
                tokens,
                surface,
                cum_nll: c.2,
            });
        }
        next
    }
}

fn rank(mut finished: Vec<Finished>) -> Vec<Finished> {
    finished.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.completion.cmp(&b.completion))
    });
    let mut seen = HashSet::new();
    finished.retain(|f| seen.insert(f.completion.clone()));
    finished
}

/// Runs the beam search and returns every finished hypothesis, best first
/// (one per distinct completion).
pub fn qb_search(model: &NGramModel, vocab: &SubwordVocabulary, prefix: &str, cfg: &SearchConfig) -> SearchOutcome {
    if prefix.is_empty() {
        return SearchOutcome::abstain("empty prefix");
    }
    if cfg.beam_width == 0 {
        return SearchOutcome::abstain("beam width is zero");
    }
    if let Some((offset, ch)) = vocab.first_unknown_char(prefix) {
        return SearchOutcome::abstain(format!("unknown character {ch:?} at offset {offset}"));
    }
    let (context, fragment) = match split_prefix(vocab, prefix) {
        Ok(x) => x,
        Err(e) => return SearchOutcome::abstain(e.to_string()),
    };
    let s = Searcher {
        model,
        vocab,
        cfg: *cfg,
        context,
        fragment,
    };
    let finished = rank(s.run());
    if finished.is_empty() {
        return SearchOutcome::abstain("no admissible hypothesis");
    }
    SearchOutcome {
        finished,
        abstain_reason: None,
    }
}

/// Top-1 suggestion. An empty best completion is an abstention.
pub fn qb_suggest(model: &NGramModel, vocab: &SubwordVocabulary, prefix: &str, cfg: &SearchConfig) -> Suggestion {
    let out = qb_search(model, vocab, prefix, cfg);
    match out.best() {
        Some(b) if !b.completion.is_empty() => Suggestion::new(b.completion.clone(), b.score, Source::Qb),
        Some(_) => Suggestion::abstain(Source::Qb, "model predicts nothing further"),
        None => Suggestion::abstain(Source::Qb, out.abstain_reason.unwrap_or_default()),
    }
}

/// Up to `k` distinct non-empty completions with their scores.
pub fn qb_candidates(
    model: &NGramModel,
    vocab: &SubwordVocabulary,
    prefix: &str,
    cfg: &SearchConfig,
    k: usize,
) -> Vec<(String, f64)> {
    qb_search(model, vocab, prefix, cfg)
        .finished
        .into_iter()
        .filter(|f| !f.completion.is_empty())
        .take(k)
        .map(|f| (f.completion, f.score))
        .collect()
}
