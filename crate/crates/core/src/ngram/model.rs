//! Pruned interpolated absolute-discount n-gram model over subword tokens.
//!
//! For a context `h` of length m−1 that survives pruning:
//!
//! ```text
//! P(w | h) = max(c(h w) − D, 0) / c(h)  +  γ(h) · P(w | h')
//! ```
//!
//! where `c(h)` counts every observed continuation of `h`, only unpruned
//! n-grams contribute a discounted term, `γ(h)` is whatever mass is left, and
//! `h'` drops the oldest token. Contexts that were never seen (or whose
//! continuations were all pruned) back off completely. The unigram level is
//! the plain relative frequency of the kept unigrams.

use std::collections::HashMap;

use super::vocab::{SubwordVocabulary, TokenId, BOS, EOS};
use crate::container::{Decoder, Encoder, Kind};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_PRUNE: [u32; 8] = [0, 1, 1, 2, 2, 3, 3, 4];
pub const DEFAULT_DISCOUNT: f64 = 0.75;
/// Tokens are packed 16 bits at a time into a u128 key.
pub const MAX_ORDER: usize = 8;

/// Length unit for the confidence normalization, recorded in model files.
pub const LENGTH_UNIT: &str = "tokens";

pub(crate) fn pack(tokens: &[TokenId]) -> u128 {
    tokens.iter().fold(0u128, |k, &t| (k << 16) | t as u128)
}

#[derive(Debug, Clone, PartialEq)]
struct Context {
    backoff: f64,
    probs: Box<[(TokenId, f64)]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    prune: Vec<u32>,
    discount: f64,
    unigram: Vec<f64>,
    /// `tables[m - 2]` holds contexts of length m−1 for order m ≥ 2.
    tables: Vec<HashMap<u128, Context>>,
}

/// Raw n-gram counts, one map per order, keyed by packed tokens.
pub struct NGramCounts {
    pub order: usize,
    pub vocab_len: usize,
    pub counts: Vec<HashMap<u128, u64>>,
}

impl NGramCounts {
    pub fn new(order: usize, vocab_len: usize) -> Self {
        NGramCounts {
            order,
            vocab_len,
            counts: vec![HashMap::new(); order],
        }
    }

    /// Adds every n-gram (n ≤ order) ending at each position of
    /// `<s> tokens </s>`. The lone `<s>` is never counted as a unigram.
    pub fn add_sequence(&mut self, tokens: &[TokenId]) {
        let mut seq = Vec::with_capacity(tokens.len() + 2);
        seq.push(BOS);
        seq.extend_from_slice(tokens);
        seq.push(EOS);
        for end in 1..seq.len() {
            for m in 1..=self.order.min(end + 1) {
                let key = pack(&seq[end + 1 - m..=end]);
                *self.counts[m - 1].entry(key).or_default() += 1;
            }
        }
    }
}

fn validate(order: usize, prune: &[u32], discount: f64) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if prune.len() != order {
        return Err(Error::InvalidArgument(format!(
            "expected {order} pruning thresholds, got {}",
            prune.len()
        )));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidArgument(format!(
            "discount must be in [0, 1), got {discount}"
        )));
    }
    Ok(())
}

/// Trains an n-gram model on the LPM encoding of `utterances`.
pub fn train_ngram<S: AsRef<str>>(
    vocab: &SubwordVocabulary,
    utterances: &[S],
    order: usize,
    prune: &[u32],
) -> Result<NGramModel> {
    validate(order, prune, DEFAULT_DISCOUNT)?;
    if utterances.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty corpus".into()));
    }
    let mut counts = NGramCounts::new(order, vocab.len());
    for u in utterances {
        counts.add_sequence(&vocab.encode_lpm(u.as_ref())?);
    }
    NGramModel::from_counts(&counts, prune, DEFAULT_DISCOUNT)
}

impl NGramModel {
    pub fn from_counts(counts: &NGramCounts, prune: &[u32], discount: f64) -> Result<Self> {
        validate(counts.order, prune, discount)?;
        let v = counts.vocab_len;
        let mut unigram = vec![0.0; v];
        let mut total = 0u64;
        for (&k, &c) in &counts.counts[0] {
            if c > prune[0] as u64 {
                unigram[k as usize] = c as f64;
                total += c;
            }
        }
        if total == 0 {
            return Err(Error::InvalidArgument("no unigram survives pruning".into()));
        }
        for p in &mut unigram {
            *p /= total as f64;
        }

        let mut tables = Vec::with_capacity(counts.order.saturating_sub(1));
        for m in 2..=counts.order {
            let thr = prune[m - 1] as u64;
            let mut ctx_total: HashMap<u128, u64> = HashMap::new();
            let mut kept: HashMap<u128, Vec<(TokenId, u64)>> = HashMap::new();
            for (&k, &c) in &counts.counts[m - 1] {
                let h = k >> 16;
                *ctx_total.entry(h).or_default() += c;
                if c > thr {
                    kept.entry(h).or_default().push(((k & 0xFFFF) as TokenId, c));
                }
            }
            let mut table = HashMap::with_capacity(kept.len());
            for (h, mut ws) in kept {
                ws.sort_unstable();
                let ch = ctx_total[&h] as f64;
                let probs: Box<[(TokenId, f64)]> = ws
                    .iter()
                    .map(|&(w, c)| (w, (c as f64 - discount).max(0.0) / ch))
                    .collect();
                let backoff = (1.0 - probs.iter().map(|p| p.1).sum::<f64>()).max(0.0);
                table.insert(h, Context { backoff, probs });
            }
            tables.push(table);
        }
        Ok(NGramModel {
            order: counts.order,
            prune: prune.to_vec(),
            discount,
            unigram,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn prune_thresholds(&self) -> &[u32] {
        &self.prune
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn vocab_len(&self) -> usize {
        self.unigram.len()
    }

    /// Number of stored contexts per order (index 0 is order 2).
    pub fn context_counts(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    /// Whether the n-gram `context ++ [token]` has its own discounted entry.
    pub fn has_ngram(&self, context: &[TokenId], token: TokenId) -> bool {
        if context.is_empty() {
            return self.unigram.get(token as usize).is_some_and(|&p| p > 0.0);
        }
        let Some(table) = self.tables.get(context.len() - 1) else {
            return false;
        };
        table
            .get(&pack(context))
            .is_some_and(|c| c.probs.iter().any(|&(t, _)| t == token))
    }

    /// Full next-token distribution. Only the last `order − 1` tokens of
    /// `context` are used.
    pub fn next_token_distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let mut dist = self.unigram.clone();
        for m in 2..=self.order {
            let need = m - 1;
            if context.len() < need {
                break;
            }
            let h = pack(&context[context.len() - need..]);
            if let Some(c) = self.tables[m - 2].get(&h) {
                for p in &mut dist {
                    *p *= c.backoff;
                }
                for &(t, p) in c.probs.iter() {
                    dist[t as usize] += p;
                }
            }
        }
        dist
    }

    /// `P(token | context)` without materializing the whole distribution.
    pub fn prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let mut p = self.unigram.get(token as usize).copied().unwrap_or(0.0);
        for m in 2..=self.order {
            let need = m - 1;
            if context.len() < need {
                break;
            }
            if let Some(c) = self.tables[m - 2].get(&pack(&context[context.len() - need..])) {
                let own = c
                    .probs
                    .binary_search_by_key(&token, |e| e.0)
                    .map(|i| c.probs[i].1)
                    .unwrap_or(0.0);
                p = own + c.backoff * p;
            }
        }
        p
    }

    /// Total negative log-likelihood and token count of `<s> tokens </s>`
    /// (the end marker is scored, the start marker is not).
    pub fn sequence_nll(&self, tokens: &[TokenId]) -> (f64, usize) {
        let mut seq = Vec::with_capacity(tokens.len() + 2);
        seq.push(BOS);
        seq.extend_from_slice(tokens);
        seq.push(EOS);
        let mut nll = 0.0;
        for i in 1..seq.len() {
            nll -= self.prob(&seq[..i], seq[i]).ln();
        }
        (nll, seq.len() - 1)
    }

    pub fn perplexity<S: AsRef<str>>(&self, vocab: &SubwordVocabulary, utterances: &[S]) -> Result<f64> {
        let (mut nll, mut n) = (0.0, 0usize);
        for u in utterances {
            let (a, b) = self.sequence_nll(&vocab.encode_lpm(u.as_ref())?);
            nll += a;
            n += b;
        }
        Ok((nll / n.max(1) as f64).exp())
    }

    pub(crate) fn encode_body(&self, e: &mut Encoder) {
        e.section(b"NGHD", 1);
        e.u8(self.order as u8);
        e.f64(self.discount);
        e.str(LENGTH_UNIT);
        e.section(b"PRUN", self.prune.len());
        for &t in &self.prune {
            e.u32(t);
        }
        e.section(b"UNIG", self.unigram.len());
        for &p in &self.unigram {
            e.f64(p);
        }
        for table in &self.tables {
            let mut keys: Vec<&u128> = table.keys().collect();
            keys.sort_unstable();
            e.section(b"CTXS", keys.len());
            for k in keys {
                let c = &table[k];
                e.u64((*k >> 64) as u64);
                e.u64(*k as u64);
                e.f64(c.backoff);
                e.u32(c.probs.len() as u32);
                for &(t, p) in c.probs.iter() {
                    e.u16(t);
                    e.f64(p);
                }
            }
        }
    }

    pub(crate) fn decode_body(d: &mut Decoder<'_>) -> Result<Self> {
        d.section(b"NGHD")?;
        let order = d.u8()? as usize;
        let discount = d.f64()?;
        let unit = d.str()?;
        if unit != LENGTH_UNIT {
            return Err(Error::Format(format!("unsupported length unit {unit:?}")));
        }
        let n = d.section(b"PRUN")?;
        let prune = (0..n).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
        validate(order, &prune, discount).map_err(|e| Error::Format(e.to_string()))?;
        let n = d.section(b"UNIG")?;
        let unigram = (0..n).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
        let mut tables = Vec::new();
        for _ in 2..=order {
            let n = d.section(b"CTXS")?;
            let mut table = HashMap::with_capacity(n);
            for _ in 0..n {
                let hi = d.u64()? as u128;
                let lo = d.u64()? as u128;
                let backoff = d.f64()?;
                let k = d.u32()? as usize;
                let mut probs = Vec::with_capacity(k.min(unigram.len()));
                for _ in 0..k {
                    let t = d.u16()?;
                    if t as usize >= unigram.len() {
                        return Err(Error::Format(format!("token id {t} out of range")));
                    }
                    probs.push((t, d.f64()?));
                }
                table.insert(
                    (hi << 64) | lo,
                    Context {
                        backoff,
                        probs: probs.into(),
                    },
                );
            }
            tables.push(table);
        }
        Ok(NGramModel {
            order,
            prune,
            discount,
            unigram,
            tables,
        })
    }
}

/// A vocabulary plus the model trained on it: the unit stored in one
/// n-gram index file.
#[derive(Debug, Clone, PartialEq)]
pub struct QbModel {
    pub vocab: SubwordVocabulary,
    pub model: NGramModel,
}

impl QbModel {
    pub fn to_bytes(&self, fingerprint: &str) -> Vec<u8> {
        let mut e = Encoder::with_header(Kind::NGram, fingerprint);
        self.vocab.encode_body(&mut e);
        self.model.encode_body(&mut e);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let mut d = Decoder::new(bytes);
        let h = d.expect(Kind::NGram)?;
        let vocab = SubwordVocabulary::decode_body(&mut d)?;
        let model = NGramModel::decode_body(&mut d)?;
        d.finish()?;
        if model.vocab_len() != vocab.len() {
            return Err(Error::Format("vocabulary and model sizes disagree".into()));
        }
        Ok((QbModel { vocab, model }, h.fingerprint))
    }
}
