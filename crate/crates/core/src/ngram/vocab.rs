//! Subword vocabulary: BPE-style merge learning and greedy longest-prefix-match
//! (LPM) encoding.
//!
//! Training text is split into pieces of the form `\s*\S+` (leading
//! whitespace attached to the word that follows), and merges never cross a
//! piece boundary. Every character of the training text is kept as a
//! single-character token so any training string is encodable.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use crate::container::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::text::pieces;

pub type TokenId = u16;

/// End of utterance. Predicted by the language model.
pub const EOS: TokenId = 0;
/// Start of utterance. Context only, never predicted.
pub const BOS: TokenId = 1;
pub const EOS_STR: &str = "</s>";
pub const BOS_STR: &str = "<s>";
const N_SPECIAL: usize = 2;

pub const DEFAULT_VOCAB_SIZE: usize = 4096;
/// Token ids are 16 bits wide.
pub const MAX_VOCAB_SIZE: usize = u16::MAX as usize - N_SPECIAL;

#[derive(Debug, Clone)]
pub struct SubwordVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    matcher: Matcher,
}

impl PartialEq for SubwordVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

/// Character trie over token strings for longest-prefix matching.
#[derive(Debug, Clone, Default)]
struct Matcher {
    edges: HashMap<(u32, char), u32>,
    token_at: Vec<Option<TokenId>>,
}

impl Matcher {
    fn build(tokens: &[String]) -> Self {
        let mut m = Matcher {
            edges: HashMap::new(),
            token_at: vec![None],
        };
        for (id, tok) in tokens.iter().enumerate().skip(N_SPECIAL) {
            let mut cur = 0u32;
            for ch in tok.chars() {
                let next = m.token_at.len() as u32;
                cur = *m.edges.entry((cur, ch)).or_insert_with(|| next);
                if cur == next {
                    m.token_at.push(None);
                }
            }
            m.token_at[cur as usize] = Some(id as TokenId);
        }
        m
    }

    /// Longest token matching at the start of `s`: `(token, byte length)`.
    fn longest(&self, s: &str) -> Option<(TokenId, usize)> {
        let mut cur = 0u32;
        let mut best = None;
        for (i, ch) in s.char_indices() {
            match self.edges.get(&(cur, ch)) {
                Some(&next) => {
                    cur = next;
                    if let Some(t) = self.token_at[cur as usize] {
                        best = Some((t, i + ch.len_utf8()));
                    }
                }
                None => break,
            }
        }
        best
    }
}

impl SubwordVocabulary {
    /// Builds a vocabulary from surface token strings (specials are added).
    pub fn from_tokens<I, S>(surface: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![EOS_STR.to_string(), BOS_STR.to_string()];
        let mut index = HashMap::new();
        for t in surface {
            let t = t.into();
            if t.is_empty() {
                return Err(Error::InvalidArgument("empty token".into()));
            }
            if index.contains_key(&t) {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
            index.insert(t.clone(), tokens.len() as TokenId);
            tokens.push(t);
            if tokens.len() > u16::MAX as usize {
                return Err(Error::InvalidArgument("too many tokens".into()));
            }
        }
        let matcher = Matcher::build(&tokens);
        Ok(SubwordVocabulary { tokens, index, matcher })
    }

    /// Total number of token ids, including the two specials.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == N_SPECIAL
    }

    /// Number of surface (non-special) tokens.
    pub fn surface_len(&self) -> usize {
        self.tokens.len() - N_SPECIAL
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    /// Surface string of a token; specials render as empty.
    pub fn surface(&self, id: TokenId) -> &str {
        if (id as usize) < N_SPECIAL {
            ""
        } else {
            &self.tokens[id as usize]
        }
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn surface_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens[N_SPECIAL..].iter().map(String::as_str)
    }

    pub fn contains_char(&self, ch: char) -> bool {
        let mut b = [0u8; 4];
        self.index.contains_key(ch.encode_utf8(&mut b) as &str)
    }

    /// First character of `text` that has no single-character token.
    pub fn first_unknown_char(&self, text: &str) -> Option<(usize, char)> {
        text.chars().enumerate().find(|&(_, c)| !self.contains_char(c))
    }

    /// Greedy left-to-right longest-prefix-match encoding.
    pub fn encode_lpm(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            match self.matcher.longest(&text[pos..]) {
                Some((tok, n)) => {
                    out.push(tok);
                    pos += n;
                }
                None => {
                    let ch = text[pos..].chars().next().unwrap_or_default();
                    let offset = text[..pos].chars().count();
                    return Err(Error::UnknownCharacter { ch, offset });
                }
            }
        }
        Ok(out)
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&t| self.surface(t)).collect()
    }

    pub(crate) fn encode_body(&self, e: &mut Encoder) {
        e.section(b"VOCB", self.surface_len());
        for t in self.surface_tokens() {
            e.str(t);
        }
    }

    pub(crate) fn decode_body(d: &mut Decoder<'_>) -> Result<Self> {
        let n = d.section(b"VOCB")?;
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(d.str()?);
        }
        SubwordVocabulary::from_tokens(v).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Learns a vocabulary by repeatedly merging the most frequent adjacent
/// symbol pair until `target_size` surface tokens exist or no pair occurs at
/// least twice. Ties go to the lexicographically smallest `(left, right)`.
pub fn learn_vocabulary<S: AsRef<str>>(utterances: &[S], target_size: usize) -> Result<SubwordVocabulary> {
    let mut piece_freq: HashMap<&str, u64> = HashMap::new();
    for u in utterances {
        for p in pieces(u.as_ref()) {
            *piece_freq.entry(p).or_default() += 1;
        }
    }
    if piece_freq.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot learn a vocabulary from an empty corpus".into(),
        ));
    }
    let alphabet: BTreeSet<char> = piece_freq.keys().flat_map(|p| p.chars()).collect();
    if target_size < alphabet.len() {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size {target_size} is smaller than the alphabet ({} characters)",
            alphabet.len()
        )));
    }
    if target_size > MAX_VOCAB_SIZE {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size {target_size} exceeds {MAX_VOCAB_SIZE}"
        )));
    }

    let mut trainer = MergeTrainer::new(alphabet, piece_freq);
    while trainer.strings.len() < target_size {
        if !trainer.step() {
            break;
        }
    }
    SubwordVocabulary::from_tokens(trainer.strings)
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incremental pair counting: only pieces containing the merged pair are
/// recounted after each merge.
struct MergeTrainer {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<Vec<u32>>,
    freq: Vec<u64>,
    counts: HashMap<(u32, u32), u64>,
    where_: HashMap<(u32, u32), HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl MergeTrainer {
    fn new(alphabet: BTreeSet<char>, piece_freq: HashMap<&str, u64>) -> Self {
        let strings: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
        let ids: HashMap<String, u32> = strings.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut sorted: Vec<(&str, u64)> = piece_freq.into_iter().collect();
        sorted.sort_unstable();
        let mut t = MergeTrainer {
            words: sorted
                .iter()
                .map(|(p, _)| p.chars().map(|c| ids[&c.to_string()]).collect())
                .collect(),
            freq: sorted.iter().map(|&(_, f)| f).collect(),
            strings,
            ids,
            counts: HashMap::new(),
            where_: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for w in 0..t.words.len() {
            let f = t.freq[w];
            for pair in t.words[w].windows(2) {
                let pair = (pair[0], pair[1]);
                *t.counts.entry(pair).or_default() += f;
                t.where_.entry(pair).or_default().insert(w);
            }
        }
        let pairs: Vec<(u32, u32)> = t.counts.keys().copied().collect();
        for p in pairs {
            t.push(p);
        }
        t
    }

    fn push(&mut self, pair: (u32, u32)) {
        let count = self.counts.get(&pair).copied().unwrap_or(0);
        if count > 0 {
            self.heap.push(Candidate {
                count,
                left: self.strings[pair.0 as usize].clone(),
                right: self.strings[pair.1 as usize].clone(),
                pair,
            });
        }
    }

    /// Performs one merge. Returns false when no pair occurs twice.
    fn step(&mut self) -> bool {
        let best = loop {
            let Some(c) = self.heap.pop() else {
                return false;
            };
            if self.counts.get(&c.pair).copied() == Some(c.count) {
                break c;
            }
        };
        if best.count < 2 {
            return false;
        }
        let merged = format!("{}{}", best.left, best.right);
        let new_id = match self.ids.get(&merged) {
            Some(&id) => id,
            None => {
                let id = self.strings.len() as u32;
                self.strings.push(merged.clone());
                self.ids.insert(merged, id);
                id
            }
        };

        let mut affected: Vec<usize> = self.where_.remove(&best.pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for w in affected {
            let f = self.freq[w];
            let old = std::mem::take(&mut self.words[w]);
            if !old.windows(2).any(|p| (p[0], p[1]) == best.pair) {
                self.words[w] = old;
                continue;
            }
            for p in old.windows(2) {
                let p = (p[0], p[1]);
                let c = self.counts.get_mut(&p).expect("pair counted");
                *c -= f;
                touched.insert(p);
            }
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == best.pair {
                    new.push(new_id);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            for p in new.windows(2) {
                let p = (p[0], p[1]);
                *self.counts.entry(p).or_default() += f;
                self.where_.entry(p).or_default().insert(w);
                touched.insert(p);
            }
            self.words[w] = new;
        }
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if self.counts.get(&p) == Some(&0) {
                self.counts.remove(&p);
            } else {
                self.push(p);
            }
        }
        true
    }
}
