//! Frequency-annotated character tries: the MPC main trie over whole
//! utterances and the MPC++ suffix trie over word-aligned suffixes.
//!
//! Tries are built once and then frozen into flat arrays with nodes in
//! breadth-first order, so every node's children are contiguous and sorted
//! by character. A frozen trie is immutable and `Sync`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::container::{Decoder, Encoder, Kind};
use crate::error::{Error, Result};
use crate::suggestion::{Source, Suggestion};
use crate::text::{take_chars, word_starts};

pub const DEFAULT_MAX_LEN: usize = 500;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_MIN_FREQ: u32 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Node {
    first_edge: u32,
    n_edges: u32,
    /// indexed strings passing through (or ending at) this node
    pass: u32,
    /// indexed strings ending exactly here
    terminal: u32,
    /// largest `terminal` anywhere in the subtree
    best: u32,
}

/// A completion and its corpus frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharTrie {
    nodes: Vec<Node>,
    edge_chars: Vec<char>,
    edge_targets: Vec<u32>,
}

#[derive(Default)]
struct BuildNode {
    children: Vec<(char, u32)>,
    terminal: u32,
}

impl CharTrie {
    /// Builds a trie from `(string, count)` pairs. Strings are truncated to
    /// `max_len` characters; empty strings are ignored.
    pub fn from_counts<'a, I>(items: I, max_len: usize) -> Self
    where
        I: IntoIterator<Item = (&'a str, u32)>,
    {
        let mut b: Vec<BuildNode> = vec![BuildNode::default()];
        for (s, count) in items {
            let s = take_chars(s, max_len);
            if s.is_empty() || count == 0 {
                continue;
            }
            let mut cur = 0usize;
            for ch in s.chars() {
                let next = match b[cur].children.binary_search_by(|(c, _)| c.cmp(&ch)) {
                    Ok(i) => b[cur].children[i].1 as usize,
                    Err(i) => {
                        let id = b.len() as u32;
                        b[cur].children.insert(i, (ch, id));
                        b.push(BuildNode::default());
                        id as usize
                    }
                };
                cur = next;
            }
            b[cur].terminal += count;
        }
        Self::freeze(b)
    }

    fn freeze(b: Vec<BuildNode>) -> Self {
        // breadth-first renumbering
        let mut order = Vec::with_capacity(b.len());
        let mut new_id = vec![0u32; b.len()];
        order.push(0usize);
        let mut head = 0;
        while head < order.len() {
            let old = order[head];
            new_id[old] = head as u32;
            for &(_, child) in &b[old].children {
                order.push(child as usize);
            }
            head += 1;
        }

        let mut nodes = vec![Node::default(); b.len()];
        let mut edge_chars = Vec::with_capacity(b.len().saturating_sub(1));
        let mut edge_targets = Vec::with_capacity(b.len().saturating_sub(1));
        for (nid, &old) in order.iter().enumerate() {
            let n = &mut nodes[nid];
            n.first_edge = edge_chars.len() as u32;
            n.n_edges = b[old].children.len() as u32;
            n.terminal = b[old].terminal;
            for &(ch, child) in &b[old].children {
                edge_chars.push(ch);
                edge_targets.push(new_id[child as usize]);
            }
        }
        let mut trie = CharTrie {
            nodes,
            edge_chars,
            edge_targets,
        };
        trie.compute_aggregates();
        trie
    }

    /// Fills `pass` and `best` bottom-up. Children always have larger ids
    /// than their parent in breadth-first order.
    fn compute_aggregates(&mut self) {
        for id in (0..self.nodes.len()).rev() {
            let n = self.nodes[id];
            let mut pass = n.terminal;
            let mut best = n.terminal;
            for e in n.first_edge..n.first_edge + n.n_edges {
                let c = self.nodes[self.edge_targets[e as usize] as usize];
                pass += c.pass;
                best = best.max(c.best);
            }
            self.nodes[id].pass = pass;
            self.nodes[id].best = best;
        }
    }

    /// Builds the MPC main trie over whole utterances.
    pub fn build<S: AsRef<str>>(utterances: &[S], max_len: usize) -> Self {
        let mut counts: HashMap<&str, u32> = HashMap::new();
        for u in utterances {
            *counts.entry(take_chars(u.as_ref(), max_len)).or_default() += 1;
        }
        Self::from_counts(counts, max_len)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.first().is_none_or(|r| r.pass == 0)
    }

    /// Number of indexed strings.
    pub fn len(&self) -> u64 {
        self.nodes.first().map_or(0, |r| r.pass as u64)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn child(&self, node: u32, ch: char) -> Option<u32> {
        let n = &self.nodes[node as usize];
        let lo = n.first_edge as usize;
        let hi = lo + n.n_edges as usize;
        self.edge_chars[lo..hi]
            .binary_search(&ch)
            .ok()
            .map(|i| self.edge_targets[lo + i])
    }

    fn edges(&self, node: u32) -> impl Iterator<Item = (char, u32)> + '_ {
        let n = &self.nodes[node as usize];
        let lo = n.first_edge as usize;
        let hi = lo + n.n_edges as usize;
        self.edge_chars[lo..hi]
            .iter()
            .copied()
            .zip(self.edge_targets[lo..hi].iter().copied())
    }

    fn walk(&self, s: &str) -> Option<u32> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut cur = 0u32;
        for ch in s.chars() {
            cur = self.child(cur, ch)?;
        }
        Some(cur)
    }

    /// `(pass_count, terminal_count)` of the node reached by `s`.
    pub fn counts(&self, s: &str) -> Option<(u64, u64)> {
        self.walk(s).map(|n| {
            let n = &self.nodes[n as usize];
            (n.pass as u64, n.terminal as u64)
        })
    }

    /// Total frequency of non-empty completions of `prefix`.
    pub fn completion_mass(&self, prefix: &str) -> u64 {
        self.walk(prefix).map_or(0, |n| {
            let n = &self.nodes[n as usize];
            (n.pass - n.terminal) as u64
        })
    }

    /// Up to `k` non-empty completions of `prefix`, most frequent first,
    /// ties broken by ascending text.
    ///
    /// Best-first search keyed on the largest terminal count in each
    /// subtree, so only the part of the trie that can contribute is visited.
    pub fn top_k(&self, prefix: &str, k: usize) -> Vec<Completion> {
        let Some(start) = self.walk(prefix) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(k.min(16));
        if k == 0 {
            return out;
        }
        let mut heap = BinaryHeap::new();
        for (ch, child) in self.edges(start) {
            heap.push(Frontier {
                priority: self.nodes[child as usize].best,
                text: ch.to_string(),
                node: Some(child),
            });
        }
        while let Some(item) = heap.pop() {
            match item.node {
                None => {
                    out.push(Completion {
                        text: item.text,
                        frequency: item.priority as u64,
                    });
                    if out.len() == k {
                        break;
                    }
                }
                Some(node) => {
                    let n = &self.nodes[node as usize];
                    if n.terminal > 0 {
                        heap.push(Frontier {
                            priority: n.terminal,
                            text: item.text.clone(),
                            node: None,
                        });
                    }
                    for (ch, child) in self.edges(node) {
                        let mut text = String::with_capacity(item.text.len() + ch.len_utf8());
                        text.push_str(&item.text);
                        text.push(ch);
                        heap.push(Frontier {
                            priority: self.nodes[child as usize].best,
                            text,
                            node: Some(child),
                        });
                    }
                }
            }
        }
        out
    }

    pub(crate) fn encode_body(&self, e: &mut Encoder) {
        e.section(b"NODE", self.nodes.len());
        for n in &self.nodes {
            e.u32(n.terminal);
            e.u32(n.n_edges);
        }
        e.section(b"EDGE", self.edge_chars.len());
        for (&ch, &t) in self.edge_chars.iter().zip(&self.edge_targets) {
            e.u32(ch as u32);
            e.u32(t);
        }
    }

    pub(crate) fn decode_body(d: &mut Decoder<'_>) -> Result<Self> {
        let n_nodes = d.section(b"NODE")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut first = 0u64;
        for _ in 0..n_nodes {
            let terminal = d.u32()?;
            let n_edges = d.u32()?;
            nodes.push(Node {
                first_edge: first as u32,
                n_edges,
                terminal,
                ..Node::default()
            });
            first += n_edges as u64;
        }
        let n_edges = d.section(b"EDGE")?;
        if n_edges as u64 != first {
            return Err(Error::Format("edge count does not match node table".into()));
        }
        let mut edge_chars = Vec::with_capacity(n_edges);
        let mut edge_targets = Vec::with_capacity(n_edges);
        for i in 0..n_edges {
            edge_chars.push(d.char()?);
            let t = d.u32()?;
            // breadth-first order: targets point forward
            if t as usize >= n_nodes || t == 0 {
                return Err(Error::Format(format!("edge {i} points to invalid node {t}")));
            }
            edge_targets.push(t);
        }
        for (id, n) in nodes.iter().enumerate() {
            let lo = n.first_edge as usize;
            let hi = lo + n.n_edges as usize;
            if edge_targets[lo..hi].iter().any(|&t| t as usize <= id)
                || edge_chars[lo..hi].windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Format(format!("node {id} has malformed edges")));
            }
        }
        let mut trie = CharTrie {
            nodes,
            edge_chars,
            edge_targets,
        };
        trie.compute_aggregates();
        Ok(trie)
    }

    pub fn to_bytes(&self, fingerprint: &str) -> Vec<u8> {
        let mut e = Encoder::with_header(Kind::MainTrie, fingerprint);
        self.encode_body(&mut e);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let mut d = Decoder::new(bytes);
        let h = d.expect(Kind::MainTrie)?;
        let t = Self::decode_body(&mut d)?;
        d.finish()?;
        Ok((t, h.fingerprint))
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        for (id, n) in self.nodes.iter().enumerate() {
            let child_sum: u32 = self.edges(id as u32).map(|(_, c)| self.nodes[c as usize].pass).sum();
            assert_eq!(n.pass, child_sum + n.terminal, "node {id}");
        }
    }
}

#[derive(PartialEq, Eq)]
struct Frontier {
    priority: u32,
    text: String,
    /// `None` for a finished completion
    node: Option<u32>,
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher priority first, then smaller text, then
        // completions before subtrees with the same text
        self.priority
            .cmp(&other.priority)
            .then_with(|| other.text.cmp(&self.text))
            .then_with(|| other.node.is_some().cmp(&self.node.is_some()))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Relative frequency of a completion among all completions of its prefix.
pub fn mpc_confidence(frequency: u64, sibling_total: u64) -> f64 {
    debug_assert!(frequency >= 1 && frequency <= sibling_total);
    frequency as f64 / sibling_total as f64
}

/// MPC: up to `k` completions of `prefix` from the main trie.
pub fn mpc_topk(trie: &CharTrie, prefix: &str, k: usize) -> Vec<Completion> {
    trie.top_k(prefix, k)
}

/// Scored MPC candidates: `(completion, confidence)`.
pub fn mpc_candidates(trie: &CharTrie, prefix: &str, k: usize) -> Vec<(String, f64)> {
    let top = trie.top_k(prefix, k);
    if top.is_empty() {
        return Vec::new();
    }
    let mass = trie.completion_mass(prefix);
    top.into_iter()
        .map(|c| {
            let conf = mpc_confidence(c.frequency, mass);
            (c.text, conf)
        })
        .collect()
}

pub fn mpc_suggest(trie: &CharTrie, prefix: &str) -> Suggestion {
    match mpc_candidates(trie, prefix, 1).into_iter().next() {
        Some((text, conf)) => Suggestion::new(text, conf, Source::Mpc),
        None => Suggestion::abstain(Source::Mpc, "prefix not in main trie"),
    }
}

/// Character trie over word-aligned utterance suffixes that occur at least
/// `min_freq` times in the training corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuffixTrie {
    pub trie: CharTrie,
    pub min_freq: u32,
}

/// Corpus-wide counts of every suffix starting at a word boundary.
pub fn count_word_suffixes<S: AsRef<str>>(utterances: &[S]) -> HashMap<&str, u32> {
    let mut counts: HashMap<&str, u32> = HashMap::new();
    for u in utterances {
        let u = u.as_ref();
        for start in word_starts(u) {
            *counts.entry(&u[start..]).or_default() += 1;
        }
    }
    counts
}

impl SuffixTrie {
    pub fn build<S: AsRef<str>>(utterances: &[S], min_freq: u32, max_len: usize) -> Self {
        let counts = count_word_suffixes(utterances);
        let kept = counts.into_iter().filter(|&(_, c)| c >= min_freq.max(1));
        SuffixTrie {
            trie: CharTrie::from_counts(kept, max_len),
            min_freq,
        }
    }

    pub fn to_bytes(&self, fingerprint: &str) -> Vec<u8> {
        let mut e = Encoder::with_header(Kind::SuffixTrie, fingerprint);
        e.u32(self.min_freq);
        self.trie.encode_body(&mut e);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let mut d = Decoder::new(bytes);
        let h = d.expect(Kind::SuffixTrie)?;
        let min_freq = d.u32()?;
        let trie = CharTrie::decode_body(&mut d)?;
        d.finish()?;
        Ok((SuffixTrie { trie, min_freq }, h.fingerprint))
    }
}

/// Which trie answered an MPC++ query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Main,
    /// suffix trie, matched on the prefix tail starting at this byte offset
    Suffix(usize),
    None,
}

/// MPC++ candidates: main trie when the prefix is seen there, otherwise the
/// suffix trie queried with the longest word-aligned tail of the prefix
/// that it contains.
pub fn mpcpp_candidates(main: &CharTrie, suffix: &SuffixTrie, prefix: &str, k: usize) -> (Vec<(String, f64)>, Route) {
    let hits = mpc_candidates(main, prefix, k);
    if !hits.is_empty() {
        return (hits, Route::Main);
    }
    for start in word_starts(prefix) {
        let hits = mpc_candidates(&suffix.trie, &prefix[start..], k);
        if !hits.is_empty() {
            return (hits, Route::Suffix(start));
        }
    }
    (Vec::new(), Route::None)
}

pub fn mpcpp_suggest(main: &CharTrie, suffix: &SuffixTrie, prefix: &str, k: usize) -> Suggestion {
    let (cands, _) = mpcpp_candidates(main, suffix, prefix, k.max(1));
    match cands.into_iter().next() {
        Some((text, conf)) => Suggestion::new(text, conf, Source::Mpcpp),
        None => Suggestion::abstain(Source::Mpcpp, "no word-aligned tail in suffix trie"),
    }
}
