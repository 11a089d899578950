//! Context-aware reranking of candidate completions.
//!
//! ```text
//! combined = α · scale(model_score) + β · cos(prefix ++ completion, context) + γ · scale(1 / (1 + len))
//! ```
//!
//! Both scaled terms are min-max mapped to [−1, 1] within the candidate set.
//! The cosine is TF-IDF over lowercase alphanumeric runs and is used as is.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::container::{Decoder, Encoder, Kind};
use crate::error::{Error, Result};
use crate::text::char_len;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
            k: 10,
        }
    }
}

impl RerankConfig {
    pub fn validate(self) -> Result<Self> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a finite value >= 0, got {v}"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(self)
    }
}

/// Lowercased maximal alphanumeric runs.
pub fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, u32>,
    /// Terms in index order.
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_freq: Vec<u64>,
    n_docs: u64,
}

/// Sparse L2-normalized vector sorted by term index.
pub type SparseVec = Vec<(u32, f64)>;

pub fn fit_tfidf<S: AsRef<str>>(train_texts: &[S]) -> Result<TfIdfModel> {
    if train_texts.is_empty() {
        return Err(Error::InvalidArgument("cannot fit TF-IDF on an empty corpus".into()));
    }
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for t in train_texts {
        let mut seen: Vec<String> = terms(t.as_ref()).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term).or_default() += 1;
        }
    }
    Ok(TfIdfModel::from_doc_freq(
        train_texts.len() as u64,
        df.into_iter().collect(),
    ))
}

impl TfIdfModel {
    fn from_doc_freq(n_docs: u64, df: Vec<(String, u64)>) -> Self {
        let n = n_docs as f64;
        let idf = df
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        TfIdfModel {
            vocabulary: df.iter().enumerate().map(|(i, (t, _))| (t.clone(), i as u32)).collect(),
            terms: df.iter().map(|(t, _)| t.clone()).collect(),
            doc_freq: df.iter().map(|&(_, d)| d).collect(),
            idf,
            n_docs,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn doc_freq(&self, term: &str) -> u64 {
        self.vocabulary.get(term).map_or(0, |&i| self.doc_freq[i as usize])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i as usize])
    }

    /// Raw term counts times idf, L2-normalized. Unknown terms are dropped.
    pub fn transform(&self, text: &str) -> SparseVec {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in terms(text) {
            if let Some(&i) = self.vocabulary.get(&t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = tf.into_iter().map(|(i, c)| (i, c * self.idf[i as usize])).collect();
        let norm = v.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                x.1 /= norm;
            }
        }
        v
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        dot(&self.transform(a), &self.transform(b))
    }

    pub fn to_bytes(&self, fingerprint: &str) -> Vec<u8> {
        let mut e = Encoder::with_header(Kind::TfIdf, fingerprint);
        e.section(b"TFDF", self.terms.len());
        e.u64(self.n_docs);
        for (t, &d) in self.terms.iter().zip(&self.doc_freq) {
            e.str(t);
            e.u64(d);
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let mut d = Decoder::new(bytes);
        let h = d.expect(Kind::TfIdf)?;
        let n = d.section(b"TFDF")?;
        let n_docs = d.u64()?;
        let mut df = Vec::with_capacity(n);
        for _ in 0..n {
            let t = d.str()?;
            let c = d.u64()?;
            if c == 0 || c > n_docs {
                return Err(Error::Format(format!("bad document frequency {c} for {t:?}")));
            }
            df.push((t, c));
        }
        d.finish()?;
        if !df.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::Format("TF-IDF terms are not sorted".into()));
        }
        Ok((TfIdfModel::from_doc_freq(n_docs, df), h.fingerprint))
    }
}

/// Dot product of two sparse vectors; 0 when either is all-zero.
pub fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

pub fn length_penalty(completion_len_chars: usize) -> f64 {
    1.0 / (1.0 + completion_len_chars as f64)
}

/// Min-max maps to [−1, 1]; an all-equal input maps to zeros.
pub fn scale_to_unit_interval(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&x| 2.0 * (x - min) / (max - min) - 1.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub model_score: f64,
    /// Position in the model's own ranking; breaks ties.
    pub rank: usize,
}

impl Candidate {
    /// Candidates in model order.
    pub fn ranked(items: impl IntoIterator<Item = (String, f64)>) -> Vec<Candidate> {
        items
            .into_iter()
            .enumerate()
            .map(|(rank, (text, model_score))| Candidate {
                text,
                model_score,
                rank,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    pub text: String,
    pub score: f64,
    pub rank: usize,
    pub cosine: f64,
}

pub fn rerank(
    candidates: &[Candidate],
    prefix: &str,
    context: &[String],
    tfidf: &TfIdfModel,
    cfg: &RerankConfig,
) -> Vec<Reranked> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let model = scale_to_unit_interval(&candidates.iter().map(|c| c.model_score).collect::<Vec<_>>());
    let pen = scale_to_unit_interval(
        &candidates
            .iter()
            .map(|c| length_penalty(char_len(&c.text)))
            .collect::<Vec<_>>(),
    );
    let ctx = tfidf.transform(&context.join(" "));
    let mut out: Vec<Reranked> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let cos = dot(&tfidf.transform(&format!("{prefix}{}", c.text)), &ctx);
            Reranked {
                text: c.text.clone(),
                score: cfg.alpha * model[i] + cfg.beta * cos + cfg.gamma * pen[i],
                rank: c.rank,
                cosine: cos,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.rank.cmp(&b.rank))
    });
    out
}
