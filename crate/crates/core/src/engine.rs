//! The loaded set of indices and the single suggestion code path shared by
//! the CLI, the HTTP service and the C API.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::container::{read_header, Kind};
use crate::error::{Error, Result};
use crate::ngram::search::{qb_candidates, qb_suggest, SearchConfig, StopPolicy};
use crate::ngram::QbModel;
use crate::rerank::{rerank, Candidate, RerankConfig, TfIdfModel};
use crate::suggestion::{Source, Suggestion};
use crate::trie::{mpc_candidates, mpc_suggest, mpcpp_candidates, mpcpp_suggest, CharTrie, SuffixTrie};

pub const MAIN_TRIE_FILE: &str = "main.ghst";
pub const SUFFIX_TRIE_FILE: &str = "suffix.ghst";
pub const TFIDF_FILE: &str = "tfidf.ghst";
pub const NGRAM_FILE: &str = "ngram.ghst";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mpc,
    Mpcpp,
    Qb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mpc, ModelKind::Mpcpp, ModelKind::Qb];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mpc => "mpc",
            ModelKind::Mpcpp => "mpcpp",
            ModelKind::Qb => "qb",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?} (expected mpc, mpcpp or qb)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestRequest {
    pub prefix: String,
    pub context: Vec<String>,
    pub model: ModelKind,
    pub rerank: bool,
    pub stop: StopPolicy,
    pub min_confidence: Option<f64>,
}

impl SuggestRequest {
    pub fn new(prefix: impl Into<String>, model: ModelKind) -> Self {
        SuggestRequest {
            prefix: prefix.into(),
            context: Vec::new(),
            model,
            rerank: false,
            stop: StopPolicy::None,
            min_confidence: None,
        }
    }
}

/// One entry of the candidate list, in final order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateInfo {
    pub text: String,
    pub score: f64,
    pub model_score: f64,
}

/// Where an index was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexInfo {
    pub path: PathBuf,
    pub kind: &'static str,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Default)]
pub struct Engine {
    pub main: Option<CharTrie>,
    pub suffix: Option<SuffixTrie>,
    pub qb: Option<QbModel>,
    pub tfidf: Option<TfIdfModel>,
    pub search: SearchConfig,
    pub rerank: RerankConfig,
    fingerprint: Option<String>,
    indices: Vec<IndexInfo>,
}

/// Expands directories into the `.ghst` files they contain (sorted).
fn index_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "ghst"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    /// Loads index files (or directories of them). All indices must share
    /// one corpus fingerprint.
    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut engine = Engine::new();
        let files = index_files(paths)?;
        if files.is_empty() {
            return Err(Error::InvalidArgument("no index files given".into()));
        }
        for f in files {
            engine.load_file(&f)?;
        }
        Ok(engine)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let header = read_header(path).map_err(|e| with_path(path, e))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let fp = match header.kind {
            Kind::MainTrie => {
                let (t, fp) = CharTrie::from_bytes(&bytes).map_err(|e| with_path(path, e))?;
                self.main = Some(t);
                fp
            }
            Kind::SuffixTrie => {
                let (t, fp) = SuffixTrie::from_bytes(&bytes).map_err(|e| with_path(path, e))?;
                self.suffix = Some(t);
                fp
            }
            Kind::NGram => {
                let (m, fp) = QbModel::from_bytes(&bytes).map_err(|e| with_path(path, e))?;
                self.qb = Some(m);
                fp
            }
            Kind::TfIdf => {
                let (m, fp) = TfIdfModel::from_bytes(&bytes).map_err(|e| with_path(path, e))?;
                self.tfidf = Some(m);
                fp
            }
        };
        self.register(path.to_path_buf(), header.kind, fp)
    }

    fn register(&mut self, path: PathBuf, kind: Kind, fp: String) -> Result<()> {
        match &self.fingerprint {
            Some(expected) if *expected != fp => {
                return Err(Error::FingerprintMismatch {
                    expected: expected.clone(),
                    actual: format!("{fp} ({})", path.display()),
                })
            }
            _ => self.fingerprint = Some(fp.clone()),
        }
        self.indices.push(IndexInfo {
            path,
            kind: kind.name(),
            fingerprint: fp,
        });
        Ok(())
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    pub fn indices(&self) -> &[IndexInfo] {
        &self.indices
    }

    /// Models that can answer requests with the loaded indices.
    pub fn models(&self) -> Vec<ModelKind> {
        ModelKind::ALL.into_iter().filter(|&m| self.has_model(m)).collect()
    }

    pub fn has_model(&self, m: ModelKind) -> bool {
        match m {
            ModelKind::Mpc => self.main.is_some(),
            ModelKind::Mpcpp => self.main.is_some() && self.suffix.is_some(),
            ModelKind::Qb => self.qb.is_some(),
        }
    }

    pub fn can_rerank(&self) -> bool {
        self.tfidf.is_some()
    }

    fn require(&self, m: ModelKind) -> Result<()> {
        if self.has_model(m) {
            return Ok(());
        }
        Err(Error::ModelNotLoaded(m.name()))
    }

    fn search_config(&self, stop: StopPolicy) -> SearchConfig {
        SearchConfig { stop, ..self.search }
    }

    /// Model candidates before reranking, best first.
    pub fn candidates(&self, req: &SuggestRequest, k: usize) -> Result<Vec<(String, f64)>> {
        self.require(req.model)?;
        let prefix = clean_prefix(&req.prefix)?;
        Ok(match req.model {
            ModelKind::Mpc => mpc_candidates(self.main.as_ref().unwrap(), prefix, k),
            ModelKind::Mpcpp => {
                mpcpp_candidates(self.main.as_ref().unwrap(), self.suffix.as_ref().unwrap(), prefix, k).0
            }
            ModelKind::Qb => {
                let qb = self.qb.as_ref().unwrap();
                qb_candidates(&qb.model, &qb.vocab, prefix, &self.search_config(req.stop), k)
            }
        })
    }

    pub fn suggest(&self, req: &SuggestRequest) -> Result<Suggestion> {
        Ok(self.suggest_detailed(req, 0)?.0)
    }

    /// The suggestion plus up to `topk` candidates in final order.
    pub fn suggest_detailed(&self, req: &SuggestRequest, topk: usize) -> Result<(Suggestion, Vec<CandidateInfo>)> {
        self.require(req.model)?;
        req.stop.validate()?;
        let prefix = clean_prefix(&req.prefix)?;
        if req.rerank {
            let tfidf = self.tfidf.as_ref().ok_or(Error::ModelNotLoaded("tfidf"))?;
            let cands = self.candidates(req, self.rerank.k.max(1))?;
            let ranked = rerank(
                &Candidate::ranked(cands.iter().cloned()),
                prefix,
                &req.context,
                tfidf,
                &self.rerank,
            );
            let info = ranked
                .iter()
                .take(topk)
                .map(|r| CandidateInfo {
                    text: r.text.clone(),
                    score: r.score,
                    model_score: cands[r.rank].1,
                })
                .collect();
            let s = match ranked.first() {
                Some(best) => Suggestion::new(best.text.clone(), best.score, Source::Reranked),
                None => Suggestion::abstain(Source::Reranked, "no candidates"),
            };
            return Ok((s.gate(req.min_confidence), info));
        }
        let s = match req.model {
            ModelKind::Mpc => mpc_suggest(self.main.as_ref().unwrap(), prefix),
            ModelKind::Mpcpp => mpcpp_suggest(self.main.as_ref().unwrap(), self.suffix.as_ref().unwrap(), prefix, 1),
            ModelKind::Qb => {
                let qb = self.qb.as_ref().unwrap();
                qb_suggest(&qb.model, &qb.vocab, prefix, &self.search_config(req.stop))
            }
        };
        let info = if topk > 0 {
            self.candidates(req, topk)?
                .into_iter()
                .map(|(text, score)| CandidateInfo {
                    text,
                    score,
                    model_score: score,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((s.gate(req.min_confidence), info))
    }
}

/// Strips trailing control characters; the rest must be non-empty.
pub fn clean_prefix(prefix: &str) -> Result<&str> {
    let p = prefix.trim_end_matches(char::is_control);
    if p.is_empty() {
        return Err(Error::InvalidArgument("prefix is empty".into()));
    }
    Ok(p)
}
