//! Building, training, evaluating and benchmarking from corpus files.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::container::write_atomic;
use crate::corpus::{fingerprint, human_utterances, load_corpus, CorpusFormat, Normalization, SeenSet, Utterance};
use crate::engine::{Engine, ModelKind, SuggestRequest, MAIN_TRIE_FILE, NGRAM_FILE, SUFFIX_TRIE_FILE, TFIDF_FILE};
use crate::error::{Error, Result};
use crate::eval::{bench_latency, build_report, run_suggestions, EvalReport, LatencyStats, ReportOptions};
use crate::ngram::search::StopPolicy;
use crate::ngram::{learn_vocabulary, train_ngram, QbModel};
use crate::rerank::fit_tfidf;
use crate::suggestion::{Source, Suggestion};
use crate::text::{byte_offset, char_len};
use crate::trie::{CharTrie, SuffixTrie};

pub fn load_utterances(path: &Path, format: CorpusFormat) -> Result<Vec<Utterance>> {
    let utts = human_utterances(&load_corpus(path, format)?);
    if utts.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    Ok(utts)
}

pub fn corpus_fingerprint(utts: &[Utterance]) -> String {
    fingerprint(utts.iter().map(|u| u.text.as_str()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub max_len: usize,
    pub min_suffix_freq: u32,
}

/// Builds the main trie, the suffix trie and the TF-IDF model into `out_dir`.
pub fn cmd_build(train: &[Utterance], out_dir: &Path, cfg: &BuildConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let texts: Vec<&str> = train.iter().map(|u| u.text.as_str()).collect();
    let fp = fingerprint(texts.iter().copied());

    let main = CharTrie::build(&texts, cfg.max_len);
    info!("main trie: {} utterances, {} nodes", main.len(), main.node_count());
    let suffix = SuffixTrie::build(&texts, cfg.min_suffix_freq, cfg.max_len);
    info!("suffix trie: {} nodes", suffix.trie.node_count());
    let tfidf = fit_tfidf(&texts)?;
    info!("tf-idf: {} terms", tfidf.len());

    let outputs = [
        (MAIN_TRIE_FILE, main.to_bytes(&fp)),
        (SUFFIX_TRIE_FILE, suffix.to_bytes(&fp)),
        (TFIDF_FILE, tfidf.to_bytes(&fp)),
    ];
    let mut paths = Vec::new();
    for (name, bytes) in outputs {
        let p = out_dir.join(name);
        write_atomic(&p, &bytes)?;
        paths.push(p);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramConfig {
    pub order: usize,
    pub vocab_size: usize,
    pub prune: Vec<u32>,
}

pub fn train_qb(train: &[Utterance], cfg: &NGramConfig) -> Result<QbModel> {
    let texts: Vec<&str> = train.iter().map(|u| u.text.as_str()).collect();
    let vocab = learn_vocabulary(&texts, cfg.vocab_size)?;
    info!("vocabulary: {} tokens", vocab.len());
    let model = train_ngram(&vocab, &texts, cfg.order, &cfg.prune)?;
    info!("n-gram contexts per order: {:?}", model.context_counts());
    Ok(QbModel { vocab, model })
}

/// Trains the n-gram model and writes it to `out` (a directory gets the
/// default file name).
pub fn cmd_train_ngram(train: &[Utterance], out: &Path, cfg: &NGramConfig) -> Result<PathBuf> {
    let path = if out.is_dir() {
        out.join(NGRAM_FILE)
    } else {
        out.to_path_buf()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let qb = train_qb(train, cfg)?;
    write_atomic(&path, &qb.to_bytes(&corpus_fingerprint(train)))?;
    Ok(path)
}

/// Everything a request needs except the prefix and context.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTemplate {
    pub model: ModelKind,
    pub rerank: bool,
    pub stop: StopPolicy,
    pub min_confidence: Option<f64>,
}

impl RequestTemplate {
    pub fn request(&self, prefix: &str, context: &[String]) -> SuggestRequest {
        SuggestRequest {
            prefix: prefix.to_string(),
            context: context.to_vec(),
            model: self.model,
            rerank: self.rerank,
            stop: self.stop,
            min_confidence: self.min_confidence,
        }
    }

    pub fn label(&self) -> String {
        let mut s = self.model.name().to_string();
        if self.rerank {
            s.push_str("+rerank");
        }
        match self.stop {
            StopPolicy::None => {}
            StopPolicy::Entropy(h) => s.push_str(&format!("+entropy{h}")),
            StopPolicy::MaxWords(t) => s.push_str(&format!("+words{t}")),
        }
        s
    }
}

/// Engine call where a failure counts as no suggestion.
pub fn suggest_or_abstain(engine: &Engine, req: &SuggestRequest) -> Suggestion {
    engine.suggest(req).unwrap_or_else(|e| {
        let source = if req.rerank {
            Source::Reranked
        } else {
            match req.model {
                ModelKind::Mpc => Source::Mpc,
                ModelKind::Mpcpp => Source::Mpcpp,
                ModelKind::Qb => Source::Qb,
            }
        };
        Suggestion::abstain(source, e.to_string())
    })
}

/// Refuses to evaluate indices built from a different training corpus.
pub fn check_fingerprint(engine: &Engine, train: &[Utterance]) -> Result<()> {
    let actual = corpus_fingerprint(train);
    match engine.fingerprint() {
        Some(expected) if expected != actual => Err(Error::FingerprintMismatch {
            expected: expected.to_string(),
            actual,
        }),
        _ => Ok(()),
    }
}

pub fn cmd_eval(
    engine: &Engine,
    train: &[Utterance],
    test: &[Utterance],
    template: &RequestTemplate,
    opts: &ReportOptions,
    jobs: usize,
) -> Result<EvalReport> {
    check_fingerprint(engine, train)?;
    if !engine.has_model(template.model) {
        return Err(Error::ModelNotLoaded(template.model.name()));
    }
    let seen = SeenSet::new(train.iter().map(|u| u.text.as_str()), Normalization::Exact);
    let suggester = |prefix: &str, ctx: &[String]| suggest_or_abstain(engine, &template.request(prefix, ctx));
    let runs = run_suggestions(&suggester, test, &seen, jobs)?;
    Ok(build_report(
        &template.label(),
        engine.fingerprint().map(str::to_string),
        &runs,
        opts,
    ))
}

/// Every `stride`-th prefix position of the corpus, in order, up to `n`.
pub fn bench_prefixes(utts: &[Utterance], n: usize) -> Vec<(String, Vec<String>)> {
    let total: usize = utts.iter().map(|u| char_len(&u.text).saturating_sub(1)).sum();
    let stride = (total / n.max(1)).max(1);
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    for u in utts {
        for pos in 1..char_len(&u.text) {
            if i.is_multiple_of(stride) && out.len() < n {
                out.push((u.text[..byte_offset(&u.text, pos)].to_string(), u.context.to_vec()));
            }
            i += 1;
        }
    }
    out
}

pub fn cmd_bench(
    engine: &Engine,
    prefixes: &[(String, Vec<String>)],
    template: &RequestTemplate,
    warmup: usize,
) -> Result<LatencyStats> {
    if !engine.has_model(template.model) {
        return Err(Error::ModelNotLoaded(template.model.name()));
    }
    bench_latency(prefixes, warmup, |(p, ctx)| {
        std::hint::black_box(suggest_or_abstain(engine, &template.request(p, ctx)));
    })
    .ok_or_else(|| Error::InvalidArgument("no samples to benchmark".into()))
}
