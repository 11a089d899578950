//! Dialog corpus ingestion and prefix/completion sample generation.
//!
//! A corpus is a list of dialogs. Only human turns become utterances; every
//! turn (human or bot) before a human turn is kept as that utterance's
//! context. Each utterance of `l` characters expands into `l - 1`
//! prefix/completion samples, one per split point.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{byte_offset, char_len};

/// Separator used when a context has to be flattened into a single string.
pub const TURN_SEPARATOR: &str = " <eou> ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Human,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    #[serde(rename = "dialog_id")]
    pub id: String,
    pub turns: Vec<DialogTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON dialog object per line.
    #[default]
    Jsonl,
    /// One utterance per line, no context.
    Lines,
}

/// How utterance strings are compared when deciding whether a test
/// utterance was seen in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Exact,
    Lowercase,
}

impl Normalization {
    pub fn apply<'a>(self, s: &'a str) -> std::borrow::Cow<'a, str> {
        match self {
            Normalization::Exact => std::borrow::Cow::Borrowed(s),
            Normalization::Lowercase => std::borrow::Cow::Owned(s.to_lowercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtteranceId(pub String);

impl fmt::Display for UtteranceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A human utterance with the turns that preceded it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: UtteranceId,
    pub text: String,
    pub context: Arc<[String]>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, text: impl Into<String>, context: Vec<String>) -> Self {
        Utterance {
            id: UtteranceId(id.into()),
            text: text.into(),
            context: context.into(),
        }
    }
}

/// One prefix/completion split of an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSample {
    pub context: Arc<[String]>,
    pub prefix: String,
    pub target_completion: String,
    pub utterance: String,
    pub utterance_id: UtteranceId,
    pub prefix_len_chars: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train_utterances: Vec<Utterance>,
    pub test_samples: Vec<PrefixSample>,
    pub seen_flags: BTreeMap<UtteranceId, bool>,
}

impl CorpusSplit {
    pub fn new(train: Vec<Utterance>, test: &[Utterance], norm: Normalization) -> Self {
        let test_samples: Vec<PrefixSample> = test.iter().flat_map(expand_utterance).collect();
        let train_texts: Vec<&str> = train.iter().map(|u| u.text.as_str()).collect();
        let seen_flags = mark_seen(&train_texts, &test_samples, norm);
        CorpusSplit {
            train_utterances: train,
            test_samples,
            seen_flags,
        }
    }
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: Speaker,
    text: String,
}

#[derive(Deserialize)]
struct RawDialog {
    dialog_id: String,
    turns: Vec<RawTurn>,
}

/// Reads a corpus file. Dialogs and turns come back in file order.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Dialog>> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&data, format, path)
}

pub(crate) fn parse_corpus(data: &str, format: CorpusFormat, path: &Path) -> Result<Vec<Dialog>> {
    let mut dialogs = Vec::new();
    for (idx, line) in data.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        match format {
            CorpusFormat::Lines => dialogs.push(Dialog {
                id: format!("L{lineno}"),
                turns: vec![DialogTurn {
                    speaker: Speaker::Human,
                    text: line.to_string(),
                }],
            }),
            CorpusFormat::Jsonl => {
                let raw: RawDialog = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
                let mut turns = Vec::with_capacity(raw.turns.len());
                for (t, turn) in raw.turns.into_iter().enumerate() {
                    if turn.text.trim().is_empty() {
                        return Err(parse_err(format!("turn {t} has empty text")));
                    }
                    turns.push(DialogTurn {
                        speaker: turn.speaker,
                        text: turn.text,
                    });
                }
                dialogs.push(Dialog {
                    id: raw.dialog_id,
                    turns,
                });
            }
        }
    }
    if dialogs.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    Ok(dialogs)
}

/// Human turns of every dialog, each carrying all earlier turns as context.
pub fn human_utterances(dialogs: &[Dialog]) -> Vec<Utterance> {
    let mut out = Vec::new();
    for dialog in dialogs {
        for (i, turn) in dialog.turns.iter().enumerate() {
            if turn.speaker != Speaker::Human {
                continue;
            }
            let context: Vec<String> = dialog.turns[..i].iter().map(|t| t.text.clone()).collect();
            out.push(Utterance::new(
                format!("{}#{}", dialog.id, i),
                turn.text.clone(),
                context,
            ));
        }
    }
    out
}

/// All `l - 1` prefix/completion splits of `utterance`.
pub fn expand_prefix_splits(utterance: &str, context: &[String], utterance_id: &UtteranceId) -> Vec<PrefixSample> {
    let context: Arc<[String]> = context.into();
    let len = char_len(utterance);
    (1..len)
        .map(|n| {
            let split = byte_offset(utterance, n);
            PrefixSample {
                context: Arc::clone(&context),
                prefix: utterance[..split].to_string(),
                target_completion: utterance[split..].to_string(),
                utterance: utterance.to_string(),
                utterance_id: utterance_id.clone(),
                prefix_len_chars: n,
            }
        })
        .collect()
}

pub fn expand_utterance(u: &Utterance) -> Vec<PrefixSample> {
    expand_prefix_splits(&u.text, &u.context, &u.id)
}

/// Normalized set of training utterance strings.
#[derive(Debug, Clone, Default)]
pub struct SeenSet {
    norm: Normalization,
    texts: HashSet<String>,
}

impl SeenSet {
    pub fn new<'a>(train: impl IntoIterator<Item = &'a str>, norm: Normalization) -> Self {
        SeenSet {
            norm,
            texts: train.into_iter().map(|t| norm.apply(t).into_owned()).collect(),
        }
    }

    pub fn contains(&self, utterance: &str) -> bool {
        self.texts.contains(self.norm.apply(utterance).as_ref())
    }
}

pub fn mark_seen(train: &[&str], test: &[PrefixSample], norm: Normalization) -> BTreeMap<UtteranceId, bool> {
    let seen = SeenSet::new(train.iter().copied(), norm);
    test.iter()
        .map(|s| (s.utterance_id.clone(), seen.contains(&s.utterance)))
        .collect()
}

/// Prefix-length buckets used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    #[serde(rename = "1-5")]
    B1To5,
    #[serde(rename = "6-12")]
    B6To12,
    #[serde(rename = "13-25")]
    B13To25,
    #[serde(rename = "26-50")]
    B26To50,
    #[serde(rename = "out")]
    Out,
}

impl Bucket {
    pub const REPORTED: [Bucket; 4] = [Bucket::B1To5, Bucket::B6To12, Bucket::B13To25, Bucket::B26To50];

    pub fn label(self) -> &'static str {
        match self {
            Bucket::B1To5 => "1-5",
            Bucket::B6To12 => "6-12",
            Bucket::B13To25 => "13-25",
            Bucket::B26To50 => "26-50",
            Bucket::Out => "out",
        }
    }
}

pub fn bucket_of(prefix_len_chars: usize) -> Bucket {
    match prefix_len_chars {
        0..=5 => Bucket::B1To5,
        6..=12 => Bucket::B6To12,
        13..=25 => Bucket::B13To25,
        26..=50 => Bucket::B26To50,
        _ => Bucket::Out,
    }
}

/// SHA-256 over the training utterance strings, in order, newline-terminated.
pub fn fingerprint<'a>(utterances: impl IntoIterator<Item = &'a str>) -> String {
    let mut hasher = Sha256::new();
    for u in utterances {
        hasher.update(u.as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Joins context turns for string-based consumers.
pub fn join_context(context: &[String]) -> String {
    context.join(TURN_SEPARATOR)
}
