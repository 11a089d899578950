//! Evaluation runs: query a suggester at every prefix position of every test
//! utterance once, then derive all reported numbers from that table.
//!
//! The typing simulation only ever asks for prefixes of the utterance, and
//! those are exactly the positions in the table, so TES under a confidence
//! threshold or a word budget is computed from the cached suggestions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    aggregate, simulate_tes, stable_mean, threshold_grid, truncate_words, CurvePoint, LatencyStats, MetricsRow,
    SampleResult, TesTrace, MAX_GRID_POINTS,
};
use crate::corpus::{bucket_of, Bucket, SeenSet, Utterance};
use crate::error::{Error, Result};
use crate::suggestion::Suggestion;
use crate::text::{byte_offset, char_len};

pub trait Suggester: Sync {
    fn suggest(&self, prefix: &str, context: &[String]) -> Suggestion;
}

impl<F> Suggester for F
where
    F: Fn(&str, &[String]) -> Suggestion + Sync,
{
    fn suggest(&self, prefix: &str, context: &[String]) -> Suggestion {
        self(prefix, context)
    }
}

/// Suggestions for one test utterance; `suggestions[i]` answers the prefix
/// of `i + 1` characters.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRun {
    pub id: String,
    pub text: String,
    pub seen: bool,
    pub suggestions: Vec<Suggestion>,
}

/// How suggestions are post-processed before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct View {
    /// Suggestions with a lower score are treated as not shown.
    pub threshold: Option<f64>,
    /// Keep only the first `t` words.
    pub truncate: Option<usize>,
}

impl View {
    pub fn text<'a>(&self, s: &'a Suggestion) -> &'a str {
        if !s.is_shown() {
            return "";
        }
        if let Some(tau) = self.threshold {
            if !(s.score >= tau) {
                return "";
            }
        }
        match self.truncate {
            Some(t) => truncate_words(&s.text, t),
            None => &s.text,
        }
    }
}

impl UtteranceRun {
    pub fn compute(s: &dyn Suggester, u: &Utterance, seen: bool) -> Self {
        let len = char_len(&u.text);
        let suggestions = (1..len)
            .map(|n| s.suggest(&u.text[..byte_offset(&u.text, n)], &u.context))
            .collect();
        UtteranceRun {
            id: u.id.0.clone(),
            text: u.text.clone(),
            seen,
            suggestions,
        }
    }

    pub fn results(&self, view: View) -> impl Iterator<Item = SampleResult> + '_ {
        self.suggestions.iter().enumerate().map(move |(i, s)| {
            let split = byte_offset(&self.text, i + 1);
            super::metrics::score_text(view.text(s), s.score, &self.text[split..]).at(bucket_of(i + 1), self.seen)
        })
    }

    pub fn tes(&self, view: View) -> TesTrace {
        simulate_tes(&self.text, |prefix| {
            let s = &self.suggestions[char_len(prefix) - 1];
            Some(view.text(s).to_string())
        })
    }
}

/// Runs `suggester` over every test utterance on a pool of `jobs` threads.
/// Output order follows `test`.
pub fn run_suggestions(
    suggester: &dyn Suggester,
    test: &[Utterance],
    seen: &SeenSet,
    jobs: usize,
) -> Result<Vec<UtteranceRun>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| {
        test.par_iter()
            .map(|u| UtteranceRun::compute(suggester, u, seen.contains(&u.text)))
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Full,
    Seen,
    Unseen,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Full, Split::Seen, Split::Unseen];

    pub fn includes(self, seen: bool) -> bool {
        match self {
            Split::Full => true,
            Split::Seen => seen,
            Split::Unseen => !seen,
        }
    }
}

/// Metrics over the utterances of `split`, optionally restricted to one
/// prefix-length bucket. TES (a per-utterance quantity) is only filled in
/// when no bucket is given.
pub fn summarize(runs: &[UtteranceRun], split: Split, bucket: Option<Bucket>, view: View) -> MetricsRow {
    let results: Vec<SampleResult> = runs
        .iter()
        .filter(|r| split.includes(r.seen))
        .flat_map(|r| r.results(view))
        .filter(|r| bucket.is_none_or(|b| r.bucket == b))
        .collect();
    let mut row = aggregate(&results, results.len());
    if bucket.is_none() {
        row.tes = stable_mean(
            runs.iter()
                .filter(|r| split.includes(r.seen))
                .map(|r| r.tes(view).value())
                .collect(),
        );
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub utterances: usize,
    pub overall: MetricsRow,
    pub buckets: BTreeMap<Bucket, MetricsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub t: usize,
    #[serde(flatten)]
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportOptions {
    /// Explicit thresholds; `None` derives a grid from the confidences.
    pub thresholds: Option<Vec<f64>>,
    pub sweep: bool,
    /// Word budgets for the truncation sweep (empty to skip).
    pub truncate: Vec<usize>,
    pub buckets: bool,
}

/// Evaluation report. Rates (`mr`, `p_prec`, `p_rec`, `tr`, `tes`) are
/// percentages; lengths are characters; `null` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub fingerprint: Option<String>,
    pub splits: BTreeMap<Split, SplitReport>,
    pub tr_curve: Vec<CurvePoint>,
    pub truncation: Vec<TruncationPoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<LatencyStats>,
}

fn percent(mut row: MetricsRow) -> MetricsRow {
    for v in [&mut row.mr, &mut row.p_prec, &mut row.p_rec, &mut row.tr, &mut row.tes] {
        *v = v.map(|x| x * 100.0);
    }
    row
}

pub fn build_report(
    model: &str,
    fingerprint: Option<String>,
    runs: &[UtteranceRun],
    opts: &ReportOptions,
) -> EvalReport {
    let base = View::default();
    let splits = Split::ALL
        .iter()
        .map(|&split| {
            let buckets = if opts.buckets {
                Bucket::REPORTED
                    .iter()
                    .map(|&b| (b, percent(summarize(runs, split, Some(b), base))))
                    .collect()
            } else {
                BTreeMap::new()
            };
            let rep = SplitReport {
                utterances: runs.iter().filter(|r| split.includes(r.seen)).count(),
                overall: percent(summarize(runs, split, None, base)),
                buckets,
            };
            (split, rep)
        })
        .collect();

    let tr_curve = if opts.sweep {
        let grid = match &opts.thresholds {
            Some(t) => t.clone(),
            None => threshold_grid(
                runs.iter()
                    .flat_map(|r| r.suggestions.iter())
                    .filter(|s| s.is_shown())
                    .map(|s| s.score),
                MAX_GRID_POINTS,
            ),
        };
        grid.iter()
            .map(|&tau| CurvePoint {
                threshold: tau,
                metrics: percent(summarize(
                    runs,
                    Split::Full,
                    None,
                    View {
                        threshold: Some(tau),
                        truncate: None,
                    },
                )),
            })
            .collect()
    } else {
        Vec::new()
    };

    let truncation = opts
        .truncate
        .iter()
        .map(|&t| TruncationPoint {
            t,
            metrics: percent(summarize(
                runs,
                Split::Full,
                None,
                View {
                    threshold: None,
                    truncate: Some(t),
                },
            )),
        })
        .collect();

    EvalReport {
        model: model.to_string(),
        fingerprint,
        splits,
        tr_curve,
        truncation,
        latency: None,
    }
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The trigger-rate curve as CSV. Undefined values are empty cells.
    pub fn tr_curve_csv(&self) -> String {
        let mut out = String::from("threshold,tr,mr,p_rec,p_prec,tes\n");
        for p in &self.tr_curve {
            let m = &p.metrics;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.threshold,
                csv_cell(m.tr),
                csv_cell(m.mr),
                csv_cell(m.p_rec),
                csv_cell(m.p_prec),
                csv_cell(m.tes)
            ));
        }
        out
    }
}
