//! Per-sample scoring, aggregation, the typing-effort simulation and
//! latency statistics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::Bucket;
use crate::suggestion::Suggestion;
use crate::text::{byte_offset, char_len, lcp_chars};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub shown: bool,
    pub exact: bool,
    pub lcp_len: usize,
    pub pred_len: usize,
    pub truth_len: usize,
    pub confidence: f64,
    pub bucket: Bucket,
    pub seen: bool,
}

impl SampleResult {
    pub fn at(mut self, bucket: Bucket, seen: bool) -> Self {
        self.bucket = bucket;
        self.seen = seen;
        self
    }
}

pub fn score_text(text: &str, confidence: f64, truth: &str) -> SampleResult {
    let shown = !text.is_empty();
    SampleResult {
        shown,
        exact: shown && text == truth,
        lcp_len: if shown { lcp_chars(text, truth) } else { 0 },
        pred_len: char_len(text),
        truth_len: char_len(truth),
        confidence,
        bucket: Bucket::Out,
        seen: false,
    }
}

pub fn score_sample(s: &Suggestion, truth: &str) -> SampleResult {
    score_text(&s.text, s.score, truth)
}

/// Aggregate metrics over a set of positions. Rates are fractions in [0, 1];
/// `None` means undefined (nothing shown, or no positions).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub positions: usize,
    pub shown: usize,
    pub exact: usize,
    pub mr: Option<f64>,
    pub p_prec: Option<f64>,
    pub p_rec: Option<f64>,
    pub tr: Option<f64>,
    pub tes: Option<f64>,
    pub pred_len: Option<f64>,
    pub matched_len: Option<f64>,
}

/// Order-independent mean: values are summed in sorted order.
pub(crate) fn stable_mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Micro-averages over shown suggestions; TR is shown / `total_positions`.
/// TES is left undefined (it needs the simulation).
pub fn aggregate(results: &[SampleResult], total_positions: usize) -> MetricsRow {
    let shown: Vec<&SampleResult> = results.iter().filter(|r| r.shown).collect();
    let n = shown.len();
    let exact = shown.iter().filter(|r| r.exact).count();
    let ratio = |f: &dyn Fn(&SampleResult) -> f64| stable_mean(shown.iter().map(|r| f(r)).collect());
    MetricsRow {
        positions: total_positions,
        shown: n,
        exact,
        mr: (n > 0).then(|| exact as f64 / n as f64),
        p_prec: ratio(&|r| r.lcp_len as f64 / r.pred_len as f64),
        p_rec: ratio(&|r| {
            if r.truth_len == 0 {
                0.0
            } else {
                r.lcp_len as f64 / r.truth_len as f64
            }
        }),
        tr: (total_positions > 0).then(|| n as f64 / total_positions as f64),
        tes: None,
        pred_len: ratio(&|r| r.pred_len as f64),
        matched_len: ratio(&|r| r.lcp_len as f64),
    }
}

/// Outcome of one typing simulation. `typed` of `len` characters were typed
/// by hand; the rest came from accepted suggestions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TesTrace {
    pub typed: usize,
    pub len: usize,
    pub accepted: usize,
}

impl TesTrace {
    pub fn value(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        1.0 - self.typed as f64 / self.len as f64
    }
}

/// Greedy accept-if-exact user. The first character is always typed; after
/// that, at `n` typed characters, `suggest(prefix)` is consulted and the
/// whole suggestion is accepted if it equals the next characters of the
/// utterance. `None` (or an empty suggestion) means nothing was shown.
pub fn simulate_tes<F>(utterance: &str, mut suggest: F) -> TesTrace
where
    F: FnMut(&str) -> Option<String>,
{
    let len = char_len(utterance);
    let mut pos = 0;
    let mut typed = 0;
    let mut accepted = 0;
    while pos < len {
        if pos > 0 {
            let at = byte_offset(utterance, pos);
            if let Some(s) = suggest(&utterance[..at]).filter(|s| !s.is_empty()) {
                if utterance[at..].starts_with(s.as_str()) {
                    pos += char_len(&s);
                    accepted += 1;
                    continue;
                }
            }
        }
        typed += 1;
        pos += 1;
    }
    TesTrace { typed, len, accepted }
}

/// Keeps the text through the end of its `t`-th whitespace-delimited word.
/// A leading partial word counts as word 1.
pub fn truncate_words(text: &str, t: usize) -> &str {
    let mut words = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word && words == t {
                return &text[..i];
            }
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
        }
    }
    text
}

/// One point of a metric-vs-trigger-rate curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    #[serde(flatten)]
    pub metrics: MetricsRow,
}

/// Re-aggregates with only suggestions of confidence ≥ τ counted as shown.
pub fn sweep_thresholds(results: &[SampleResult], total_positions: usize, thresholds: &[f64]) -> Vec<CurvePoint> {
    thresholds
        .iter()
        .map(|&tau| {
            let gated: Vec<SampleResult> = results
                .iter()
                .map(|r| {
                    if r.shown && !(r.confidence >= tau) {
                        SampleResult {
                            shown: false,
                            exact: false,
                            lcp_len: 0,
                            pred_len: 0,
                            ..*r
                        }
                    } else {
                        *r
                    }
                })
                .collect();
            CurvePoint {
                threshold: tau,
                metrics: aggregate(&gated, total_positions),
            }
        })
        .collect()
}

pub const MAX_GRID_POINTS: usize = 100;

/// Sorted distinct finite confidences, decimated to at most `max_points`
/// (always keeping the smallest and largest).
pub fn threshold_grid(confidences: impl IntoIterator<Item = f64>, max_points: usize) -> Vec<f64> {
    let mut v: Vec<f64> = confidences.into_iter().filter(|c| c.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() <= max_points || max_points < 2 {
        v.truncate(max_points.max(1));
        return v;
    }
    let n = v.len();
    let mut out: Vec<f64> = (0..max_points)
        .map(|i| v[(i * (n - 1) + (max_points - 1) / 2) / (max_points - 1)])
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub mean: f64,
}

/// Nearest-rank percentiles over milliseconds.
pub fn latency_stats(mut ms: Vec<f64>) -> Option<LatencyStats> {
    if ms.is_empty() {
        return None;
    }
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let rank = |p: f64| ms[((p / 100.0 * n as f64).ceil() as usize).clamp(1, n) - 1];
    Some(LatencyStats {
        n,
        p50: rank(50.0),
        p95: rank(95.0),
        p99: rank(99.0),
        mean: ms.iter().sum::<f64>() / n as f64,
    })
}

/// Times `call` once per sample (single-threaded) after `warmup` untimed
/// calls cycling over the samples.
pub fn bench_latency<T, F>(samples: &[T], warmup: usize, mut call: F) -> Option<LatencyStats>
where
    F: FnMut(&T),
{
    if samples.is_empty() {
        return None;
    }
    for s in samples.iter().cycle().take(warmup) {
        call(s);
    }
    let mut ms = Vec::with_capacity(samples.len());
    for s in samples {
        let t = Instant::now();
        call(s);
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    latency_stats(ms)
}
