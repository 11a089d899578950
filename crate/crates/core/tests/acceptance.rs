//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ghost_core::corpus::{Bucket, Normalization, SeenSet, Utterance};
use ghost_core::engine::{Engine, ModelKind, SuggestRequest};
use ghost_core::eval::{
    aggregate, bench_latency, build_report, run_suggestions, score_text, simulate_tes, summarize, MetricsRow,
    ReportOptions, Split, UtteranceRun, View,
};
use ghost_core::ngram::search::{qb_suggest, split_prefix, SearchConfig, StopPolicy};
use ghost_core::ngram::vocab::{TokenId, BOS, EOS};
use ghost_core::ngram::{learn_vocabulary, train_ngram, NGramModel, SubwordVocabulary};
use ghost_core::pipeline::{cmd_build, cmd_eval, cmd_train_ngram, train_qb, BuildConfig, NGramConfig, RequestTemplate};
use ghost_core::rerank::{fit_tfidf, rerank, Candidate, RerankConfig};
use ghost_core::text::{byte_offset, char_len};
use ghost_core::trie::{mpc_suggest, mpc_topk, CharTrie};
use ghost_core::{Source, Suggestion};

mod common;
use common::SyntheticCorpus;

type Outcome = Result<String, Box<dyn std::error::Error>>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+).into());
        }
    };
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), Box<dyn std::error::Error>> {
    ensure!(
        elapsed.as_secs_f64() < limit_s,
        "took {:.2}s, limit {limit_s}s",
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn utterances(texts: &[String]) -> Vec<Utterance> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Utterance::new(format!("u{i}"), t.clone(), vec![]))
        .collect()
}

fn engine_with(main: Option<CharTrie>, qb: Option<(SubwordVocabulary, NGramModel)>) -> Engine {
    let mut e = Engine::new();
    e.main = main;
    e.qb = qb.map(|(vocab, model)| ghost_core::ngram::QbModel { vocab, model });
    e
}

// ---------------------------------------------------------------------------
// 1, 2: worked examples

fn tes_worked_example() -> Outcome {
    let start = Instant::now();
    // w typed, "ho" accepted, space typed, "is" rejected, a typed, "m I?" accepted
    let script: HashMap<&str, &str> = [("w", "ho"), ("who ", "is"), ("who a", "m I?")].into();
    let trace = simulate_tes("who am I?", |p| script.get(p).map(|s| s.to_string()));
    ensure!(trace.len == 9, "length {}", trace.len);
    ensure!(trace.typed == 3, "typed {}", trace.typed);
    ensure!(trace.accepted == 2, "accepted {}", trace.accepted);
    // 1 - typed/len compared as integers: 3 * (len - typed) == 2 * len
    ensure!(3 * (trace.len - trace.typed) == 2 * trace.len, "TES != 2/3");
    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "typed {}/{} -> TES 2/3 (f64 {:.6})",
        trace.typed,
        trace.len,
        trace.value()
    ))
}

fn mr_tes_tradeoff() -> Outcome {
    let utterance = "abcde";
    let system_a: HashMap<&str, &str> = [("a", "x"), ("ab", "cde"), ("abc", "x"), ("abcd", "x")].into();
    let system_b: HashMap<&str, &str> = [("a", "x"), ("ab", "x"), ("abc", "de"), ("abcd", "e")].into();
    let mut out = Vec::new();
    for (name, sys, mr, tes) in [("A", &system_a, (1, 4), (3, 5)), ("B", &system_b, (2, 4), (2, 5))] {
        let results: Vec<_> = (1..5)
            .map(|n| {
                let p = &utterance[..n];
                score_text(sys.get(p).copied().unwrap_or(""), 1.0, &utterance[n..])
            })
            .collect();
        let row = aggregate(&results, results.len());
        ensure!(
            (row.exact, row.shown) == mr,
            "system {name}: MR {}/{} != {}/{}",
            row.exact,
            row.shown,
            mr.0,
            mr.1
        );
        let trace = simulate_tes(utterance, |p| sys.get(p).map(|s| s.to_string()));
        let saved = trace.len - trace.typed;
        ensure!(
            (saved, trace.len) == tes,
            "system {name}: TES {saved}/{} != {}/{}",
            trace.len,
            tes.0,
            tes.1
        );
        out.push(format!(
            "{name}: MR {}/{} TES {saved}/{}",
            row.exact, row.shown, trace.len
        ));
    }
    Ok(out.join(", "))
}

// ---------------------------------------------------------------------------
// 3: trie against a filter-and-sort oracle

fn brute_topk(counts: &HashMap<String, u64>, prefix: &str, k: usize) -> Vec<(String, u64)> {
    let mut v: Vec<(&String, u64)> = counts
        .iter()
        .filter(|(t, _)| t.len() > prefix.len() && t.starts_with(prefix))
        .map(|(t, &c)| (t, c))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter()
        .take(k)
        .map(|(t, c)| (t[prefix.len()..].to_string(), c))
        .collect()
}

fn trie_equivalence() -> Outcome {
    let texts = SyntheticCorpus::new(3).texts(1000);
    let start = Instant::now();
    let trie = CharTrie::build(&texts, 500);
    let mut counts: HashMap<String, u64> = HashMap::new();
    for t in &texts {
        *counts.entry(t.clone()).or_default() += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut nonempty = 0;
    for i in 0..500 {
        let prefix = if i % 5 == 4 {
            // arbitrary strings, mostly absent from the trie
            let n = rng.random_range(1..4);
            (0..n)
                .map(|_| rng.random_range(b'a'..=b'z') as char)
                .collect::<String>()
        } else {
            let t = &texts[rng.random_range(0..texts.len())];
            let n = rng.random_range(0..=char_len(t));
            t[..byte_offset(t, n)].to_string()
        };
        let k = [1, 3, 10][i % 3];
        let got: Vec<(String, u64)> = mpc_topk(&trie, &prefix, k)
            .into_iter()
            .map(|c| (c.text, c.frequency))
            .collect();
        let want = brute_topk(&counts, &prefix, k);
        ensure!(got == want, "prefix {prefix:?} k={k}: {got:?} != {want:?}");
        nonempty += usize::from(!want.is_empty());
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "500 prefixes ({nonempty} with completions) in {:.0?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 4: beam search against exhaustive enumeration

struct Exhaustive<'a> {
    model: &'a NGramModel,
    vocab: &'a SubwordVocabulary,
    context: Vec<TokenId>,
    fragment: &'a str,
    max_tokens: usize,
    fragment_tokens: usize,
    best: Option<(f64, String)>,
}

impl Exhaustive<'_> {
    fn record(&mut self, score: f64, surface: &str) {
        let completion = surface[self.fragment.len()..].to_string();
        let better = match &self.best {
            None => true,
            Some((s, c)) => score > *s || (score == *s && completion < *c),
        };
        if better {
            self.best = Some((score, completion));
        }
    }

    fn dfs(&mut self, tokens: &mut Vec<TokenId>, surface: &str, cum: f64) {
        let done = surface.len() >= self.fragment.len();
        if done && tokens.len() == self.max_tokens {
            self.record(-cum / tokens.len() as f64, surface);
            return;
        }
        if !done && (tokens.len() >= self.fragment_tokens || tokens.len() >= self.max_tokens) {
            return;
        }
        let mut hist = self.context.clone();
        hist.extend_from_slice(tokens);
        for t in 0..self.vocab.len() as TokenId {
            if t == BOS {
                continue;
            }
            let p = self.model.prob(&hist, t);
            if p <= 0.0 {
                continue;
            }
            let nll = -p.ln();
            if t == EOS {
                if done {
                    self.record(-(cum + nll) / (tokens.len() + 1) as f64, surface);
                }
                continue;
            }
            let next = format!("{surface}{}", self.vocab.surface(t));
            let ok = done
                || if next.len() <= self.fragment.len() {
                    self.fragment.starts_with(&next)
                } else {
                    next.starts_with(self.fragment)
                };
            if !ok {
                continue;
            }
            tokens.push(t);
            self.dfs(tokens, &next, cum + nll);
            tokens.pop();
        }
    }
}

fn beam_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let words = ["ab", "ba", "cab", "a", "bc", "ca"];
    let corpus: Vec<String> = (0..300)
        .map(|_| {
            let n = rng.random_range(1..5);
            (0..n)
                .map(|_| words[rng.random_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let start = Instant::now();
    let vocab = learn_vocabulary(&corpus, 9)?;
    ensure!(vocab.len() <= 20, "vocabulary has {} tokens", vocab.len());
    let order = 3;
    let model = train_ngram(&vocab, &corpus, order, &[0, 0, 1])?;
    let cfg = SearchConfig {
        beam_width: 64,
        stop: StopPolicy::None,
        max_chars: 1000,
        max_tokens: Some(5),
        fragment_tokens: 3,
    };

    let mut prefixes = Vec::new();
    while prefixes.len() < 250 {
        let p = if rng.random_bool(0.7) {
            let t = &corpus[rng.random_range(0..corpus.len())];
            let n = rng.random_range(1..=t.len());
            t[..n].to_string()
        } else {
            let n = rng.random_range(1..6);
            (0..n).map(|_| ['a', 'b', 'c', ' '][rng.random_range(0..4)]).collect()
        };
        prefixes.push(p);
    }

    let (mut shown, mut max_err) = (0, 0f64);
    for p in &prefixes {
        let s = qb_suggest(&model, &vocab, p, &cfg);
        let (context, fragment) = split_prefix(&vocab, p)?;
        let mut ex = Exhaustive {
            model: &model,
            vocab: &vocab,
            context,
            fragment,
            max_tokens: cfg.max_tokens.unwrap(),
            fragment_tokens: cfg.fragment_tokens,
            best: None,
        };
        ex.dfs(&mut Vec::new(), "", 0.0);
        match ex.best {
            Some((score, text)) if !text.is_empty() => {
                ensure!(s.text == text, "prefix {p:?}: beam {:?}, exhaustive {text:?}", s.text);
                let err = (s.score - score).abs();
                ensure!(err <= 1e-9, "prefix {p:?}: score {} vs {score}", s.score);
                max_err = max_err.max(err);
                shown += 1;
            }
            _ => ensure!(!s.is_shown(), "prefix {p:?}: beam {:?}, exhaustive abstains", s.text),
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{} prefixes ({shown} shown), vocab {}, order {order}, max |Δ| {max_err:.1e}",
        prefixes.len(),
        vocab.len()
    ))
}

// ---------------------------------------------------------------------------
// 5: rerank arithmetic

fn rerank_formula() -> Outcome {
    let train = [
        "where do you live",
        "i live in paris",
        "what is your name",
        "how are you",
        "do you like paris",
        "where is the station",
    ];
    let tfidf = fit_tfidf(&train)?;
    let prefix = "wh";
    let context = vec!["i moved to paris".to_string(), "where do you live now".to_string()];
    let cands = [
        ("at is your name", 0.40),
        ("ere do you live", 0.30),
        ("o are you", 0.15),
        ("ere is paris", 0.10),
        ("y", 0.05),
    ];
    // Cosines from scikit-learn's TfidfVectorizer(token_pattern="[a-z0-9]+",
    // smooth_idf=True, norm="l2") fitted on `train`.
    let cos = [0.0, 0.773848878759462, 0.19300172530928641, 0.463740849232623, 0.0];
    // Model scores 0.40..0.05 min-max mapped to [-1, 1]: 1, 3/7, -3/7, -5/7, -1.
    let model = [1.0, 3.0 / 7.0, -3.0 / 7.0, -5.0 / 7.0, -1.0];
    // Penalties 1/16, 1/16, 1/10, 1/13, 1/2 mapped the same way.
    let pen = [-1.0, -1.0, -29.0 / 35.0, -85.0 / 91.0, 1.0];
    let expected: Vec<f64> = (0..5).map(|i| 0.5 * model[i] + 0.3 * cos[i] + 0.2 * pen[i]).collect();

    let cfg = RerankConfig::default();
    ensure!((cfg.alpha, cfg.beta, cfg.gamma) == (0.5, 0.3, 0.2), "defaults changed");
    let input = Candidate::ranked(cands.iter().map(|&(t, s)| (t.to_string(), s)));
    let out = rerank(&input, prefix, &context, &tfidf, &cfg);
    ensure!(out.len() == 5, "{} results", out.len());
    let mut max_err = 0f64;
    for r in &out {
        let i = r.rank;
        ensure!(r.text == cands[i].0, "rank/text mismatch");
        ensure!(
            (r.cosine - cos[i]).abs() <= 1e-9,
            "{:?}: cos {} vs {}",
            r.text,
            r.cosine,
            cos[i]
        );
        let err = (r.score - expected[i]).abs();
        ensure!(err <= 1e-9, "{:?}: score {} vs {}", r.text, r.score, expected[i]);
        max_err = max_err.max(err);
    }
    let order: Vec<usize> = out.iter().map(|r| r.rank).collect();
    ensure!(order == [0, 1, 4, 2, 3], "order {order:?}");

    // Context alone moves "ere do you live" to the top.
    let ctx_only = RerankConfig {
        alpha: 0.0,
        beta: 1.0,
        gamma: 0.0,
        k: 10,
    };
    let out = rerank(&input, prefix, &context, &tfidf, &ctx_only);
    ensure!(
        out[0].text == "ere do you live",
        "context-only top is {:?}",
        out[0].text
    );
    Ok(format!("5 candidates, max |Δ| {max_err:.1e}, order {order:?}"))
}

// ---------------------------------------------------------------------------
// Shared synthetic train/test split for 6, 10 and 11

struct Fixture {
    train: Vec<Utterance>,
    test: Vec<Utterance>,
    qb: (SubwordVocabulary, NGramModel),
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let train = SyntheticCorpus::new(6).utterances(20_000);
        let mut gen = SyntheticCorpus::new(6_000);
        let mut test = Vec::new();
        let mut positions = 0;
        while positions < 2000 {
            let u = gen.utterances(1).pop().unwrap();
            let u = Utterance::new(format!("t{}", test.len()), u.text, vec![]);
            positions += char_len(&u.text) - 1;
            test.push(u);
        }
        let cfg = NGramConfig {
            order: 8,
            vocab_size: 4096,
            prune: vec![0, 1, 1, 2, 2, 3, 3, 4],
        };
        let qb = train_qb(&train, &cfg).expect("training");
        Fixture {
            train,
            test,
            qb: (qb.vocab, qb.model),
        }
    })
}

fn qb_runs(f: &Fixture, stop: StopPolicy, jobs: usize) -> Vec<UtteranceRun> {
    let (vocab, model) = &f.qb;
    let cfg = SearchConfig {
        stop,
        ..SearchConfig::default()
    };
    let seen = SeenSet::new(f.train.iter().map(|u| u.text.as_str()), Normalization::Exact);
    let s = |p: &str, _: &[String]| qb_suggest(model, vocab, p, &cfg);
    run_suggestions(&s, &f.test, &seen, jobs).expect("run")
}

fn pct(v: Option<f64>) -> String {
    v.map_or("null".into(), |x| format!("{:.2}", 100.0 * x))
}

// ---------------------------------------------------------------------------
// 6: entropy stopping

fn entropy_monotonicity() -> Outcome {
    let f = fixture();
    let positions: usize = f.test.iter().map(|u| char_len(&u.text) - 1).sum();
    let policies = [StopPolicy::None, StopPolicy::Entropy(3.0), StopPolicy::Entropy(0.6)];
    let rows: Vec<MetricsRow> = policies
        .iter()
        .map(|&p| summarize(&qb_runs(f, p, jobs()), Split::Full, None, View::default()))
        .collect();
    let get = |r: &MetricsRow, m: &str| -> Result<f64, String> {
        let v = match m {
            "pred_len" => r.pred_len,
            "p_rec" => r.p_rec,
            "p_prec" => r.p_prec,
            "tes" => r.tes,
            _ => unreachable!(),
        };
        v.ok_or_else(|| format!("{m} undefined"))
    };
    let mut strict = false;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        ensure!(
            get(b, "pred_len")? <= get(a, "pred_len")?,
            "pred_len rose: {:?} -> {:?}",
            a.pred_len,
            b.pred_len
        );
        ensure!(
            get(b, "p_rec")? <= get(a, "p_rec")?,
            "P-Rec rose: {:?} -> {:?}",
            a.p_rec,
            b.p_rec
        );
        ensure!(
            get(b, "p_prec")? >= get(a, "p_prec")?,
            "P-Prec fell: {:?} -> {:?}",
            a.p_prec,
            b.p_prec
        );
        ensure!(get(b, "tes")? >= get(a, "tes")?, "TES fell: {:?} -> {:?}", a.tes, b.tes);
        strict |= get(b, "pred_len")? < get(a, "pred_len")?;
    }
    ensure!(strict, "prediction length never strictly decreased");
    let fmt = |r: &MetricsRow| {
        format!(
            "len {:.2} P-Rec {} P-Prec {} TES {}",
            r.pred_len.unwrap_or(f64::NAN),
            pct(r.p_rec),
            pct(r.p_prec),
            pct(r.tes)
        )
    };
    Ok(format!(
        "{positions} samples; none: {} | 3: {} | 0.6: {}",
        fmt(&rows[0]),
        fmt(&rows[1]),
        fmt(&rows[2])
    ))
}

// ---------------------------------------------------------------------------
// 7: seen split

fn long_sentence(gen: &mut SyntheticCorpus) -> String {
    let mut s = gen.sentence();
    while char_len(&s) < 60 {
        s.push(' ');
        s.push_str(&gen.sentence());
    }
    s
}

fn seen_split_dominance() -> Outcome {
    let mut gen = SyntheticCorpus::new(7);
    let mut heads = HashSet::new();
    let mut fresh = |gen: &mut SyntheticCorpus| loop {
        let s = long_sentence(gen);
        if heads.insert(s[..26].to_string()) {
            return s;
        }
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..1000 {
        let truth = fresh(&mut gen);
        if i % 10 < 3 {
            train.push(truth.clone());
        } else {
            // Shares the first 51 characters with a training utterance but is
            // not itself in the training set.
            train.push(format!("{} xylophone", &truth[..51]));
        }
        test.push(truth);
    }
    for _ in 0..2000 {
        train.push(fresh(&mut gen));
    }
    let trie = CharTrie::build(&train, 500);
    let seen = SeenSet::new(train.iter().map(String::as_str), Normalization::Exact);
    let s = |p: &str, _: &[String]| mpc_suggest(&trie, p);
    let runs = run_suggestions(&s, &utterances(&test), &seen, jobs())?;
    let n_seen = runs.iter().filter(|r| r.seen).count();
    ensure!(n_seen == 300, "{n_seen} seen test utterances");

    let b = Some(Bucket::B26To50);
    let seen_row = summarize(&runs, Split::Seen, b, View::default());
    let unseen_row = summarize(&runs, Split::Unseen, b, View::default());
    ensure!(
        seen_row.shown == seen_row.positions,
        "seen: {} of {} shown",
        seen_row.shown,
        seen_row.positions
    );
    ensure!(
        seen_row.exact == seen_row.shown,
        "seen MR {}/{}",
        seen_row.exact,
        seen_row.shown
    );
    ensure!(unseen_row.shown > 0, "unseen: nothing shown");
    ensure!(
        unseen_row.exact == 0,
        "unseen MR {}/{}",
        unseen_row.exact,
        unseen_row.shown
    );
    Ok(format!(
        "26-50 bucket: seen MR {}/{} = {}%, unseen MR {}/{} = {}%",
        seen_row.exact,
        seen_row.shown,
        pct(seen_row.mr),
        unseen_row.exact,
        unseen_row.shown,
        pct(unseen_row.mr)
    ))
}

// ---------------------------------------------------------------------------
// 8: trigger rate with abstentions

fn max_tr_accounting() -> Outcome {
    // Utterances of 10k+1 characters have 10k prefix positions; the scripted
    // model abstains at every prefix whose length is a multiple of 10.
    let mut test = Vec::new();
    for (i, t) in SyntheticCorpus::new(8).texts(3000).into_iter().enumerate() {
        let n = char_len(&t);
        if n < 11 {
            continue;
        }
        let keep = (n - 1) / 10 * 10 + 1;
        let text = t[..byte_offset(&t, keep)].to_string();
        test.push(Utterance::new(format!("u{i}"), text.clone(), vec![text]));
    }
    // Shows the true completion at odd prefix lengths and a wrong one at even.
    let s = |p: &str, ctx: &[String]| {
        let n = char_len(p);
        if n % 10 == 0 {
            Suggestion::abstain(Source::Mpc, "scripted")
        } else if n % 2 == 1 {
            Suggestion::new(&ctx[0][p.len()..], 1.0, Source::Mpc)
        } else {
            Suggestion::new("#", 0.5, Source::Mpc)
        }
    };
    let seen = SeenSet::new(std::iter::empty(), Normalization::Exact);
    let runs = run_suggestions(&s, &test, &seen, jobs())?;

    // Independent count over the shown positions only.
    let (mut positions, mut shown, mut exact, mut prec_sum) = (0usize, 0usize, 0usize, 0f64);
    for u in &test {
        for n in 1..char_len(&u.text) {
            positions += 1;
            if n % 10 == 0 {
                continue;
            }
            shown += 1;
            if n % 2 == 1 {
                exact += 1;
                prec_sum += 1.0;
            }
        }
    }
    ensure!(shown * 10 == positions * 9, "fixture is not 10% abstentions");

    let report = build_report("scripted", None, &runs, &ReportOptions::default());
    let full = &report.splits[&Split::Full].overall;
    let tr = full.tr.ok_or("TR undefined")?;
    ensure!((tr - 90.0).abs() <= 0.1, "TR {tr}%");
    ensure!(
        full.positions == positions && full.shown == shown,
        "counts {}/{}",
        full.shown,
        full.positions
    );
    ensure!(full.exact == exact, "exact {} vs {exact}", full.exact);
    let mr = full.mr.ok_or("MR undefined")?;
    let want_mr = 100.0 * exact as f64 / shown as f64;
    ensure!((mr - want_mr).abs() < 1e-9, "MR {mr} vs {want_mr}");
    let p_prec = full.p_prec.ok_or("P-Prec undefined")?;
    let want_prec = 100.0 * prec_sum / shown as f64;
    ensure!((p_prec - want_prec).abs() < 1e-9, "P-Prec {p_prec} vs {want_prec}");
    Ok(format!(
        "TR {tr:.3}% over {positions} positions, MR {mr:.3}% over shown only"
    ))
}

// ---------------------------------------------------------------------------
// 9: latency at 70k utterances

fn latency() -> Outcome {
    let train = SyntheticCorpus::new(9).utterances(70_000);
    let texts: Vec<&str> = train.iter().map(|u| u.text.as_str()).collect();
    let t0 = Instant::now();
    let main = CharTrie::build(&texts, 500);
    let t_trie = t0.elapsed();
    let t0 = Instant::now();
    let qb = train_qb(
        &train,
        &NGramConfig {
            order: 8,
            vocab_size: 4096,
            prune: vec![0, 1, 1, 2, 2, 3, 3, 4],
        },
    )?;
    let t_qb = t0.elapsed();
    let engine = engine_with(Some(main), Some((qb.vocab, qb.model)));

    let test = SyntheticCorpus::new(90).utterances(2000);
    let prefixes = ghost_core::pipeline::bench_prefixes(&test, 1000);
    let mut out = vec![format!("build trie {t_trie:.1?}, n-gram {t_qb:.1?}")];
    for model in [ModelKind::Mpc, ModelKind::Qb] {
        let stats = bench_latency(&prefixes, 50, |(p, _)| {
            std::hint::black_box(engine.suggest(&SuggestRequest::new(p.as_str(), model)).ok());
        })
        .ok_or("no samples")?;
        ensure!(stats.p50 <= 100.0, "{model} p50 {:.3} ms", stats.p50);
        out.push(format!("{model} p50 {:.3} ms p99 {:.3} ms", stats.p50, stats.p99));
    }
    Ok(out.join(", "))
}

// ---------------------------------------------------------------------------
// 10: truncation sweep

fn truncation_sweep() -> Outcome {
    let f = fixture();
    let runs = qb_runs(f, StopPolicy::None, jobs());
    let opts = ReportOptions {
        truncate: (1..=10).collect(),
        ..ReportOptions::default()
    };
    let report = build_report("qb", None, &runs, &opts);
    ensure!(report.truncation.len() == 10, "{} rows", report.truncation.len());
    let mut prev: Option<(f64, f64)> = None;
    for p in &report.truncation {
        let prec = p.metrics.p_prec.ok_or("P-Prec undefined")?;
        let rec = p.metrics.p_rec.ok_or("P-Rec undefined")?;
        if let Some((pp, pr)) = prev {
            ensure!(prec <= pp, "P-Prec rose at t={}: {pp} -> {prec}", p.t);
            ensure!(rec >= pr, "P-Rec fell at t={}: {pr} -> {rec}", p.t);
        }
        prev = Some((prec, rec));
    }
    let first = &report.truncation[0].metrics;
    let last = &report.truncation[9].metrics;
    Ok(format!(
        "t=1: P-Prec {:.2} P-Rec {:.2}; t=10: P-Prec {:.2} P-Rec {:.2}",
        first.p_prec.unwrap(),
        first.p_rec.unwrap(),
        last.p_prec.unwrap(),
        last.p_rec.unwrap()
    ))
}

// ---------------------------------------------------------------------------
// 11: determinism

fn determinism() -> Outcome {
    let f = fixture();
    let dir = tempfile::tempdir()?;
    let build = BuildConfig {
        max_len: 500,
        min_suffix_freq: 2,
    };
    let ngram = NGramConfig {
        order: 4,
        vocab_size: 512,
        prune: vec![0, 1, 1, 2],
    };
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let d = dir.path().join(sub);
        let mut paths = cmd_build(&f.train, &d, &build)?;
        paths.push(cmd_train_ngram(&f.train, &d, &ngram)?);
        files.push(paths);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        let (x, y) = (std::fs::read(a)?, std::fs::read(b)?);
        ensure!(x == y, "{} differs between builds", a.display());
    }

    let engine = Engine::load(&[dir.path().join("a")])?;
    let opts = ReportOptions {
        thresholds: None,
        sweep: true,
        truncate: (1..=10).collect(),
        buckets: true,
    };
    let n_jobs = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let mut compared = Vec::new();
    for model in [ModelKind::Mpc, ModelKind::Mpcpp, ModelKind::Qb] {
        let t = RequestTemplate {
            model,
            rerank: false,
            stop: StopPolicy::None,
            min_confidence: None,
        };
        let one = cmd_eval(&engine, &f.train, &f.test, &t, &opts, 1)?.to_json();
        let many = cmd_eval(&engine, &f.train, &f.test, &t, &opts, n_jobs)?.to_json();
        ensure!(one == many, "{model}: --jobs 1 and --jobs {n_jobs} reports differ");
        compared.push(model.name());
    }
    Ok(format!(
        "{} index files byte-identical; reports identical for jobs 1 vs {n_jobs} ({})",
        files[0].len(),
        compared.join(", ")
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("tes-worked-example", tes_worked_example),
        ("mr-tes-tradeoff", mr_tes_tradeoff),
        ("trie-equivalence", trie_equivalence),
        ("beam-optimality", beam_optimality),
        ("rerank-formula", rerank_formula),
        ("entropy-monotonicity", entropy_monotonicity),
        ("seen-split-dominance", seen_split_dominance),
        ("max-tr-accounting", max_tr_accounting),
        ("latency", latency),
        ("truncation-sweep", truncation_sweep),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}").into())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2}. {name} [{secs:.2}s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name} [{secs:.2}s] {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
