use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use ghost_core::config::RunConfig;
use ghost_core::corpus::CorpusFormat;
use ghost_core::engine::{Engine, ModelKind};
use ghost_core::eval::ReportOptions;
use ghost_core::ngram::search::{SearchConfig, StopPolicy};
use ghost_core::pipeline::{self, BuildConfig, NGramConfig, RequestTemplate};
use ghost_core::rerank::RerankConfig;
use ghost_core::service;

#[derive(Parser)]
#[command(
    name = "ghost",
    version,
    about = "Inline chat completion: build, train, evaluate and serve"
)]
struct Cli {
    /// TOML file with default settings (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output on stderr (repeat for more)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the main trie, suffix trie and TF-IDF indices
    Build(BuildArgs),
    /// Learn a subword vocabulary and train the n-gram model
    TrainNgram(TrainArgs),
    /// Evaluate models on a test corpus and write JSON/CSV reports
    Eval(EvalArgs),
    /// Measure single-query latency
    Bench(BenchArgs),
    /// Serve the HTTP API
    Serve(ServeArgs),
    /// Print one suggestion
    Suggest(SuggestArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: CorpusFormat,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Longest string stored in the tries, in characters
    #[arg(long)]
    max_len: Option<usize>,
    /// Minimum corpus frequency for suffix-trie entries
    #[arg(long)]
    min_suffix_freq: Option<u32>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Output file, or a directory to write ngram.ghst into
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Per-order pruning thresholds, e.g. 0,1,1,2,2,3,3,4
    #[arg(long, value_delimiter = ',')]
    prune: Option<Vec<u32>>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Index files or directories containing them (repeatable)
    #[arg(long = "index", required = true)]
    index: Vec<PathBuf>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_chars: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Candidates passed to the reranker
    #[arg(short, long)]
    k: Option<usize>,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// Rerank candidates against the conversation context
    #[arg(long)]
    rerank: bool,
    /// Entropy early-stopping threshold in nats (n-gram model)
    #[arg(long, alias = "entropy-threshold", conflicts_with = "max_words")]
    entropy: Option<f64>,
    /// Word budget for n-gram generation (1-10)
    #[arg(long)]
    max_words: Option<u32>,
    /// Suggestions scoring below this are not shown
    #[arg(long)]
    min_confidence: Option<f64>,
}

impl PolicyArgs {
    fn stop(&self) -> Result<StopPolicy> {
        let p = match (self.entropy, self.max_words) {
            (Some(h), _) => StopPolicy::Entropy(h),
            (None, Some(t)) => StopPolicy::MaxWords(t),
            _ => StopPolicy::None,
        };
        Ok(p.validate()?)
    }

    fn template(&self, model: ModelKind) -> Result<RequestTemplate> {
        Ok(RequestTemplate {
            model,
            rerank: self.rerank,
            stop: self.stop()?,
            min_confidence: self.min_confidence,
        })
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    models: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Training corpus the indices were built from
    #[arg(long)]
    train: PathBuf,
    /// Test corpus (defaults to the training corpus)
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: CorpusFormat,
    /// Models to evaluate (repeatable; default: every loaded model)
    #[arg(long, value_enum)]
    model: Vec<ModelKind>,
    /// Also evaluate each configured entropy threshold for the n-gram model
    #[arg(long)]
    entropy_sweep: bool,
    /// Threshold grid for the TR curve: comma list, or "auto"
    #[arg(long, default_value = "auto")]
    thresholds: String,
    /// Skip the TR curve
    #[arg(long)]
    no_sweep: bool,
    /// Word budgets for the truncation sweep, e.g. 1..10 or 1,2,5
    #[arg(long)]
    truncate: Option<String>,
    /// Per-bucket rows (true/false)
    #[arg(long)]
    buckets: Option<bool>,
    /// Only the first N test utterances
    #[arg(long)]
    limit: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for report files (default: JSON on stdout)
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    models: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    model: Vec<ModelKind>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 50)]
    warmup: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    models: ModelArgs,
    /// Listen address (default: $GHOST_BIND, then 127.0.0.1:8080)
    #[arg(long)]
    bind: Option<String>,
}

#[derive(Args)]
struct SuggestArgs {
    #[command(flatten)]
    models: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Text typed so far
    #[arg(long)]
    prefix: String,
    /// Earlier conversation turns, oldest first (repeatable)
    #[arg(long)]
    context: Vec<String>,
    #[arg(long, value_enum, default_value = "mpc")]
    model: ModelKind,
    /// Also list up to N candidates
    #[arg(long)]
    topk: Option<usize>,
    /// Print JSON instead of text
    #[arg(long)]
    json: bool,
}

fn load_engine(args: &ModelArgs, cfg: &RunConfig) -> Result<Engine> {
    let mut engine = Engine::load(&args.index).context("loading indices")?;
    engine.search = SearchConfig {
        beam_width: args.beam_width.unwrap_or(cfg.beam_width),
        max_chars: args.max_chars.unwrap_or(cfg.max_chars),
        ..SearchConfig::default()
    };
    engine.rerank = RerankConfig {
        alpha: args.alpha.unwrap_or(cfg.alpha),
        beta: args.beta.unwrap_or(cfg.beta),
        gamma: args.gamma.unwrap_or(cfg.gamma),
        k: args.k.unwrap_or(cfg.k),
    }
    .validate()?;
    for i in engine.indices() {
        info!("loaded {} index {}", i.kind, i.path.display());
    }
    Ok(engine)
}

fn parse_truncate(s: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?);
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.iter().any(|&t| !(1..=10).contains(&t)) {
        bail!("word budgets must be in 1..=10, got {s:?}");
    }
    Ok(v)
}

fn parse_thresholds(s: &str) -> Result<Option<Vec<f64>>> {
    if s == "auto" {
        return Ok(None);
    }
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("bad threshold list {s:?}"))?;
    Ok(Some(v))
}

fn models_or_all(requested: &[ModelKind], engine: &Engine) -> Vec<ModelKind> {
    if requested.is_empty() {
        engine.models()
    } else {
        requested.to_vec()
    }
}

fn cmd_build(a: BuildArgs, cfg: &RunConfig) -> Result<()> {
    let utts = pipeline::load_utterances(&a.corpus.corpus, a.corpus.format)?;
    info!("{} training utterances", utts.len());
    let paths = pipeline::cmd_build(
        &utts,
        &a.out,
        &BuildConfig {
            max_len: a.max_len.unwrap_or(cfg.max_index_len),
            min_suffix_freq: a.min_suffix_freq.unwrap_or(cfg.min_suffix_freq),
        },
    )?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_train(a: TrainArgs, cfg: &RunConfig) -> Result<()> {
    let utts = pipeline::load_utterances(&a.corpus.corpus, a.corpus.format)?;
    let order = a.order.unwrap_or(cfg.order);
    let prune = match a.prune {
        Some(p) => p,
        None if order == cfg.prune.len() => cfg.prune.clone(),
        None => bail!("--order {order} needs --prune with {order} thresholds"),
    };
    let path = pipeline::cmd_train_ngram(
        &utts,
        &a.out,
        &NGramConfig {
            order,
            vocab_size: a.vocab_size.unwrap_or(cfg.vocab_size),
            prune,
        },
    )?;
    println!("{}", path.display());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs, cfg: &RunConfig) -> Result<()> {
    let engine = load_engine(&a.models, cfg)?;
    let train = pipeline::load_utterances(&a.train, a.format)?;
    let mut test = match &a.test {
        Some(p) => pipeline::load_utterances(p, a.format)?,
        None => train.clone(),
    };
    if let Some(n) = a.limit {
        test.truncate(n);
    }
    let opts = ReportOptions {
        thresholds: parse_thresholds(&a.thresholds)?,
        sweep: !a.no_sweep,
        truncate: match &a.truncate {
            Some(s) => parse_truncate(s)?,
            None => cfg.truncate.clone(),
        },
        buckets: a.buckets.unwrap_or(cfg.buckets),
    };
    let jobs = a.jobs.unwrap_or_else(|| cfg.jobs());

    let mut templates = Vec::new();
    for m in models_or_all(&a.model, &engine) {
        templates.push(a.policy.template(m)?);
        if m == ModelKind::Qb && a.entropy_sweep {
            for &h in &cfg.entropy_thresholds {
                templates.push(RequestTemplate {
                    stop: StopPolicy::Entropy(h).validate()?,
                    ..a.policy.template(m)?
                });
            }
        }
    }
    if let Some(dir) = &a.output_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut reports = Vec::new();
    for t in &templates {
        info!("evaluating {} on {} utterances with {jobs} jobs", t.label(), test.len());
        let report = pipeline::cmd_eval(&engine, &train, &test, t, &opts, jobs)?;
        match &a.output_dir {
            Some(dir) => {
                let label = report.model.replace('+', "_");
                write_file(&dir.join(format!("eval_{label}.json")), &report.to_json())?;
                write_file(&dir.join(format!("tr_curve_{label}.csv")), &report.tr_curve_csv())?;
                let o = &report.splits[&ghost_core::eval::Split::Full].overall;
                println!(
                    "{}\tTR={}\tMR={}\tP-Prec={}\tP-Rec={}\tTES={}",
                    report.model,
                    fmt_opt(o.tr),
                    fmt_opt(o.mr),
                    fmt_opt(o.p_prec),
                    fmt_opt(o.p_rec),
                    fmt_opt(o.tes)
                );
            }
            None => reports.push(report),
        }
    }
    if a.output_dir.is_none() {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn cmd_bench(a: BenchArgs, cfg: &RunConfig) -> Result<()> {
    let engine = load_engine(&a.models, cfg)?;
    let utts = pipeline::load_utterances(&a.corpus.corpus, a.corpus.format)?;
    let prefixes = pipeline::bench_prefixes(&utts, a.samples);
    for m in models_or_all(&a.model, &engine) {
        let t = a.policy.template(m)?;
        let s = pipeline::cmd_bench(&engine, &prefixes, &t, a.warmup)?;
        println!(
            "{}\tn={}\tp50={:.3}ms\tp95={:.3}ms\tp99={:.3}ms\tmean={:.3}ms",
            t.label(),
            s.n,
            s.p50,
            s.p95,
            s.p99,
            s.mean
        );
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs, cfg: &RunConfig) -> Result<()> {
    let engine = Arc::new(load_engine(&a.models, cfg)?);
    let bind = service::resolve_bind(a.bind.as_deref());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(service::serve(engine, &bind))
        .with_context(|| format!("serving on {bind}"))?;
    Ok(())
}

fn cmd_suggest(a: SuggestArgs, cfg: &RunConfig) -> Result<()> {
    let engine = load_engine(&a.models, cfg)?;
    let req = a.policy.template(a.model)?.request(&a.prefix, &a.context);
    let (s, cands) = engine.suggest_detailed(&req, a.topk.unwrap_or(0))?;
    if a.json {
        let v = serde_json::json!({
            "suggestion": s.text,
            "confidence": (s.is_shown() && s.score.is_finite()).then_some(s.score),
            "source": s.source.to_string(),
            "abstain_reason": s.abstain_reason,
            "candidates": a.topk.map(|_| cands),
        });
        println!("{v}");
        return Ok(());
    }
    if s.is_shown() {
        println!("{}\t{}", s.text, s.score);
    } else {
        println!("\t-");
    }
    for c in cands {
        println!("  {:?}\t{}", c.text, c.score);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Build(a) => cmd_build(a, &cfg),
        Cmd::TrainNgram(a) => cmd_train(a, &cfg),
        Cmd::Eval(a) => cmd_eval(a, &cfg),
        Cmd::Bench(a) => cmd_bench(a, &cfg),
        Cmd::Serve(a) => cmd_serve(a, &cfg),
        Cmd::Suggest(a) => cmd_suggest(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
