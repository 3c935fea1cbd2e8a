use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crag::attribution::{
    default_budget, exact_shapley, export_attributions, partition_shapley, score_rendering,
    tokenize_for_masking, AttributionSample,
};
use crag::backend::{
    BackendConfig, CachedEvaluator, EvaluatorBackend, GeneratorBackend, HttpEvaluator,
    HttpGenerator, StubEvaluator, StubGenerator,
};
use crag::disk_cache::DiskCache;
use crag::eval::{self, QtypeRules};
use crag::orchestrator::{run_dataset_with_cancel, Backends, Method, PipelineConfig};
use crag::wiki::mock::{MockWiki, WikiFixture};
use crag::wiki::{TokenBucket, WikiClient, WikiConfig, DEFAULT_API_ENDPOINT};
use crag::{DatasetMode, Thresholds};

static CANCEL: AtomicBool = AtomicBool::new(false);

#[derive(Parser, Debug)]
#[command(
    name = "crag",
    version,
    about = "Corrective retrieval-augmented generation runner"
)]
struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline over a dataset and write results and a report.
    Run(RunArgs),
    /// Re-score a results file against its dataset and rebuild the report.
    Eval(EvalArgs),
    /// Attribute an evaluator score to question and document tokens.
    Explain(ExplainArgs),
    /// Look up the Wikipedia page for a question and print it as JSON.
    WikiFetch(WikiFetchArgs),
}

#[derive(Args, Debug, Default)]
struct BackendArgs {
    #[arg(long, value_name = "URL")]
    evaluator_url: Option<String>,
    #[arg(long, value_name = "URL")]
    generator_url: Option<String>,
    /// Use the deterministic in-process backends (no network).
    #[arg(long)]
    stub_backends: bool,
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct WikiArgs {
    #[arg(long, value_name = "URL")]
    wiki_endpoint: Option<String>,
    /// Serve Wikipedia lookups from a fixture file instead of the network.
    #[arg(long, value_name = "FILE")]
    wiki_fixture: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    web_search: Option<Switch>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Process only the first N questions.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_docs: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    /// Also write the (question type, action) matrix as CSV.
    #[arg(long, value_name = "FILE")]
    report_csv: Option<PathBuf>,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    wiki: WikiArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Results file written by `run`.
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    #[arg(long, value_name = "FILE")]
    report_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    question: String,
    #[arg(long)]
    document: String,
    #[arg(long, value_enum, default_value_t = ExplainMethod::Partition)]
    method: ExplainMethod,
    /// Scorer call budget for the partition method (default 4 per token).
    #[arg(long)]
    budget: Option<usize>,
    /// Output JSON path; a CSV is written next to it. Prints to stdout if
    /// omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Args, Debug)]
struct WikiFetchArgs {
    question: String,
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    wiki: WikiArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Popqa,
    Arc,
}

impl From<ModeArg> for DatasetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Popqa => DatasetMode::Popqa,
            ModeArg::Arc => DatasetMode::Arc,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Crag,
    Vanilla,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExplainMethod {
    Exact,
    Partition,
}

/// Settings file. Every key is optional.
#[derive(Deserialize, Debug, Default, PartialEq)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    evaluator_url: Option<String>,
    generator_url: Option<String>,
    wiki_endpoint: Option<String>,
    cache_dir: Option<PathBuf>,
    mode: Option<ModeArg>,
    method: Option<MethodArg>,
    web_search: Option<bool>,
    workers: Option<usize>,
    max_docs: Option<usize>,
    thresholds: Option<Thresholds>,
    timeout_secs: Option<u64>,
    max_retries: Option<u32>,
    wiki_rate_limit: Option<f64>,
    max_tokens: Option<u32>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad invocation: exit 1.
    Usage(String),
    /// Anything that went wrong while running: exit 2.
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(context: impl fmt::Display, e: impl fmt::Display) -> Failure {
    Failure::Runtime(format!("{context}: {e}"))
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

/// Flag, then environment, then file.
fn layered<T>(flag: Option<T>, env: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(env).or(file)
}

struct Resolved {
    evaluator_url: Option<String>,
    generator_url: Option<String>,
    wiki_endpoint: String,
    cache_dir: Option<PathBuf>,
}

fn resolve(
    backends: Option<&BackendArgs>,
    wiki: Option<&WikiArgs>,
    cache_flag: Option<PathBuf>,
    file: &FileConfig,
    env: impl Fn(&str) -> Option<String>,
) -> Resolved {
    Resolved {
        evaluator_url: layered(
            backends.and_then(|b| b.evaluator_url.clone()),
            env("CRAG_EVALUATOR_URL"),
            file.evaluator_url.clone(),
        ),
        generator_url: layered(
            backends.and_then(|b| b.generator_url.clone()),
            env("CRAG_GENERATOR_URL"),
            file.generator_url.clone(),
        ),
        wiki_endpoint: layered(
            wiki.and_then(|w| w.wiki_endpoint.clone()),
            env("CRAG_WIKI_ENDPOINT"),
            file.wiki_endpoint.clone(),
        )
        .unwrap_or_else(|| DEFAULT_API_ENDPOINT.to_string()),
        cache_dir: layered(
            backends.and_then(|b| b.cache_dir.clone()).or(cache_flag),
            env("CRAG_CACHE_DIR").map(PathBuf::from),
            file.cache_dir.clone(),
        ),
    }
}

fn backend_config(url: String, file: &FileConfig) -> BackendConfig {
    let mut cfg = BackendConfig::new(url);
    if let Some(secs) = file.timeout_secs {
        cfg.timeout = Duration::from_secs(secs);
    }
    if let Some(n) = file.max_retries {
        cfg.max_retries = n;
    }
    cfg
}

fn open_cache(dir: &Option<PathBuf>, sub: &str) -> Option<DiskCache> {
    let dir = dir.as_ref()?.join(sub);
    match DiskCache::open(&dir) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("cache disabled, cannot open {}: {e}", dir.display());
            None
        }
    }
}

fn evaluator(
    stub: bool,
    r: &Resolved,
    file: &FileConfig,
) -> Result<CachedEvaluator<Box<dyn EvaluatorBackend>>, Failure> {
    let inner: Box<dyn EvaluatorBackend> = if stub {
        Box::new(StubEvaluator::new())
    } else {
        let url = r.evaluator_url.clone().ok_or_else(|| {
            Failure::Usage(
                "no evaluator endpoint: pass --evaluator-url, set CRAG_EVALUATOR_URL, or use --stub-backends"
                    .into(),
            )
        })?;
        Box::new(HttpEvaluator::new(backend_config(url, file)))
    };
    let cached = CachedEvaluator::new(inner);
    Ok(match open_cache(&r.cache_dir, "evaluator") {
        Some(disk) if !stub => cached.with_disk(disk),
        _ => cached,
    })
}

fn generator(
    stub: bool,
    r: &Resolved,
    file: &FileConfig,
) -> Result<Box<dyn GeneratorBackend>, Failure> {
    if stub {
        return Ok(Box::new(StubGenerator::new()));
    }
    let url = r.generator_url.clone().ok_or_else(|| {
        Failure::Usage(
            "no generator endpoint: pass --generator-url, set CRAG_GENERATOR_URL, or use --stub-backends"
                .into(),
        )
    })?;
    let mut g = HttpGenerator::new(backend_config(url, file));
    if let Some(n) = file.max_tokens {
        g = g.with_max_tokens(n);
    }
    Ok(Box::new(g))
}

fn wiki_client(args: &WikiArgs, r: &Resolved, file: &FileConfig) -> Result<WikiClient, Failure> {
    let mut cfg = WikiConfig {
        api_endpoint: r.wiki_endpoint.clone(),
        cache_dir: r.cache_dir.as_ref().map(|d| d.join("wiki")),
        ..WikiConfig::default()
    };
    if let Some(rate) = file.wiki_rate_limit {
        if rate.is_nan() || rate <= 0.0 {
            return Err(Failure::Usage(format!(
                "wiki_rate_limit must be positive, got {rate}"
            )));
        }
        cfg.rate_limit = rate;
    }
    if let Some(secs) = file.timeout_secs {
        cfg.timeout = Duration::from_secs(secs);
    }
    if let Some(n) = file.max_retries {
        cfg.max_retries = n;
    }
    match &args.wiki_fixture {
        Some(path) => {
            let fixture = WikiFixture::load(path).map_err(|e| {
                Failure::Usage(format!("cannot load wiki fixture {}: {e}", path.display()))
            })?;
            // Fixture lookups are local; no point in caching them on disk.
            cfg.cache_dir = None;
            let limiter = Arc::new(TokenBucket::new(
                cfg.rate_limit,
                Box::new(crag::wiki::VirtualClock::default()),
            ));
            Ok(WikiClient::new(
                cfg,
                Arc::new(MockWiki::new(fixture)),
                limiter,
            ))
        }
        None => Ok(WikiClient::http(cfg)),
    }
}

fn write_outputs(
    results: &[crag::PipelineResult],
    report: &eval::RunReport,
    out: Option<&Path>,
    report_path: &Path,
    csv: Option<&Path>,
) -> Result<(), Failure> {
    if let Some(out) = out {
        eval::write_results(out, results)
            .map_err(|e| runtime(format!("writing {}", out.display()), e))?;
    }
    eval::write_report(report_path, report)
        .map_err(|e| runtime(format!("writing {}", report_path.display()), e))?;
    if let Some(csv) = csv {
        eval::write_report_csv(csv, report)
            .map_err(|e| runtime(format!("writing {}", csv.display()), e))?;
    }
    Ok(())
}

fn print_summary(report: &eval::RunReport) {
    println!(
        "accuracy {:.1}% ({}/{}), errors {}",
        report.overall_accuracy.percent,
        report.overall_accuracy.count,
        report.overall_accuracy.total,
        report.errors
    );
    for (action, s) in &report.per_action {
        println!(
            "  {action:<9} {:>5.1}% of questions, accuracy {:.1}%",
            s.share.percent, s.accuracy.percent
        );
    }
    if let Some(w) = &report.wiki_hit_rate {
        println!("  wikipedia hit rate {:.1}%", w.percent);
    }
}

fn cmd_run(args: RunArgs, file: &FileConfig) -> Result<(), Failure> {
    let r = resolve(Some(&args.backends), Some(&args.wiki), None, file, env_var);
    let web_search = match args.web_search {
        Some(s) => s == Switch::On,
        None => file.web_search.unwrap_or(false),
    };
    if args.backends.stub_backends && web_search && args.wiki.wiki_fixture.is_none() {
        return Err(Failure::Usage(
            "--stub-backends with --web-search on needs --wiki-fixture (stub runs never use the network)".into(),
        ));
    }
    let mode: DatasetMode = args.mode.or(file.mode).unwrap_or(ModeArg::Popqa).into();
    let cfg = PipelineConfig {
        thresholds: file.thresholds.unwrap_or_default(),
        max_docs: args
            .max_docs
            .map(|n| n as usize)
            .or(file.max_docs)
            .unwrap_or(usize::MAX)
            .max(1),
        dataset_mode: mode,
        enable_web_search: web_search,
        workers: args
            .workers
            .map(|n| n as usize)
            .or(file.workers)
            .unwrap_or(1)
            .max(1),
        method: match args.method.or(file.method) {
            Some(MethodArg::Vanilla) => Method::Vanilla,
            _ => Method::Crag,
        },
    };

    let mut questions = eval::ingest(&args.dataset, mode, QtypeRules::bundled())
        .map_err(|e| runtime(format!("reading {}", args.dataset.display()), e))?;
    if let Some(limit) = args.limit {
        questions.truncate(limit);
    }
    let eval_backend = evaluator(args.backends.stub_backends, &r, file)?;
    let gen_backend = generator(args.backends.stub_backends, &r, file)?;
    let wiki = if web_search {
        Some(wiki_client(&args.wiki, &r, file)?)
    } else {
        None
    };

    if let Err(e) = ctrlc::set_handler(|| {
        eprintln!("interrupted, finishing in-flight questions");
        CANCEL.store(true, Ordering::SeqCst);
    }) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }

    log::info!(
        "running {} questions with {} worker(s), web search {}",
        questions.len(),
        cfg.workers,
        if web_search { "on" } else { "off" }
    );
    let backends = Backends {
        evaluator: &eval_backend,
        generator: gen_backend.as_ref(),
        wiki: wiki.as_ref(),
    };
    let (results, report) = run_dataset_with_cancel(&questions, &cfg, backends, &CANCEL);
    write_outputs(
        &results,
        &report,
        Some(&args.out),
        &args.report,
        args.report_csv.as_deref(),
    )?;
    print_summary(&report);

    if CANCEL.load(Ordering::SeqCst) {
        return Err(Failure::Runtime(format!(
            "interrupted after {} of {} questions; partial results written",
            results.len(),
            questions.len()
        )));
    }
    if report.errors > 0 {
        return Err(Failure::Runtime(format!(
            "{} of {} questions failed; see the error field in {}",
            report.errors,
            report.n,
            args.out.display()
        )));
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, file: &FileConfig) -> Result<(), Failure> {
    let mode: DatasetMode = args.mode.or(file.mode).unwrap_or(ModeArg::Popqa).into();
    let questions = eval::ingest(&args.dataset, mode, QtypeRules::bundled())
        .map_err(|e| runtime(format!("reading {}", args.dataset.display()), e))?;
    let mut results = eval::read_results(&args.results)
        .map_err(|e| runtime(format!("reading {}", args.results.display()), e))?;
    let changed = eval::rescore(&mut results, &questions);
    if changed > 0 {
        log::info!("{changed} result(s) changed correctness on re-scoring");
    }
    let report = eval::aggregate(&results);
    write_outputs(
        &results,
        &report,
        None,
        &args.report,
        args.report_csv.as_deref(),
    )?;
    print_summary(&report);
    Ok(())
}

fn cmd_explain(args: ExplainArgs, file: &FileConfig) -> Result<(), Failure> {
    let r = resolve(Some(&args.backends), None, None, file, env_var);
    let scorer = evaluator(args.backends.stub_backends, &r, file)?;
    let input = tokenize_for_masking(&args.question, &args.document)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let score = |text: &str| score_rendering(&scorer, text);
    let attribution = match args.method {
        ExplainMethod::Exact => exact_shapley(&input, score),
        ExplainMethod::Partition => {
            let budget = args.budget.unwrap_or_else(|| default_budget(input.len()));
            partition_shapley(&input, score, budget)
        }
    }
    .map_err(|e| match e {
        crag::attribution::AttributionError::TooManyTokens { .. } => Failure::Usage(e.to_string()),
        other => runtime("attribution failed", other),
    })?;
    let sample = AttributionSample::new(
        &args.question,
        &args.document,
        input.tokens().to_vec(),
        attribution,
    );
    match &args.out {
        Some(out) => {
            let csv = export_attributions(std::slice::from_ref(&sample), out)
                .map_err(|e| runtime(format!("writing {}", out.display()), e))?;
            println!("wrote {} and {}", out.display(), csv.display());
        }
        None => {
            let json =
                serde_json::to_string_pretty(&sample).map_err(|e| runtime("serializing", e))?;
            println!("{json}");
        }
    }
    Ok(())
}

fn cmd_wiki_fetch(args: WikiFetchArgs, file: &FileConfig) -> Result<(), Failure> {
    let r = resolve(
        None,
        Some(&args.wiki),
        args.cache_dir.clone(),
        file,
        env_var,
    );
    let client = wiki_client(&args.wiki, &r, file)?;
    let result = client
        .fetch_for_question(&args.question)
        .map_err(|e| runtime("wikipedia lookup failed", e))?;
    let json = serde_json::to_string_pretty(&result).map_err(|e| runtime("serializing", e))?;
    println!("{json}");
    if let Some(err) = &result.error {
        return Err(Failure::Runtime(format!("wikipedia lookup failed: {err}")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Run(a) => cmd_run(a, &file),
        Command::Eval(a) => cmd_eval(a, &file),
        Command::Explain(a) => cmd_explain(a, &file),
        Command::WikiFetch(a) => cmd_wiki_fetch(a, &file),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
