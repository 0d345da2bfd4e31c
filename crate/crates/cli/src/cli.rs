use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use convsearch::classify::ClassifierRules;
use convsearch::evalkit::{self, EvalOptions, MetricReport};
use convsearch::index::{read_corpus, BuildOptions, CorpusFormat, InvertedIndex};
use convsearch::rerank::{CueLexicon, RerankParams};
use convsearch::retrieval::{search, RetrievalParams, Scorer, WeightedQuery};
use convsearch::rewrite::{load_topics, rewrite_topic, FusionWeights, RewriteOptions};
use convsearch::service::{self, Engine, PipelineConfig, RunParams, SessionDefaults, SessionStore};
use convsearch::textproc::{AbbreviationTable, TextConfig};
use convsearch::{synthetic, textproc};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "convsearch", version, about = "Rule-based conversational passage search")]
pub struct Cli {
    /// TOML parameter file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a JSON-lines or TSV corpus.
    Index(IndexArgs),
    /// Run one query against an index.
    Search(SearchArgs),
    /// Print the answer-type category of questions.
    Classify(ClassifyArgs),
    /// Show how each turn of a topics file is completed and weighted.
    Rewrite(RewriteArgs),
    /// Batch pipeline: topics to a TREC run file plus sidecars.
    Run(RunArgs),
    /// Score a run against qrels.
    Eval(EvalArgs),
    /// Per-category metric differences between two runs.
    Compare(CompareArgs),
    /// Serve interactive sessions over HTTP.
    Serve(ServeArgs),
    /// Write the synthetic benchmark (corpus, topics, qrels) to a directory.
    GenBench(GenBenchArgs),
}

#[derive(Debug, Args, Default)]
pub struct TextArgs {
    /// Stopword list, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Abbreviation table, `ABBR<TAB>expansion` per line.
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    #[arg(long)]
    pub no_stem: bool,
}

impl TextArgs {
    fn any(&self) -> bool {
        self.stopwords.is_some() || self.abbreviations.is_some() || self.no_stem
    }
}

#[derive(Debug, Args, Default)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// `ql` or `bm25`.
    #[arg(long)]
    pub scorer: Option<String>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// `jsonl` or `tsv`; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long)]
    pub allow_empty: bool,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, short)]
    pub query: String,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, conflicts_with = "batch")]
    pub question: Option<String>,
    /// File with one question per line.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RewriteFlags {
    /// Fusion weights `current,first,previous`.
    #[arg(long)]
    pub weights: Option<FusionWeights>,
    /// Do not substitute pronouns.
    #[arg(long)]
    pub no_resolve: bool,
    /// Include the topic title at the previous-turn weight.
    #[arg(long)]
    pub use_title: bool,
}

#[derive(Debug, Args)]
pub struct RewriteArgs {
    #[arg(long)]
    pub topics: PathBuf,
    #[command(flatten)]
    pub rewrite: RewriteFlags,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Current-question-only query likelihood: weights (1,0,0), no pronoun
    /// resolution, no reranking. Other flags still apply on top.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub tag: Option<String>,
    /// Rerank bonus scale; 0 disables reranking.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Only rerank the top N documents.
    #[arg(long)]
    pub rerank_depth: Option<usize>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[command(flatten)]
    pub rewrite: RewriteFlags,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Request-side text settings; must match the index.
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Table,
    Tsv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Category sidecar; defaults to `<run>.categories.tsv` when present.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Cutoffs, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long)]
    pub rel_threshold: Option<u8>,
    #[arg(long, value_enum, default_value_t)]
    pub format: ReportFormat,
    /// Also print one line per query.
    #[arg(long)]
    pub per_query: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Reference run.
    pub run_a: PathBuf,
    /// Run compared against the reference.
    pub run_b: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long)]
    pub rel_threshold: Option<u8>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Append-only session log, replayed at startup.
    #[arg(long)]
    pub session_log: Option<PathBuf>,
    /// Default result count per ask.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[command(flatten)]
    pub rewrite: RewriteFlags,
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenBenchArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = synthetic::MINIBENCH_SEED)]
    pub seed: u64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Index(args) => cmd_index(&file, args, out),
        Command::Search(args) => cmd_search(&file, args, out),
        Command::Classify(args) => cmd_classify(&file, args, out),
        Command::Rewrite(args) => cmd_rewrite(&file, args, out),
        Command::Run(args) => cmd_run(&file, args, out),
        Command::Eval(args) => cmd_eval(&file, args, out),
        Command::Compare(args) => cmd_compare(&file, args, out),
        Command::Serve(args) => cmd_serve(&file, args),
        Command::GenBench(args) => cmd_gen_bench(args, out),
    }
}

fn text_config(file: &FileConfig, args: &TextArgs) -> Result<TextConfig> {
    let mut config = TextConfig::default();
    if let Some(path) = args.stopwords.as_ref().or(file.text.stopwords.as_ref()) {
        config.stopwords = textproc::load_stopwords(path)?;
    }
    if let Some(path) = args.abbreviations.as_ref().or(file.text.abbreviations.as_ref()) {
        config.abbreviations = AbbreviationTable::load(path)?;
    }
    config.stem = !args.no_stem && file.text.stem.unwrap_or(true);
    Ok(config)
}

fn text_overridden(file: &FileConfig, args: &TextArgs) -> bool {
    args.any() || file.text != Default::default()
}

fn retrieval_params(file: &FileConfig, args: &RetrievalArgs) -> Result<RetrievalParams> {
    let mut p = RetrievalParams::default();
    let f = &file.retrieval;
    if let Some(s) = args.scorer.as_ref().or(f.scorer.as_ref()) {
        p.scorer = s.parse::<Scorer>()?;
    }
    p.mu = args.mu.or(f.mu).unwrap_or(p.mu);
    p.k = args.k.or(f.k).unwrap_or(p.k);
    p.bm25_k1 = f.bm25_k1.unwrap_or(p.bm25_k1);
    p.bm25_b = f.bm25_b.unwrap_or(p.bm25_b);
    p.validate()?;
    Ok(p)
}

fn rewrite_options(file: &FileConfig, flags: &RewriteFlags, base: RewriteOptions) -> Result<RewriteOptions> {
    let mut opts = base;
    if let Some([current, first, previous]) = file.rewrite.weights {
        opts.weights = FusionWeights { current, first, previous };
    }
    if let Some(w) = flags.weights {
        opts.weights = w;
    }
    opts.resolve = !flags.no_resolve && file.rewrite.resolve.unwrap_or(opts.resolve);
    opts.use_title = flags.use_title || file.rewrite.use_title.unwrap_or(opts.use_title);
    opts.weights.validate()?;
    Ok(opts)
}

fn load_rules(file: &FileConfig, flag: &Option<PathBuf>) -> Result<ClassifierRules> {
    Ok(match flag.as_ref().or(file.classify.rules.as_ref()) {
        Some(path) => ClassifierRules::load(path)?,
        None => ClassifierRules::builtin(),
    })
}

fn load_lexicon(file: &FileConfig, flag: &Option<PathBuf>) -> Result<CueLexicon> {
    Ok(match flag.as_ref().or(file.classify.lexicon.as_ref()) {
        Some(path) => CueLexicon::load(path)?,
        None => CueLexicon::builtin(),
    })
}

fn guess_format(path: &Path, flag: Option<&str>) -> Result<CorpusFormat> {
    if let Some(f) = flag {
        return Ok(f.parse()?);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => Ok(CorpusFormat::Tsv),
        Some("jsonl" | "json") => Ok(CorpusFormat::JsonLines),
        _ => bail!("cannot tell the format of {}; pass --format jsonl|tsv", path.display()),
    }
}

fn cmd_index(file: &FileConfig, args: IndexArgs, out: &mut dyn Write) -> Result<()> {
    let config = text_config(file, &args.text)?;
    let format = guess_format(&args.corpus, args.format.as_deref())?;
    let reader = std::fs::File::open(&args.corpus).with_context(|| format!("opening {}", args.corpus.display()))?;
    let source = args.corpus.display().to_string();
    let docs = read_corpus(std::io::BufReader::new(reader), format, &source);
    let options = BuildOptions { allow_empty: args.allow_empty, dedup: !args.no_dedup };
    let index = InvertedIndex::build(docs, config, options)?;
    index.save(&args.out)?;
    let stats = index.stats();
    writeln!(
        out,
        "indexed {} documents, {} terms, {} tokens (mean length {:.1}) -> {}",
        stats.docs,
        stats.terms,
        stats.collection_length,
        stats.mean_doc_length,
        args.out.display()
    )?;
    Ok(())
}

fn cmd_search(file: &FileConfig, args: SearchArgs, out: &mut dyn Write) -> Result<()> {
    let index = InvertedIndex::load(&args.index)?;
    let mut params = retrieval_params(file, &args.retrieval)?;
    if args.retrieval.k.is_none() && file.retrieval.k.is_none() {
        params.k = 10;
    }
    let query = WeightedQuery::from_terms(&index.config().process(&args.query));
    for d in search(&index, &query, &params)? {
        writeln!(out, "{}\t{}\t{:.6}", d.rank, d.doc_id, d.score)?;
    }
    Ok(())
}

fn cmd_classify(file: &FileConfig, args: ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let rules = load_rules(file, &args.rules)?;
    match (args.question, args.batch) {
        (Some(q), _) => writeln!(out, "{}", rules.classify(&q)?)?,
        (None, Some(path)) => {
            let reader = std::io::BufReader::new(std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                writeln!(out, "{}\t{}", line.trim(), rules.classify(&line)?)?;
            }
        }
        (None, None) => bail!("pass --question or --batch"),
    }
    Ok(())
}

fn cmd_rewrite(file: &FileConfig, args: RewriteArgs, out: &mut dyn Write) -> Result<()> {
    let config = text_config(file, &args.text)?;
    let opts = rewrite_options(file, &args.rewrite, RewriteOptions::default())?;
    for topic in load_topics(&args.topics)? {
        for turn in rewrite_topic(&topic, &opts, &config) {
            let terms = match &turn.query {
                Ok(q) => q.terms().iter().map(|(t, w)| format!("{t}:{w}")).collect::<Vec<_>>().join(" "),
                Err(e) => format!("<{e}>"),
            };
            writeln!(out, "{}\t{}\t{}", turn.query_id, turn.resolved, terms)?;
        }
    }
    Ok(())
}

fn pipeline_config(file: &FileConfig, args: &RunArgs) -> Result<PipelineConfig> {
    let mut config = if args.baseline { PipelineConfig::baseline() } else { PipelineConfig::method() };
    // The baseline fixes its own rewrite and rerank settings; only explicit
    // flags move it.
    if args.baseline {
        if let Some(w) = args.rewrite.weights {
            config.rewrite.weights = w;
        }
        config.rewrite.use_title = args.rewrite.use_title;
    } else {
        config.rewrite = rewrite_options(file, &args.rewrite, config.rewrite)?;
        config.rerank.lambda = file.rerank.lambda.unwrap_or(config.rerank.lambda);
        config.rerank.depth = file.rerank.depth.or(config.rerank.depth);
    }
    config.retrieval = retrieval_params(file, &args.retrieval)?;
    if let Some(lambda) = args.lambda {
        config.rerank.lambda = lambda;
    }
    if args.rerank_depth.is_some() {
        config.rerank.depth = args.rerank_depth;
    }
    if let Some(tag) = &args.tag {
        config.run_tag = tag.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(file: &FileConfig, args: RunArgs, out: &mut dyn Write) -> Result<()> {
    let config = pipeline_config(file, &args)?;
    let topics = load_topics(&args.topics)?;
    let index = InvertedIndex::load(&args.index)?;
    let rules = load_rules(file, &args.rules)?;
    let lexicon = load_lexicon(file, &args.lexicon)?;
    let engine = if text_overridden(file, &args.text) {
        Engine::with_text_config(index, &text_config(file, &args.text)?, rules, lexicon)?
    } else {
        Engine::new(index, rules, lexicon)
    };
    let output = service::run_pipeline(&engine, &topics, &config)?;
    service::write_pipeline_outputs(&output, &RunParams::new(&engine, &config), &args.out)?;
    writeln!(out, "{} queries -> {} (tag {})", output.run.len(), args.out.display(), config.run_tag)?;
    if !output.empty_queries.is_empty() {
        writeln!(out, "no query terms for: {}", output.empty_queries.join(", "))?;
    }
    Ok(())
}

fn eval_ks(file: &FileConfig, flag: &[usize]) -> Vec<usize> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        file.eval.ks.clone().unwrap_or_else(|| vec![10, 1000])
    }
}

fn evaluate_file(
    run_path: &Path,
    qrels: &evalkit::Qrels,
    categories: Option<&Path>,
    ks: &[usize],
    options: EvalOptions,
) -> Result<MetricReport> {
    let run = evalkit::load_run(run_path)?;
    let (sidecar, _) = service::sidecar_paths(run_path);
    let categories = match categories {
        Some(path) => evalkit::load_categories(path)?,
        None if sidecar.exists() => evalkit::load_categories(&sidecar)?,
        None => HashMap::new(),
    };
    Ok(evalkit::evaluate(&run, qrels, &categories, ks, options)?)
}

fn eval_options(file: &FileConfig, flag: Option<u8>) -> EvalOptions {
    EvalOptions { rel_threshold: flag.or(file.eval.rel_threshold).unwrap_or(1) }
}

fn cmd_eval(file: &FileConfig, args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let qrels = evalkit::load_qrels(&args.qrels)?;
    let ks = eval_ks(file, &args.k);
    let report = evaluate_file(&args.run, &qrels, args.categories.as_deref(), &ks, eval_options(file, args.rel_threshold))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match args.format {
        ReportFormat::Table => write!(out, "{}", report.to_table())?,
        ReportFormat::Tsv => write!(out, "{}", report.to_tsv())?,
    }
    if args.per_query {
        for q in &report.queries {
            let values: Vec<String> = q
                .values
                .iter()
                .map(|((m, k), v)| format!("{}@{k}={}", m.as_str(), v.map_or("n/a".into(), |v| format!("{v:.4}"))))
                .collect();
            writeln!(out, "{}\t{}\t{}", q.query_id, q.category, values.join("\t"))?;
        }
    }
    Ok(())
}

fn cmd_compare(file: &FileConfig, args: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let qrels = evalkit::load_qrels(&args.qrels)?;
    let ks = eval_ks(file, &args.k);
    let options = eval_options(file, args.rel_threshold);
    let a = evaluate_file(&args.run_a, &qrels, None, &ks, options)?;
    let b = evaluate_file(&args.run_b, &qrels, None, &ks, options)?;
    write!(out, "{}", evalkit::deltas_to_tsv(&evalkit::compare(&a, &b)?))?;
    Ok(())
}

fn cmd_serve(file: &FileConfig, args: ServeArgs) -> Result<()> {
    let s = &file.serve;
    let Some(index_path) = args.index.as_ref().or(s.index.as_ref()) else {
        bail!("serve needs --index or [serve] index in the config file");
    };
    let index = InvertedIndex::load(index_path)?;
    let mut pipeline = PipelineConfig::method();
    pipeline.rewrite = rewrite_options(file, &args.rewrite, pipeline.rewrite)?;
    pipeline.retrieval = retrieval_params(file, &RetrievalArgs { k: None, mu: args.mu, scorer: None })?;
    pipeline.retrieval.k = args.k.or(s.k).unwrap_or(10);
    pipeline.rerank = RerankParams {
        lambda: args.lambda.or(file.rerank.lambda).unwrap_or(pipeline.rerank.lambda),
        depth: file.rerank.depth,
    };
    let engine = Arc::new(Engine::new(index, load_rules(file, &args.rules)?, load_lexicon(file, &args.lexicon)?));
    let defaults = SessionDefaults { pipeline };
    let store = match args.session_log.as_ref().or(s.session_log.as_ref()) {
        Some(path) => SessionStore::with_log(engine, defaults, path)?,
        None => SessionStore::new(engine, defaults)?,
    };
    let host = args.host.as_deref().or(s.host.as_deref()).unwrap_or("127.0.0.1");
    let port = args.port.or(s.port).unwrap_or(8080);
    let addr: std::net::SocketAddr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crate::http::serve(Arc::new(store), addr))?;
    Ok(())
}

fn cmd_gen_bench(args: GenBenchArgs, out: &mut dyn Write) -> Result<()> {
    let bench = synthetic::minibench(args.seed);
    std::fs::create_dir_all(&args.out)?;
    let write = |name: &str, body: String| {
        let path = args.out.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    write("corpus.jsonl", bench.corpus_jsonl())?;
    write("topics.json", bench.topics_json())?;
    write("qrels.txt", bench.qrels_text())?;
    writeln!(
        out,
        "{} passages, {} topics, {} judgments -> {}",
        bench.documents.len(),
        bench.topics.len(),
        bench.qrels.len(),
        args.out.display()
    )?;
    Ok(())
}
