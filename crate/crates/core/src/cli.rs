//! The `pex` command-line front end.
//!
//! Exit status: 0 success, 1 usage error, 2 data or validation error,
//! 3 backend error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::backend::{
    Backend, BackendError, CachedBackend, LiveBackend, LiveConfig, OracleBackend, QuestionParams, TranscriptCache,
    API_KEY_ENV,
};
use crate::corpus::{import_raw_document, load_corpus, Corpus, CorpusEntry, CorpusError, CorpusRecord, RawDocument};
use crate::eval::{render_table, score_document, EvalError, EvalReport, MatchConfig, TableLayout};
use crate::fsutil::write_atomic;
use crate::pipeline::{ActivitySource, Extractor, PipelineError};
use crate::prompting::{Bindings, PromptBuilder, PromptError, QuestionKind, Setting};
use crate::worldmodel::{ExportFormat, ModelError, WorldModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pex", version, about = "Extract process models from text by questioning a completion model")]
pub struct Cli {
    /// Canonical corpus JSON; the bundled corpus when omitted.
    #[arg(long, global = true, env = "PEX_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// TOML file with defaults for backend and matching options.
    #[arg(long, global = true, env = "PEX_CONFIG")]
    pub config: Option<PathBuf>,
    /// Increase log detail (-v logs every prompt digest).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw behaviour-graph annotations into a canonical corpus file.
    Import(ImportArgs),
    /// Print the prompt for one question.
    Prompt(PromptArgs),
    /// Run the question dialogue on one document.
    Extract(ExtractArgs),
    /// Score extracted models against the gold standard.
    Evaluate(EvaluateArgs),
    /// Extract and evaluate every document under every setting.
    RunSuite(SuiteArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Raw annotation files.
    #[arg(required = true)]
    pub raw: Vec<PathBuf>,
    /// Existing corpus to append to.
    #[arg(long)]
    pub merge: Option<PathBuf>,
    /// Document id, overriding the file's (single input only).
    #[arg(long)]
    pub id: Option<String>,
    /// Text file holding the document body (single input only).
    #[arg(long)]
    pub body_file: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, short)]
    pub question: QuestionKind,
    #[arg(long, short, default_value = "raw")]
    pub setting: Setting,
    #[arg(long, short)]
    pub doc: String,
    /// Value for the X placeholder (Q2, Q3).
    #[arg(long)]
    pub x: Option<String>,
    /// Value for the Y placeholder (Q3).
    #[arg(long)]
    pub y: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Extracted,
    Gold,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Transcript cache: read by replay, written through by live and oracle.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// With replay, send cache misses to the live endpoint and record them.
    #[arg(long)]
    pub allow_live_fallback: bool,
    #[arg(long, env = "PEX_BASE_URL")]
    pub endpoint: Option<String>,
    #[arg(long, env = "PEX_MODEL")]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Nucleus (top-p) mass.
    #[arg(long)]
    pub nucleus: Option<f64>,
    /// Concurrent Q2/Q3 queries per document.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Request-rate ceiling for the live backend.
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    /// TOML alias/match configuration; the bundled alias list when omitted.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// Token Jaccard threshold for phrase matches.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, short)]
    pub doc: String,
    #[arg(long, short, default_value = "raw")]
    pub setting: Setting,
    #[arg(long, value_enum, default_value = "extracted")]
    pub source: SourceArg,
    /// Model JSON output; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Graphviz export of the model.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Run record with counts and raw answers, also written on failure.
    #[arg(long)]
    pub run_out: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model extracted with Q1 activities (ex mode).
    #[arg(long)]
    pub ex_model: Option<PathBuf>,
    /// Model seeded with gold activities (gs mode).
    #[arg(long)]
    pub gs_model: Option<PathBuf>,
    /// Gold document; taken from the models when omitted.
    #[arg(long, short)]
    pub doc: Option<String>,
    /// Setting label used in the report.
    #[arg(long, short, default_value = "raw")]
    pub setting: Setting,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub matching: MatchArgs,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Output directory for models, run records and reports.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Settings to run; all four when omitted.
    #[arg(long, value_delimiter = ',')]
    pub settings: Vec<Setting>,
    /// Documents to run; the evaluation documents when omitted.
    #[arg(long, value_delimiter = ',')]
    pub docs: Vec<String>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
}

/// Defaults read from `--config`. Flags and environment take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub nucleus: Option<f64>,
    pub workers: Option<usize>,
    pub requests_per_minute: Option<u32>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub aliases: Option<PathBuf>,
    pub threshold: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::Backend(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend { .. } | PipelineError::Params(_) => CliError::Backend(e.to_string()),
            PipelineError::Prompt(_) => CliError::Usage(e.to_string()),
            PipelineError::Model(_) | PipelineError::GoldMismatch { .. } => CliError::Data(e.to_string()),
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    write_atomic(path, contents.as_bytes()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

struct Context {
    corpus: Corpus,
    file: FileConfig,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => toml::from_str(&read_input(path)?)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?,
            None => FileConfig::default(),
        };
        let corpus = match &cli.corpus {
            Some(path) => load_corpus(path)?,
            None => Corpus::bundled(),
        };
        Ok(Context { corpus, file })
    }

    fn entry(&self, id: &str) -> Result<&CorpusEntry, CliError> {
        self.corpus
            .get(id)
            .ok_or_else(|| CliError::Data(format!("document {id} is not in the corpus")))
    }

    fn prompts(&self) -> Result<PromptBuilder, CliError> {
        Ok(PromptBuilder::from_corpus(&self.corpus).or_else(|_| PromptBuilder::from_corpus(&Corpus::bundled()))?)
    }

    fn match_config(&self, args: &MatchArgs) -> Result<MatchConfig, CliError> {
        let cfg = match args.aliases.as_ref().or(self.file.aliases.as_ref()) {
            Some(path) => MatchConfig::load(path)?,
            None => MatchConfig::bundled(),
        };
        match args.threshold.or(self.file.threshold) {
            Some(t) => Ok(cfg.with_threshold(t).map_err(|e| CliError::Usage(e.to_string()))?),
            None => Ok(cfg),
        }
    }

    fn extractor(&self, args: &BackendArgs) -> Result<Extractor, CliError> {
        let mut params = QuestionParams::default();
        let temperature = args.temperature.or(self.file.temperature);
        let nucleus = args.nucleus.or(self.file.nucleus);
        if temperature.is_some() || nucleus.is_some() {
            let (t, n) = (
                temperature.unwrap_or(params.q1.temperature),
                nucleus.unwrap_or(params.q1.nucleus),
            );
            params = params.with_sampling(t, n);
        }
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let mut extractor = Extractor::new(self.prompts()?).with_params(params);
        if let Some(w) = args.workers.or(self.file.workers) {
            extractor = extractor.with_workers(w);
        }
        Ok(extractor)
    }

    fn live(&self, args: &BackendArgs) -> Result<LiveBackend, CliError> {
        let mut config = LiveConfig::default();
        if let Some(e) = args.endpoint.clone().or_else(|| self.file.endpoint.clone()) {
            config.endpoint = e;
        }
        if let Some(m) = args.model.clone().or_else(|| self.file.model.clone()) {
            config.model = m;
        }
        if let Some(r) = args.max_retries.or(self.file.max_retries) {
            config.max_retries = r;
        }
        if let Some(t) = args.timeout_secs.or(self.file.timeout_secs) {
            config.timeout = Duration::from_secs(t);
        }
        if let Some(w) = args.workers.or(self.file.workers) {
            config.max_concurrent = w.max(1);
        }
        if let Some(rpm) = args.requests_per_minute.or(self.file.requests_per_minute) {
            config = config.with_requests_per_minute(rpm);
        }
        Ok(LiveBackend::from_env(config)?)
    }

    fn backend(&self, args: &BackendArgs) -> Result<Box<dyn Backend>, CliError> {
        let kind = args.backend.or(self.file.backend).unwrap_or(BackendKind::Replay);
        let cache_path = args.cache.clone().or_else(|| self.file.cache.clone());
        let open = |path: &Path| -> Result<Arc<TranscriptCache>, CliError> {
            Ok(Arc::new(TranscriptCache::open(path).map_err(|e| CliError::Data(e.to_string()))?))
        };
        if args.allow_live_fallback && kind != BackendKind::Replay {
            return Err(CliError::Usage("--allow-live-fallback only applies to --backend replay".into()));
        }
        Ok(match kind {
            BackendKind::Replay => {
                let path = cache_path.ok_or_else(|| CliError::Usage("--backend replay requires --cache".into()))?;
                let cache = open(&path)?;
                if args.allow_live_fallback {
                    Box::new(CachedBackend::recording(cache, Box::new(self.live(args)?)))
                } else {
                    Box::new(CachedBackend::replay(cache))
                }
            }
            BackendKind::Oracle => {
                let oracle = OracleBackend::new(&self.corpus);
                match cache_path {
                    Some(path) => Box::new(CachedBackend::recording(open(&path)?, Box::new(oracle))),
                    None => Box::new(oracle),
                }
            }
            BackendKind::Live => {
                let live = self.live(args)?;
                match cache_path {
                    Some(path) => Box::new(CachedBackend::recording(open(&path)?, Box::new(live))),
                    None => Box::new(live),
                }
            }
        })
    }
}

fn cmd_import(args: &ImportArgs) -> Result<(), CliError> {
    if args.raw.len() > 1 && (args.id.is_some() || args.body_file.is_some()) {
        return Err(CliError::Usage("--id and --body-file need exactly one raw input".into()));
    }
    let mut records: Vec<CorpusRecord> = match &args.merge {
        Some(path) => load_corpus(path)?.entries().iter().map(CorpusRecord::from_entry).collect(),
        None => Vec::new(),
    };
    let body = args.body_file.as_deref().map(read_input).transpose()?;
    for path in &args.raw {
        let raw: RawDocument = serde_json::from_str(&read_input(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        records.push(import_raw_document(&raw, args.id.as_deref(), body.as_deref())?);
    }
    let entries = records
        .into_iter()
        .map(CorpusRecord::into_entry)
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = Corpus::from_entries(entries)?;
    write_output(&args.out, &corpus.to_json_string())?;
    log::info!("wrote {} documents to {}", corpus.len(), args.out.display());
    Ok(())
}

fn cmd_prompt(ctx: &Context, args: &PromptArgs) -> Result<(), CliError> {
    let entry = ctx.entry(&args.doc)?;
    let bindings = Bindings {
        x: args.x.clone(),
        y: args.y.clone(),
    };
    let prompt = ctx.prompts()?.render(args.question, args.setting, &entry.document, &bindings)?;
    log::debug!("prompt digest {}", prompt.digest);
    print!("{}", prompt.text);
    Ok(())
}

fn cmd_extract(ctx: &Context, args: &ExtractArgs) -> Result<(), CliError> {
    let entry = ctx.entry(&args.doc)?;
    let extractor = ctx.extractor(&args.backend)?;
    let backend = ctx.backend(&args.backend)?;
    let source = match args.source {
        SourceArg::Extracted => ActivitySource::Extracted,
        SourceArg::Gold => ActivitySource::Gold(&entry.gold),
    };
    let run = match extractor.extract(&entry.document, args.setting, backend.as_ref(), source) {
        Ok(run) => run,
        Err(e) => {
            if let (Some(path), Some(partial)) = (&args.run_out, e.partial()) {
                write_output(path, &record_json(partial))?;
            }
            return Err(e.into());
        }
    };
    if let Some(path) = &args.run_out {
        write_output(path, &record_json(&run))?;
    }
    if let Some(path) = &args.dot {
        write_output(path, &run.model.export(ExportFormat::Dot))?;
    }
    match &args.out {
        Some(path) => write_output(path, &run.model.to_json())?,
        None => print!("{}", run.model.to_json()),
    }
    log::info!(
        "{} {}: {} Q1, {} Q2, {} Q3 queries",
        run.doc_id,
        run.setting,
        run.counts.q1,
        run.counts.q2,
        run.counts.q3
    );
    Ok(())
}

fn record_json(run: &crate::pipeline::ExtractionRun) -> String {
    let mut s = serde_json::to_string_pretty(&run.record()).expect("run record serializes");
    s.push('\n');
    s
}

fn load_model(path: &Path) -> Result<WorldModel, CliError> {
    WorldModel::from_json(&read_input(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<(), CliError> {
    if args.ex_model.is_none() && args.gs_model.is_none() {
        return Err(CliError::Usage("evaluate needs --ex-model and/or --gs-model".into()));
    }
    let cfg = ctx.match_config(&args.matching)?;
    let ex = args.ex_model.as_deref().map(load_model).transpose()?;
    let gs = args.gs_model.as_deref().map(load_model).transpose()?;
    let doc_id = match &args.doc {
        Some(d) => d.clone(),
        None => ex.as_ref().or(gs.as_ref()).map(|m| m.doc_id().to_string()).expect("a model was given"),
    };
    let entry = ctx.entry(&doc_id)?;
    let scores = score_document(&entry.gold, ex.as_ref(), gs.as_ref(), &cfg)?;
    let report = EvalReport::new(args.setting, vec![scores]);
    write_reports(&[report], args.json.as_deref(), args.csv.as_deref(), None)
}

fn write_reports(
    reports: &[EvalReport],
    json: Option<&Path>,
    csv: Option<&Path>,
    text: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(path) = json {
        let mut s = serde_json::to_string_pretty(reports).expect("report serializes");
        s.push('\n');
        write_output(path, &s)?;
    }
    if let Some(path) = csv {
        write_output(path, &render_table(reports, TableLayout::Csv))?;
    }
    let table = render_table(reports, TableLayout::Text);
    if let Some(path) = text {
        write_output(path, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_run_suite(ctx: &Context, args: &SuiteArgs) -> Result<(), CliError> {
    let settings = if args.settings.is_empty() {
        Setting::ALL.to_vec()
    } else {
        args.settings.clone()
    };
    let entries: Vec<&CorpusEntry> = if args.docs.is_empty() {
        ctx.corpus.evaluation_entries()
    } else {
        args.docs.iter().map(|d| ctx.entry(d)).collect::<Result<_, _>>()?
    };
    if entries.is_empty() {
        return Err(CliError::Data("no documents to run".into()));
    }
    let cfg = ctx.match_config(&args.matching)?;
    let extractor = ctx.extractor(&args.backend)?;
    let backend = ctx.backend(&args.backend)?;

    let mut reports = Vec::new();
    for setting in settings {
        let mut documents = Vec::new();
        for entry in &entries {
            let mut models = Vec::new();
            for (tag, source) in [
                ("ex", ActivitySource::Extracted),
                ("gs", ActivitySource::Gold(&entry.gold)),
            ] {
                let run = extractor.extract(&entry.document, setting, backend.as_ref(), source)?;
                let stem = format!("{}-{tag}", entry.document.id);
                let dir = args.out.join("models").join(setting.as_str());
                write_output(&dir.join(format!("{stem}.json")), &run.model.to_json())?;
                let runs = args.out.join("runs").join(setting.as_str());
                write_output(&runs.join(format!("{stem}.json")), &record_json(&run))?;
                models.push(run.model);
            }
            documents.push(score_document(&entry.gold, Some(&models[0]), Some(&models[1]), &cfg)?);
            log::info!("{} {setting} done", entry.document.id);
        }
        reports.push(EvalReport::new(setting, documents));
    }
    write_reports(
        &reports,
        Some(&args.out.join("report.json")),
        Some(&args.out.join("report.csv")),
        Some(&args.out.join("report.txt")),
    )
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("PEX_LOG")
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Import(args) = &cli.command {
        return cmd_import(args);
    }
    let ctx = Context::load(cli)?;
    match &cli.command {
        Command::Import(_) => unreachable!("handled above"),
        Command::Prompt(args) => cmd_prompt(&ctx, args),
        Command::Extract(args) => cmd_extract(&ctx, args),
        Command::Evaluate(args) => cmd_evaluate(&ctx, args),
        Command::RunSuite(args) => cmd_run_suite(&ctx, args),
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pex: {e}");
            if matches!(e, CliError::Backend(_)) && e.to_string().contains(API_KEY_ENV) {
                eprintln!("pex: set {API_KEY_ENV} or use --backend replay/oracle");
            }
            e.exit_code()
        }
    }
}
