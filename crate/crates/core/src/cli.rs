//! The `disinfo` command line.
//!
//! Every command reads an optional JSON [`RunConfig`], writes its outputs into
//! a run directory and exits with 0 (success), 1 (configuration or input
//! error) or 2 (finished, but the error log is not empty). Failures print a
//! human line followed by a one-line JSON trailer on standard error.
//!
//! Run directories are `<run_root>/<UTC timestamp>-<config digest prefix>`
//! unless `--run-dir` pins one, which is how interrupted runs resume.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{self, DatasetKind, GeneratedArticle, Label, NewsArticle, TopicColumnPolicy};
use crate::digest::sha256_hex;
use crate::embed_viz::{self, TsneParams};
use crate::evaluation::{self, DenominatorPolicy, GroupKey, ReportFormat};
use crate::gateway::{Gateway, GatewayConfig};
use crate::parsing::{RefusalMatcher, DEFAULT_THRESHOLD};
use crate::pipelines::{
    self, DetectionItem, DetectorSpec, GenerationDefaults, GenerationInput, ItemError, NamedDataset,
    PipelineContext, PlannedRequest, RunRecord,
};
use crate::prompts::{self, CotVariant};
use crate::sidecar::SidecarClient;
use crate::textstats::{self, CorpusAggregation, Lexicon};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] pipelines::PipelineError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    TextStats(#[from] textstats::TextStatsError),
    #[error(transparent)]
    Embed(#[from] embed_viz::EmbedError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Pipeline(_) => "pipeline",
            CliError::Corpus(_) => "corpus",
            CliError::Eval(_) => "evaluation",
            CliError::TextStats(_) => "textstats",
            CliError::Embed(_) => "embedding",
            CliError::Gateway(_) => "gateway",
            CliError::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionDefaults {
    pub model: String,
    pub models: Vec<String>,
    pub threshold: u8,
    pub denominator_policy: DenominatorPolicy,
}

impl Default for DetectionDefaults {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            models: vec!["gpt-3.5-turbo".into(), "gpt-4".into()],
            threshold: DEFAULT_THRESHOLD,
            denominator_policy: DenominatorPolicy::ParsedOnly,
        }
    }
}

/// Everything a command may need. API keys are never part of it; the gateway
/// reads the key from the environment variable it names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gateway: GatewayConfig,
    pub sidecar_url: Option<String>,
    pub datasets: BTreeMap<String, PathBuf>,
    pub generation: GenerationDefaults,
    pub detection: DetectionDefaults,
    pub seed: u64,
    pub run_root: PathBuf,
    pub refusal_phrases: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub tsne: TsneParams,
    pub overlap_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gateway: GatewayConfig::default(),
            sidecar_url: None,
            datasets: BTreeMap::new(),
            generation: GenerationDefaults::default(),
            detection: DetectionDefaults::default(),
            seed: 0,
            run_root: PathBuf::from("runs"),
            refusal_phrases: None,
            lexicon: None,
            tsne: TsneParams::default(),
            overlap_k: 10,
        }
    }
}

fn mentions_secret(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Object(m) => m
            .iter()
            .any(|(k, v)| matches!(k.to_ascii_lowercase().as_str(), "api_key" | "apikey") || mentions_secret(v)),
        serde_json::Value::Array(a) => a.iter().any(mentions_secret),
        _ => false,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {} is not JSON: {e}", path.display())))?;
        if mentions_secret(&value) {
            return Err(CliError::Config(
                "API keys do not belong in the config; set the environment variable named by gateway.api_key_env_name"
                    .into(),
            ));
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes"))
    }

    fn validate(&self) -> Result<(), CliError> {
        self.gateway.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(dir) = &self.gateway.replay_dir {
            if self.gateway.backend == crate::gateway::BackendKind::Replay && !dir.is_dir() {
                return Err(CliError::Config(format!("replay_dir {} does not exist", dir.display())));
            }
        }
        for (name, path) in &self.datasets {
            if !path.exists() {
                return Err(CliError::Config(format!("dataset {name}: {} does not exist", path.display())));
            }
        }
        for path in self.refusal_phrases.iter().chain(&self.lexicon) {
            if !path.exists() {
                return Err(CliError::Config(format!("{} does not exist", path.display())));
            }
        }
        if !(1..=100).contains(&self.detection.threshold) {
            return Err(CliError::Config("detection.threshold must be in 1..=100".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "disinfo", version, about = "Generate and detect LLM-written disinformation")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Render prompts and count requests; no network.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Write into this directory instead of a fresh timestamped one.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Overrides `run_root` from the config.
    #[arg(long, global = true)]
    pub run_root: Option<PathBuf>,
    /// Overrides `gateway.replay_dir` and switches to the replay backend.
    #[arg(long, global = true)]
    pub replay_dir: Option<PathBuf>,
    /// Overrides `sidecar_url`.
    #[arg(long, global = true)]
    pub sidecar_url: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a human-written CSV into a JSONL dataset.
    Ingest(IngestArgs),
    /// Produce a generated dataset with one of the three generation prompts.
    Generate(GenerateArgs),
    /// Run one detector over a dataset and report its misclassification rate.
    Detect(DetectArgs),
    /// Run the CoT ablation grid over several datasets and models.
    Ablate(AblateArgs),
    /// Compare a generated corpus with its human source: lexicon profile and t-SNE overlap.
    Validate(ValidateArgs),
    /// Render a report from stored run records.
    Report(ReportArgs),
    /// Print the prompt catalog.
    Catalog(CatalogArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Fake,
    True,
}

impl From<LabelArg> for Label {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Fake => Label::Fake,
            LabelArg::True => Label::True,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, value_enum)]
    pub label: LabelArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Ignore the subject column instead of mapping it to topics.
    #[arg(long)]
    pub ignore_topics: bool,
    /// Keep a seeded sample of this many articles.
    #[arg(long)]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKindArg {
    Standard,
    Mixture,
    Cot,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: GenKindArg,
    /// Fakes for standard and mixture, true articles for cot. A path or a config dataset name.
    #[arg(long = "in")]
    pub input: String,
    /// True articles for mixture.
    #[arg(long)]
    pub true_in: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Cap on the number of inputs (mixture: pairs).
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DetectorArg {
    Slm,
    Std,
    StdExpl,
    Cot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupArg {
    Topic,
    Outlet,
    ModelVariant,
    Dataset,
}

impl From<GroupArg> for GroupKey {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Topic => GroupKey::Topic,
            GroupArg::Outlet => GroupKey::Outlet,
            GroupArg::ModelVariant => GroupKey::ModelVariant,
            GroupArg::Dataset => GroupKey::Dataset,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    ParsedOnly,
    All,
}

impl From<PolicyArg> for DenominatorPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::ParsedOnly => DenominatorPolicy::ParsedOnly,
            PolicyArg::All => DenominatorPolicy::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub detector: DetectorArg,
    /// CoT variant: w/o_person, w/o_place, w/o_time, w/o_event, all_binary, all_scale.
    #[arg(long, default_value = "all_binary")]
    pub variant: String,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "in")]
    pub input: String,
    /// Dataset name recorded on every run record; defaults to the input name.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value = "runs.jsonl")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,
    #[arg(long, value_enum)]
    pub group_by: Option<GroupArg>,
    #[arg(long)]
    pub threshold: Option<u8>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// `name=path` or a config dataset name; repeatable.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<String>,
    /// Repeatable; defaults to `detection.models`.
    #[arg(long)]
    pub model: Vec<String>,
    /// Comma-separated variants; defaults to all six.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[arg(long, default_value = "grid.jsonl")]
    pub out: PathBuf,
    #[arg(long)]
    pub threshold: Option<u8>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Human-written articles (JSONL).
    #[arg(long)]
    pub human: String,
    /// Generated articles (JSONL).
    #[arg(long)]
    pub generated: String,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Neighbourhood size for the overlap score.
    #[arg(long)]
    pub k: Option<usize>,
    /// Embed through the gateway instead of the offline hashed embedding.
    #[arg(long)]
    pub gateway_embeddings: bool,
    /// Cap per corpus on the number of projected articles.
    #[arg(long, default_value_t = 500)]
    pub max_points: usize,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    TokenWeighted,
    MeanOfTexts,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Records of a single detector run.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub runs: Option<PathBuf>,
    /// Records of an ablation grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,
    #[arg(long, value_enum)]
    pub group_by: Option<GroupArg>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub json: bool,
}

/// Outcome of a successful command.
#[derive(Debug, Default)]
pub struct Completed {
    pub run_dir: Option<PathBuf>,
    pub errors: usize,
    pub error_log: Option<PathBuf>,
}

struct Env {
    config: RunConfig,
    config_digest: String,
    dry_run: bool,
    run_dir: Option<PathBuf>,
    pinned_run_dir: Option<PathBuf>,
}

impl Env {
    fn run_dir(&mut self) -> Result<PathBuf, CliError> {
        if let Some(d) = &self.run_dir {
            return Ok(d.clone());
        }
        let dir = match &self.pinned_run_dir {
            Some(d) => d.clone(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
                self.config.run_root.join(format!("{stamp}-{}", &self.config_digest[..12]))
            }
        };
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        self.run_dir = Some(dir.clone());
        Ok(dir)
    }

    fn output(&mut self, name: &Path) -> Result<PathBuf, CliError> {
        if name.is_absolute() {
            return Ok(name.to_path_buf());
        }
        Ok(self.run_dir()?.join(name))
    }

    fn write(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.output(Path::new(name))?;
        std::fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn resolve(&self, name_or_path: &str) -> Result<PathBuf, CliError> {
        if let Some(p) = self.config.datasets.get(name_or_path) {
            return Ok(p.clone());
        }
        let p = PathBuf::from(name_or_path);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Config(format!("{name_or_path}: no such file or configured dataset")))
        }
    }

    fn gateway(&self) -> Result<Gateway, CliError> {
        Gateway::new(self.config.gateway.clone()).map_err(|e| CliError::Config(e.to_string()))
    }

    fn refusals(&self) -> Result<RefusalMatcher, CliError> {
        match &self.config.refusal_phrases {
            Some(p) => RefusalMatcher::with_file(p)
                .map_err(|e| CliError::Config(format!("refusal phrases {}: {e}", p.display()))),
            None => Ok(RefusalMatcher::default()),
        }
    }

    fn record_invocation(&mut self, command: &str) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(&json!({
            "command": command,
            "config_digest": self.config_digest,
            "started_at": chrono::Utc::now().to_rfc3339(),
            "config": self.config,
        }))
        .expect("serializes");
        self.write(&format!("{command}.invocation.json"), &(body + "\n"))?;
        Ok(())
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn read_news(path: &Path) -> Result<Vec<NewsArticle>, CliError> {
    Ok(corpus::read_jsonl(path)?)
}

/// Items of either dataset kind; the manifest (when present) decides which.
pub fn load_detection_items(path: &Path) -> Result<Vec<DetectionItem>, CliError> {
    let kind = corpus::read_manifest(path)?.map(|m| m.kind);
    match kind {
        Some(DatasetKind::Human) => Ok(read_news(path)?.iter().map(DetectionItem::from).collect()),
        Some(DatasetKind::Generated) => Ok(corpus::read_jsonl::<GeneratedArticle>(path)?
            .iter()
            .map(DetectionItem::from)
            .collect()),
        Some(DatasetKind::Runs) => Err(CliError::Config(format!("{} holds run records", path.display()))),
        None => match corpus::read_jsonl_lines::<GeneratedArticle>(path) {
            Ok(g) => Ok(g.iter().map(DetectionItem::from).collect()),
            Err(_) => Ok(corpus::read_jsonl_lines::<NewsArticle>(path)?
                .iter()
                .map(DetectionItem::from)
                .collect()),
        },
    }
}

fn parse_variant(s: &str) -> Result<CotVariant, CliError> {
    CotVariant::parse(s).ok_or_else(|| CliError::Config(format!("unknown CoT variant {s:?}")))
}

fn write_plan(env: &mut Env, name: &str, plan: &[PlannedRequest], errors: &[ItemError]) -> Result<Completed, CliError> {
    let mut body = String::new();
    for p in plan {
        body.push_str(&serde_json::to_string(p).expect("serializes"));
        body.push('\n');
    }
    let path = env.write(name, &body)?;
    let distinct: std::collections::BTreeSet<&str> = plan.iter().map(|p| p.request_digest.as_str()).collect();
    let missing = match (&env.config.gateway.backend, &env.config.gateway.replay_dir) {
        (crate::gateway::BackendKind::Replay, Some(dir)) => plan
            .iter()
            .filter(|p| p.kind_tag != "slm" && !dir.join(format!("{}.json", p.request_digest)).exists())
            .count(),
        _ => 0,
    };
    println!(
        "dry run: {} requests ({} distinct), {} render errors, {} without replay fixture; prompts in {}",
        plan.len(),
        distinct.len(),
        errors.len(),
        missing,
        path.display()
    );
    Ok(Completed {
        run_dir: env.run_dir.clone(),
        errors: errors.len(),
        error_log: None,
    })
}

fn finish(env: &Env, errors: usize, error_log: PathBuf) -> Completed {
    Completed {
        run_dir: env.run_dir.clone(),
        errors,
        error_log: Some(error_log),
    }
}

fn cmd_ingest(env: &mut Env, a: &IngestArgs) -> Result<Completed, CliError> {
    let policy = if a.ignore_topics {
        TopicColumnPolicy::Ignore
    } else {
        TopicColumnPolicy::FromSubject
    };
    let outcome = corpus::ingest_human_csv(&a.csv, a.label.into(), policy)?;
    let mut articles = outcome.articles;
    if let Some(n) = a.sample {
        articles = corpus::sample(&articles, n, env.config.seed)?;
    }
    if env.dry_run {
        println!("dry run: would write {} articles ({} empty rows skipped)", articles.len(), outcome.skipped_empty);
        return Ok(Completed::default());
    }
    let out = env.output(&a.out)?;
    let manifest = corpus::write_jsonl(&articles, &out)?;
    println!(
        "wrote {} articles to {} ({} empty rows skipped)",
        manifest.record_count,
        out.display(),
        outcome.skipped_empty
    );
    Ok(Completed {
        run_dir: env.run_dir.clone(),
        ..Completed::default()
    })
}

fn cmd_generate(env: &mut Env, a: &GenerateArgs) -> Result<Completed, CliError> {
    let mut defaults = env.config.generation.clone();
    if let Some(m) = &a.model {
        defaults.model_name = m.clone();
    }
    let limit = a.limit.unwrap_or(usize::MAX);
    let primary = read_news(&env.resolve(&a.input)?)?;
    let input = match a.kind {
        GenKindArg::Standard => GenerationInput::Standard(primary.into_iter().take(limit).collect()),
        GenKindArg::Cot => GenerationInput::Cot(primary.into_iter().take(limit).collect()),
        GenKindArg::Mixture => {
            let trues_path = a
                .true_in
                .as_deref()
                .ok_or_else(|| CliError::Config("mixture generation needs --true-in".into()))?;
            let trues = read_news(&env.resolve(trues_path)?)?;
            GenerationInput::Mixture(pipelines::pair_for_mixture(&primary, &trues, limit, env.config.seed))
        }
    };
    if env.dry_run {
        let (plan, errors) = pipelines::plan_generation(&input, &defaults);
        return write_plan(env, "dry_run_prompts.jsonl", &plan, &errors);
    }
    env.record_invocation("generate")?;
    let gateway = env.gateway()?;
    let ctx = PipelineContext {
        refusals: env.refusals()?,
        ..PipelineContext::with_gateway(&gateway)
    };
    let out = env.output(&a.out)?;
    let run = pipelines::generate_to_file(&ctx, input, &defaults, &out)?;
    println!(
        "wrote {} generated articles to {} ({} errors, {} warnings)",
        run.articles.len(),
        out.display(),
        run.errors.len(),
        run.warnings.len()
    );
    Ok(finish(env, run.errors.len(), pipelines::error_log_path(&out)))
}

fn detector_spec(env: &Env, a: &DetectArgs) -> Result<DetectorSpec, CliError> {
    let model = a.model.clone().unwrap_or_else(|| env.config.detection.model.clone());
    let spec = match a.detector {
        DetectorArg::Slm => DetectorSpec::sidecar(),
        DetectorArg::Std => DetectorSpec::llm_standard(model, false),
        DetectorArg::StdExpl => DetectorSpec::llm_standard(model, true),
        DetectorArg::Cot => DetectorSpec::llm_cot(model, parse_variant(&a.variant)?),
    };
    Ok(spec.with_threshold(a.threshold.unwrap_or(env.config.detection.threshold)))
}

fn cmd_detect(env: &mut Env, a: &DetectArgs) -> Result<Completed, CliError> {
    let spec = detector_spec(env, a)?;
    let path = env.resolve(&a.input)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        if env.config.datasets.contains_key(&a.input) {
            a.input.clone()
        } else {
            stem_of(&path)
        }
    });
    let items = load_detection_items(&path)?;
    if env.dry_run {
        let (plan, errors) = pipelines::plan_detection(&items, &spec);
        return write_plan(env, "dry_run_prompts.jsonl", &plan, &errors);
    }
    env.record_invocation("detect")?;
    let sidecar = env.config.sidecar_url.as_deref().map(SidecarClient::new);
    let gateway = match spec.kind {
        pipelines::DetectorKind::SlmSidecar => None,
        _ => Some(env.gateway()?),
    };
    let ctx = PipelineContext {
        gateway: gateway.as_ref(),
        sidecar: sidecar.as_ref(),
        refusals: env.refusals()?,
    };
    let out = env.output(&a.out)?;
    let run = pipelines::detect_to_file(&ctx, &items, &spec, &dataset, &out)?;
    let report = evaluation::evaluate(
        &run.records,
        env.config.detection.denominator_policy,
        a.group_by.map(Into::into),
    )?;
    let format: ReportFormat = a.format.into();
    let body = evaluation::render_report(&report, format);
    let report_path = env.write(&format!("report.{}", format.extension()), &body)?;
    print!("{body}");
    println!("records: {}, report: {}", out.display(), report_path.display());
    Ok(finish(env, run.errors.len(), pipelines::error_log_path(&out)))
}

fn named_datasets(env: &Env, inputs: &[String]) -> Result<Vec<NamedDataset>, CliError> {
    inputs
        .iter()
        .map(|spec| {
            let (name, path) = match spec.split_once('=') {
                Some((n, p)) => (n.to_string(), env.resolve(p)?),
                None => {
                    let p = env.resolve(spec)?;
                    let name = if env.config.datasets.contains_key(spec) {
                        spec.clone()
                    } else {
                        stem_of(&p)
                    };
                    (name, p)
                }
            };
            Ok(NamedDataset {
                name,
                items: load_detection_items(&path)?,
            })
        })
        .collect()
}

fn cmd_ablate(env: &mut Env, a: &AblateArgs) -> Result<Completed, CliError> {
    let datasets = named_datasets(env, &a.inputs)?;
    let models = if a.model.is_empty() {
        env.config.detection.models.clone()
    } else {
        a.model.clone()
    };
    if models.is_empty() {
        return Err(CliError::Config("no models given".into()));
    }
    let variants = if a.variants.is_empty() {
        CotVariant::ALL.to_vec()
    } else {
        a.variants.iter().map(|v| parse_variant(v)).collect::<Result<_, _>>()?
    };
    let threshold = a.threshold.unwrap_or(env.config.detection.threshold);
    if env.dry_run {
        let mut plan = Vec::new();
        let mut errors = Vec::new();
        for m in &models {
            for v in &variants {
                for d in &datasets {
                    let (p, e) = pipelines::plan_detection(&d.items, &DetectorSpec::llm_cot(m.clone(), *v));
                    plan.extend(p);
                    errors.extend(e);
                }
            }
        }
        return write_plan(env, "dry_run_prompts.jsonl", &plan, &errors);
    }
    env.record_invocation("ablate")?;
    let gateway = env.gateway()?;
    let ctx = PipelineContext {
        refusals: env.refusals()?,
        ..PipelineContext::with_gateway(&gateway)
    };
    let out = env.output(&a.out)?;
    let run = pipelines::ablation_grid_to_file(&ctx, &datasets, &models, &variants, threshold, &out)?;
    let table = evaluation::grid_table(&run.records, env.config.detection.denominator_policy)?;
    let body = table.to_markdown();
    let report_path = env.write("report.md", &body)?;
    print!("{body}");
    println!("records: {}, report: {}", out.display(), report_path.display());
    Ok(finish(env, run.errors.len(), pipelines::error_log_path(&out)))
}

fn cmd_report(env: &mut Env, a: &ReportArgs) -> Result<Completed, CliError> {
    let policy = a.policy.map_or(env.config.detection.denominator_policy, Into::into);
    let format: ReportFormat = a.format.into();
    let body = match (&a.runs, &a.grid) {
        (_, Some(grid)) => {
            let records: Vec<RunRecord> = corpus::read_jsonl(grid)?;
            let table = evaluation::grid_table(&records, policy)?;
            match format {
                ReportFormat::Markdown => table.to_markdown(),
                ReportFormat::Json => serde_json::to_string_pretty(&table).expect("serializes") + "\n",
                ReportFormat::Csv => table.to_csv(),
            }
        }
        (Some(runs), None) => {
            let records: Vec<RunRecord> = corpus::read_jsonl(runs)?;
            let report = evaluation::evaluate(&records, policy, a.group_by.map(Into::into))?;
            evaluation::render_report(&report, format)
        }
        (None, None) => return Err(CliError::Config("report needs --runs or --grid".into())),
    };
    print!("{body}");
    if !env.dry_run {
        env.write(&format!("report.{}", format.extension()), &body)?;
    }
    Ok(Completed {
        run_dir: env.run_dir.clone(),
        ..Completed::default()
    })
}

fn cap<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>, CliError> {
    if items.len() <= n {
        Ok(items.to_vec())
    } else {
        Ok(corpus::sample(items, n, seed)?)
    }
}

fn cmd_validate(env: &mut Env, a: &ValidateArgs) -> Result<Completed, CliError> {
    let human: Vec<String> = read_news(&env.resolve(&a.human)?)?
        .into_iter()
        .filter(|x| x.label == Label::Fake)
        .map(|x| x.content)
        .collect();
    let generated: Vec<String> = corpus::read_jsonl::<GeneratedArticle>(&env.resolve(&a.generated)?)?
        .into_iter()
        .map(|x| x.content)
        .collect();
    if human.is_empty() || generated.is_empty() {
        return Err(CliError::Config("validate needs fake human articles and generated articles".into()));
    }
    let lexicon = match a.lexicon.as_ref().or(env.config.lexicon.as_ref()) {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::demo(),
    };
    let aggregation = match a.aggregation {
        Some(AggregationArg::MeanOfTexts) => CorpusAggregation::MeanOfTexts,
        _ => CorpusAggregation::TokenWeighted,
    };
    let hp = textstats::profile_corpus(&human, &lexicon, aggregation)?;
    let gp = textstats::profile_corpus(&generated, &lexicon, aggregation)?;
    let lexical = textstats::comparison_markdown(&lexicon, &hp, &gp);

    let h = cap(&human, a.max_points, env.config.seed)?;
    let g = cap(&generated, a.max_points, env.config.seed)?;
    let n = h.len() + g.len();
    let mut params = env.config.tsne.clone();
    if let Some(it) = a.iterations {
        params.iterations = it;
    }
    let ceiling = ((n as f64 - 1.0) / 3.0).max(1.5);
    if params.perplexity >= ceiling {
        log::warn!("perplexity {} lowered to {:.2} for {n} points", params.perplexity, ceiling - 0.01);
        params.perplexity = ceiling - 0.01;
    }
    let k = a.k.unwrap_or(env.config.overlap_k).min(n.saturating_sub(1)).max(1);
    if env.dry_run {
        println!(
            "dry run: would profile {} + {} texts and project {n} points (k = {k})",
            human.len(),
            generated.len()
        );
        return Ok(Completed::default());
    }
    env.record_invocation("validate")?;
    let gateway = if a.gateway_embeddings { Some(env.gateway()?) } else { None };
    let matrix = embed_viz::embed_corpora(gateway.as_ref(), &h, &g)?;
    let proj = embed_viz::tsne_fit(&matrix, &params)?;
    let overlap = embed_viz::overlap_fraction(&proj, k)?;
    let caption = format!("t-SNE of {} human (blue) and {} generated (orange) texts, embeddings: {}", h.len(), g.len(), proj.provider);
    let csv_path = env.output(Path::new("projection.csv"))?;
    let svg_path = env.output(Path::new("projection.svg"))?;
    embed_viz::write_projection(&proj, &csv_path, &svg_path, &caption)?;
    let summary = format!(
        "## Lexicon profile ({} categories)\n\n{lexical}\n## Embedding overlap\n\nProvider: {}\nPoints: {n}, k = {k}\nOverlap: {:.2}%\nFinal KL: {:.4}\n",
        lexicon.len(),
        proj.provider,
        overlap * 100.0,
        proj.kl_history.last().copied().unwrap_or(f64::NAN)
    );
    env.write("validate.md", &summary)?;
    let json_body = serde_json::to_string_pretty(&json!({
        "human_profile": hp,
        "generated_profile": gp,
        "percent_change": textstats::percent_change(&hp, &gp),
        "provider": proj.provider,
        "k": k,
        "overlap": overlap,
        "kl_history": proj.kl_history,
        "kl_iterations": proj.kl_iterations,
    }))
    .expect("serializes");
    env.write("validate.json", &(json_body + "\n"))?;
    print!("{summary}");
    Ok(Completed {
        run_dir: env.run_dir.clone(),
        ..Completed::default()
    })
}

fn cmd_catalog(a: &CatalogArgs) -> Result<Completed, CliError> {
    let catalog = prompts::prompt_catalog();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&catalog).expect("serializes"));
    } else {
        for entry in &catalog {
            println!("== {} ==\n{}\n", entry.kind_tag, entry.skeleton);
        }
    }
    Ok(Completed::default())
}

fn build_env(cli: &Cli) -> Result<Env, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.replay_dir {
        config.gateway.backend = crate::gateway::BackendKind::Replay;
        config.gateway.replay_dir = Some(dir.clone());
    }
    if let Some(url) = &cli.sidecar_url {
        config.sidecar_url = Some(url.clone());
    }
    if let Some(root) = &cli.run_root {
        config.run_root = root.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(Env {
        config_digest: config.digest(),
        config,
        dry_run: cli.dry_run,
        run_dir: None,
        pinned_run_dir: cli.run_dir.clone(),
    })
}

pub fn execute(cli: &Cli) -> Result<Completed, CliError> {
    if let Command::Catalog(a) = &cli.command {
        return cmd_catalog(a);
    }
    let mut env = build_env(cli)?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&mut env, a),
        Command::Generate(a) => cmd_generate(&mut env, a),
        Command::Detect(a) => cmd_detect(&mut env, a),
        Command::Ablate(a) => cmd_ablate(&mut env, a),
        Command::Validate(a) => cmd_validate(&mut env, a),
        Command::Report(a) => cmd_report(&mut env, a),
        Command::Catalog(_) => unreachable!("handled above"),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("{}", json!({"status": "error", "exit_code": code, "kind": "usage", "message": e.kind().to_string()}));
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(done) if done.errors > 0 => {
            let log = done.error_log.as_ref().map(|p| p.display().to_string());
            eprintln!("finished with {} item errors; see {}", done.errors, log.as_deref().unwrap_or("the error log"));
            eprintln!(
                "{}",
                json!({"status": "partial", "exit_code": EXIT_PARTIAL, "errors": done.errors, "error_log": log,
                       "run_dir": done.run_dir.map(|d| d.display().to_string())})
            );
            EXIT_PARTIAL
        }
        Ok(done) => {
            if let Some(dir) = done.run_dir {
                eprintln!("run directory: {}", dir.display());
            }
            EXIT_OK
        }
        Err(e) => {
            let code = EXIT_CONFIG;
            eprintln!("error: {e}");
            eprintln!("{}", json!({"status": "error", "exit_code": code, "kind": e.kind(), "message": e.to_string()}));
            code
        }
    }
}
