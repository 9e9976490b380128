//! End-to-end runs: dataset generation, batch detection and ablation grids.
//!
//! A run never dies on one bad article. Per-item failures land in an error log
//! (JSONL next to the output) and, for detection, as `Unparseable`/`Refusal`
//! predictions, so `|records| == |articles|` always holds. Only configuration
//! problems abort a run.
//!
//! Work fans out over up to `max_in_flight` threads; outputs are reassembled
//! in input order, which keeps replayed runs byte-for-byte reproducible.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    self, CorpusError, DatasetKind, GenKind, GeneratedArticle, Label, NewsArticle, Outlet, Record, Topic,
};
use crate::gateway::{
    cosine_similarity, fallback_embed, ChatRequest, FinishReason, Gateway, GatewayError, DETECTION_TEMPERATURE,
    GENERATION_TEMPERATURE,
};
use crate::parsing::{self, ParseError, RefusalMatcher, DEFAULT_THRESHOLD};
use crate::prompts::{
    self, Ablation, CotVariant, DetectPromptKind, DetectPromptVars, GenPromptVars, OutputMode,
};
use crate::sidecar::{SidecarClient, INPUT_WORD_LIMIT};

/// Cosine similarity above which a mixture output counts as two stories pasted
/// together.
pub const STACKED_CONCAT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    SlmSidecar,
    LlmStdNoExpl,
    LlmStdWithExpl,
    LlmCot,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub model_name: Option<String>,
    pub ablation: Ablation,
    pub output_mode: OutputMode,
    pub threshold: u8,
}

impl DetectorSpec {
    pub fn sidecar() -> Self {
        Self {
            kind: DetectorKind::SlmSidecar,
            model_name: None,
            ablation: Ablation::None,
            output_mode: OutputMode::Binary,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn llm_standard(model: impl Into<String>, with_explanation: bool) -> Self {
        Self {
            kind: if with_explanation {
                DetectorKind::LlmStdWithExpl
            } else {
                DetectorKind::LlmStdNoExpl
            },
            model_name: Some(model.into()),
            ablation: Ablation::None,
            output_mode: OutputMode::Binary,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn llm_cot(model: impl Into<String>, variant: CotVariant) -> Self {
        Self {
            kind: DetectorKind::LlmCot,
            model_name: Some(model.into()),
            ablation: variant.ablation(),
            output_mode: variant.output_mode(),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: u8) -> Self {
        self.threshold = threshold;
        self
    }

    /// Sidecar and standard detectors ignore ablation and output mode.
    pub fn normalized(mut self) -> Self {
        if self.kind != DetectorKind::LlmCot {
            self.ablation = Ablation::None;
            self.output_mode = OutputMode::Binary;
        }
        self
    }

    pub fn variant(&self) -> Option<CotVariant> {
        (self.kind == DetectorKind::LlmCot)
            .then(|| CotVariant::from_parts(self.ablation, self.output_mode))
            .flatten()
    }

    /// Short row label: `slm`, `w/o explanation`, `w/ explanation` or the CoT
    /// variant label.
    pub fn label(&self) -> String {
        match self.kind {
            DetectorKind::SlmSidecar => "slm".into(),
            DetectorKind::LlmStdNoExpl => "w/o explanation".into(),
            DetectorKind::LlmStdWithExpl => "w/ explanation".into(),
            DetectorKind::LlmCot => match self.variant() {
                Some(v) => v.label().into(),
                None => format!("cot {:?} {:?}", self.ablation, self.output_mode).to_lowercase(),
            },
        }
    }

    fn effective_model(&self) -> String {
        self.model_name.clone().unwrap_or_else(|| "sidecar".into())
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.model_name {
            Some(m) => write!(f, "{m} ({})", self.label()),
            None => f.write_str(&self.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicted {
    Fake,
    True,
    Unparseable,
    Refusal,
}

impl From<Label> for Predicted {
    fn from(l: Label) -> Self {
        match l {
            Label::Fake => Predicted::Fake,
            Label::True => Predicted::True,
        }
    }
}

/// One detector decision on one article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub article_id: String,
    pub dataset: String,
    pub detector: DetectorSpec,
    pub predicted: Predicted,
    pub truth: Label,
    pub confidence: Option<u8>,
    pub outlet: Option<Outlet>,
    pub topic: Option<Topic>,
    pub model_name: String,
    pub duration_ms: u64,
}

impl RunRecord {
    pub fn parsed(&self) -> bool {
        matches!(self.predicted, Predicted::Fake | Predicted::True)
    }

    /// Identity used for resuming: one record per (dataset, detector, article).
    pub fn key(&self) -> (String, DetectorSpec, String) {
        (self.dataset.clone(), self.detector.clone(), self.article_id.clone())
    }
}

impl Record for RunRecord {
    const KIND: DatasetKind = DatasetKind::Runs;

    fn record_id(&self) -> &str {
        &self.article_id
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(c) = self.confidence {
            if !(1..=100).contains(&c) {
                return Err(format!("confidence {c} outside 1..=100"));
            }
        }
        Ok(())
    }
}

/// A labelled article as seen by a detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionItem {
    pub id: String,
    pub content: String,
    pub truth: Label,
    pub topic: Option<Topic>,
    pub outlet: Option<Outlet>,
}

impl From<&NewsArticle> for DetectionItem {
    fn from(a: &NewsArticle) -> Self {
        Self {
            id: a.id.clone(),
            content: a.content.clone(),
            truth: a.label,
            topic: Some(a.topic),
            outlet: None,
        }
    }
}

impl From<&GeneratedArticle> for DetectionItem {
    fn from(a: &GeneratedArticle) -> Self {
        Self {
            id: a.id.clone(),
            content: a.content.clone(),
            truth: a.label,
            topic: a.topic,
            outlet: a.outlet,
        }
    }
}

/// One per-item failure or warning, written to the error log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemError {
    pub item_id: String,
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl ItemError {
    fn new(item_id: &str, stage: &str, kind: &str, message: impl fmt::Display) -> Self {
        Self {
            item_id: item_id.to_string(),
            stage: stage.to_string(),
            kind: kind.to_string(),
            message: message.to_string(),
        }
    }
}

fn gateway_error_kind(e: &GatewayError) -> &'static str {
    match e {
        GatewayError::RateLimited { .. } => "RateLimited",
        GatewayError::HttpStatus { .. } => "HttpStatus",
        GatewayError::Transport(_) => "Transport",
        GatewayError::FixtureMissing(_) => "FixtureMissing",
        GatewayError::Refusal => "Refusal",
        GatewayError::InvalidConfig(_) => "InvalidConfig",
        GatewayError::InvalidResponse(_) => "InvalidResponse",
        GatewayError::IoFailure { .. } => "IoFailure",
        GatewayError::EmptyInput => "EmptyInput",
    }
}

fn parse_error_kind(e: &ParseError) -> &'static str {
    match e {
        ParseError::Unparseable(_) => "Unparseable",
        ParseError::Refusal => "Refusal",
        ParseError::OutOfRange(_) => "OutOfRange",
        ParseError::SectionMissing(_) => "SectionMissing",
        ParseError::OutletVersionMissing(_) => "OutletVersionMissing",
    }
}

/// What a pipeline can talk to.
#[derive(Debug, Clone)]
pub struct PipelineContext<'a> {
    pub gateway: Option<&'a Gateway>,
    pub sidecar: Option<&'a SidecarClient>,
    pub refusals: RefusalMatcher,
}

impl<'a> PipelineContext<'a> {
    pub fn with_gateway(gateway: &'a Gateway) -> Self {
        Self {
            gateway: Some(gateway),
            sidecar: None,
            refusals: RefusalMatcher::default(),
        }
    }

    pub fn with_sidecar(mut self, sidecar: &'a SidecarClient) -> Self {
        self.sidecar = Some(sidecar);
        self
    }

    fn workers(&self) -> usize {
        self.gateway.map_or(4, |g| g.config().max_in_flight).max(1)
    }

    fn require_gateway(&self) -> Result<&'a Gateway, PipelineError> {
        self.gateway
            .ok_or_else(|| PipelineError::Config("this pipeline needs an LLM gateway".into()))
    }
}

/// Applies `f` to every item on up to `workers` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.is_empty() {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationDefaults {
    pub model_name: String,
    pub keywords: Vec<String>,
    pub tone: String,
    pub role: String,
    /// Role phrase for the CoT prompt, which addresses several journalists.
    pub cot_role: String,
    pub fake_event: String,
    pub outlets: Vec<Outlet>,
    pub temperature: f64,
}

impl Default for GenerationDefaults {
    fn default() -> Self {
        Self {
            model_name: "gpt-3.5-turbo".into(),
            keywords: vec!["study".into(), "evidence".into(), "fact".into()],
            tone: "formal".into(),
            role: "journalist".into(),
            cot_role: "journalists".into(),
            fake_event: "2028 U.S. presidential election".into(),
            outlets: Outlet::ALL.to_vec(),
            temperature: GENERATION_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationRun {
    pub articles: Vec<GeneratedArticle>,
    pub errors: Vec<ItemError>,
    /// Non-fatal findings such as stacked-concatenation suspects.
    pub warnings: Vec<ItemError>,
}

enum ItemOutcome<T> {
    Ok(Vec<T>, Vec<ItemError>),
    Failed(ItemError),
}

fn collect_generation(outcomes: Vec<ItemOutcome<GeneratedArticle>>) -> GenerationRun {
    let mut run = GenerationRun::default();
    for outcome in outcomes {
        match outcome {
            ItemOutcome::Ok(mut articles, mut warnings) => {
                run.articles.append(&mut articles);
                run.warnings.append(&mut warnings);
            }
            ItemOutcome::Failed(e) => run.errors.push(e),
        }
    }
    run
}

fn complete_text(gateway: &Gateway, model: &str, prompt: &str, temperature: f64) -> Result<String, GatewayError> {
    let req = ChatRequest::user(model, prompt, temperature);
    Ok(gateway.complete_content(&req)?.content.trim().to_string())
}

/// Standard prompt over human-written fakes: one output per successful item.
pub fn generate_standard(
    ctx: &PipelineContext<'_>,
    fakes: &[NewsArticle],
    defaults: &GenerationDefaults,
) -> Result<GenerationRun, PipelineError> {
    let gateway = ctx.require_gateway()?;
    if let Some(a) = fakes.iter().find(|a| a.label != Label::Fake) {
        return Err(PipelineError::Config(format!("standard generation input {} is not fake", a.id)));
    }
    let keywords: Vec<&str> = defaults.keywords.iter().map(String::as_str).collect();
    let outcomes = par_map(fakes, ctx.workers(), |fake| {
        let vars = GenPromptVars::standard(fake.content.clone(), &keywords, &defaults.tone, &defaults.role);
        let prompt = match prompts::render_generation(&vars) {
            Ok(p) => p,
            Err(e) => return ItemOutcome::Failed(ItemError::new(&fake.id, "render", "MissingVariable", e)),
        };
        match complete_text(gateway, &defaults.model_name, &prompt.text, defaults.temperature) {
            Ok(content) if !content.is_empty() => ItemOutcome::Ok(
                vec![GeneratedArticle {
                    id: format!("std-{}", fake.id),
                    parent_fake_id: Some(fake.id.clone()),
                    parent_true_id: None,
                    content,
                    gen_kind: GenKind::Standard,
                    outlet: None,
                    model_name: defaults.model_name.clone(),
                    prompt_digest: prompt.digest,
                    label: Label::Fake,
                    topic: Some(fake.topic),
                }],
                Vec::new(),
            ),
            Ok(_) => ItemOutcome::Failed(ItemError::new(&fake.id, "complete", "EmptyCompletion", "empty output")),
            Err(e) => ItemOutcome::Failed(ItemError::new(&fake.id, "complete", gateway_error_kind(&e), e)),
        }
    });
    Ok(collect_generation(outcomes))
}

/// Pairs fakes with trues by position after independent seeded shuffles.
pub fn pair_for_mixture(
    fakes: &[NewsArticle],
    trues: &[NewsArticle],
    n: usize,
    seed: u64,
) -> Vec<(NewsArticle, NewsArticle)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<&NewsArticle> = fakes.iter().collect();
    let mut t: Vec<&NewsArticle> = trues.iter().collect();
    f.shuffle(&mut rng);
    t.shuffle(&mut rng);
    f.into_iter()
        .zip(t)
        .take(n)
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect()
}

/// The naive "stacking" a mixture output should not look like.
pub fn stacked_concatenations(fake: &str, real: &str) -> [String; 2] {
    [
        format!("{fake}. Meanwhile, {real}."),
        format!("{real}. Meanwhile, {fake}."),
    ]
}

/// Highest cosine similarity (fallback embeddings) between `output` and the
/// two stacked concatenations of its parents.
pub fn stacked_similarity(output: &str, fake: &str, real: &str) -> f64 {
    let [a, b] = stacked_concatenations(fake, real);
    let batch = fallback_embed(&[output.to_string(), a, b]);
    cosine_similarity(&batch.rows[0], &batch.rows[1]).max(cosine_similarity(&batch.rows[0], &batch.rows[2]))
}

pub fn generate_mixture(
    ctx: &PipelineContext<'_>,
    pairs: &[(NewsArticle, NewsArticle)],
    defaults: &GenerationDefaults,
) -> Result<GenerationRun, PipelineError> {
    let gateway = ctx.require_gateway()?;
    if let Some((f, t)) = pairs.iter().find(|(f, t)| f.label != Label::Fake || t.label != Label::True) {
        return Err(PipelineError::Config(format!(
            "mixture pair ({}, {}) must be (fake, true)",
            f.id, t.id
        )));
    }
    let outcomes = par_map(pairs, ctx.workers(), |(fake, real)| {
        let pair_id = format!("{}+{}", fake.id, real.id);
        let vars = GenPromptVars::mixture(fake.content.clone(), real.content.clone(), &defaults.tone, &defaults.role);
        let prompt = match prompts::render_generation(&vars) {
            Ok(p) => p,
            Err(e) => return ItemOutcome::Failed(ItemError::new(&pair_id, "render", "MissingVariable", e)),
        };
        match complete_text(gateway, &defaults.model_name, &prompt.text, defaults.temperature) {
            Ok(content) if !content.is_empty() => {
                let id = format!("mix-{}-{}", fake.id, real.id);
                let mut warnings = Vec::new();
                let sim = stacked_similarity(&content, &fake.content, &real.content);
                if sim > STACKED_CONCAT_THRESHOLD {
                    warnings.push(ItemError::new(
                        &id,
                        "validate",
                        "StackedConcatSuspect",
                        format!("cosine {sim:.4} to stacked concatenation"),
                    ));
                }
                ItemOutcome::Ok(
                    vec![GeneratedArticle {
                        id,
                        parent_fake_id: Some(fake.id.clone()),
                        parent_true_id: Some(real.id.clone()),
                        content,
                        gen_kind: GenKind::Mixture,
                        outlet: None,
                        model_name: defaults.model_name.clone(),
                        prompt_digest: prompt.digest,
                        label: Label::Fake,
                        topic: None,
                    }],
                    warnings,
                )
            }
            Ok(_) => ItemOutcome::Failed(ItemError::new(&pair_id, "complete", "EmptyCompletion", "empty output")),
            Err(e) => ItemOutcome::Failed(ItemError::new(&pair_id, "complete", gateway_error_kind(&e), e)),
        }
    });
    Ok(collect_generation(outcomes))
}

fn outlet_slug(o: Outlet) -> &'static str {
    match o {
        Outlet::Cnn => "cnn",
        Outlet::FoxNews => "fox",
        Outlet::Reuters => "reuters",
    }
}

/// CoT prompt over true articles: one output per requested outlet version.
/// The four steps go out as a single user message.
pub fn generate_cot(
    ctx: &PipelineContext<'_>,
    trues: &[NewsArticle],
    defaults: &GenerationDefaults,
) -> Result<GenerationRun, PipelineError> {
    let gateway = ctx.require_gateway()?;
    if defaults.outlets.is_empty() {
        return Err(PipelineError::Config("CoT generation needs at least one outlet".into()));
    }
    let unique: BTreeSet<Outlet> = defaults.outlets.iter().copied().collect();
    if unique.len() != defaults.outlets.len() {
        return Err(PipelineError::Config("duplicate outlets".into()));
    }
    if let Some(a) = trues.iter().find(|a| a.label != Label::True) {
        return Err(PipelineError::Config(format!("CoT generation input {} is not true news", a.id)));
    }
    let outlet_names: Vec<&str> = defaults.outlets.iter().map(|o| o.prompt_name()).collect();
    let outcomes = par_map(trues, ctx.workers(), |real| {
        let vars = GenPromptVars::cot(real.content.clone(), &defaults.fake_event, &defaults.cot_role, &outlet_names);
        let prompt = match prompts::render_generation(&vars) {
            Ok(p) => p,
            Err(e) => return ItemOutcome::Failed(ItemError::new(&real.id, "render", "MissingVariable", e)),
        };
        let raw = match complete_text(gateway, &defaults.model_name, &prompt.text, defaults.temperature) {
            Ok(raw) => raw,
            Err(e) => return ItemOutcome::Failed(ItemError::new(&real.id, "complete", gateway_error_kind(&e), e)),
        };
        match parsing::parse_cot_generation(&raw, &defaults.outlets) {
            Ok(parsed) => ItemOutcome::Ok(
                defaults
                    .outlets
                    .iter()
                    .map(|outlet| GeneratedArticle {
                        id: format!("cot-{}-{}", real.id, outlet_slug(*outlet)),
                        parent_fake_id: None,
                        parent_true_id: Some(real.id.clone()),
                        content: parsed.outlet_versions[outlet].clone(),
                        gen_kind: GenKind::Cot,
                        outlet: Some(*outlet),
                        model_name: defaults.model_name.clone(),
                        prompt_digest: prompt.digest.clone(),
                        label: Label::Fake,
                        topic: None,
                    })
                    .collect(),
                Vec::new(),
            ),
            Err(e) => ItemOutcome::Failed(ItemError::new(&real.id, "parse", parse_error_kind(&e), e)),
        }
    });
    Ok(collect_generation(outcomes))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionRun {
    pub records: Vec<RunRecord>,
    pub errors: Vec<ItemError>,
}

fn detect_one(
    ctx: &PipelineContext<'_>,
    item: &DetectionItem,
    spec: &DetectorSpec,
    dataset: &str,
) -> (RunRecord, Option<ItemError>) {
    let mut record = RunRecord {
        article_id: item.id.clone(),
        dataset: dataset.to_string(),
        detector: spec.clone(),
        predicted: Predicted::Unparseable,
        truth: item.truth,
        confidence: None,
        outlet: item.outlet,
        topic: item.topic,
        model_name: spec.effective_model(),
        duration_ms: 0,
    };
    let fail = |record: RunRecord, stage: &str, kind: &str, msg: &dyn fmt::Display| {
        let err = ItemError::new(&item.id, stage, kind, msg);
        (record, Some(err))
    };

    if spec.kind == DetectorKind::SlmSidecar {
        let sidecar = ctx.sidecar.expect("checked before fan-out");
        let text = corpus::truncate_words(&item.content, INPUT_WORD_LIMIT);
        let started = Instant::now();
        let result = sidecar.classify(&text);
        record.duration_ms = started.elapsed().as_millis() as u64;
        return match result {
            Ok(resp) => {
                record.predicted = Label::from(resp.label).into();
                (record, None)
            }
            Err(e) => fail(record, "classify", "Sidecar", &e),
        };
    }

    let gateway = ctx.gateway.expect("checked before fan-out");
    let vars = match spec.kind {
        DetectorKind::LlmStdNoExpl => DetectPromptVars::standard(item.content.clone(), false),
        DetectorKind::LlmStdWithExpl => DetectPromptVars::standard(item.content.clone(), true),
        _ => DetectPromptVars::cot(item.content.clone(), spec.ablation, spec.output_mode),
    };
    let prompt = match prompts::render_detection(&vars) {
        Ok(p) => p,
        Err(e) => return fail(record, "render", "MissingVariable", &e),
    };
    let req = ChatRequest::user(spec.effective_model(), prompt.text, DETECTION_TEMPERATURE);
    let resp = match gateway.complete(&req) {
        Ok(r) => r,
        Err(e) => return fail(record, "complete", gateway_error_kind(&e), &e),
    };
    record.duration_ms = resp.latency_ms;
    if resp.finish_reason == FinishReason::ContentFilter {
        record.predicted = Predicted::Refusal;
        return fail(record, "complete", "Refusal", &"content filter");
    }
    let mode = if vars.kind == DetectPromptKind::CotDetect {
        spec.output_mode
    } else {
        OutputMode::Binary
    };
    match parsing::parse_detection(&resp.content, mode, &ctx.refusals) {
        Ok(verdict) => {
            record.confidence = verdict.confidence;
            record.predicted = parsing::verdict_to_label(&verdict, spec.threshold).into();
            (record, None)
        }
        Err(ParseError::Refusal) => {
            record.predicted = Predicted::Refusal;
            fail(record, "parse", "Refusal", &ParseError::Refusal)
        }
        Err(e) => fail(record, "parse", parse_error_kind(&e), &e),
    }
}

fn check_detector(ctx: &PipelineContext<'_>, spec: &DetectorSpec) -> Result<(), PipelineError> {
    if !(1..=100).contains(&spec.threshold) {
        return Err(PipelineError::Config(format!("threshold {} outside 1..=100", spec.threshold)));
    }
    match spec.kind {
        DetectorKind::SlmSidecar if ctx.sidecar.is_none() => {
            Err(PipelineError::Config("sidecar detector needs a sidecar_url".into()))
        }
        DetectorKind::SlmSidecar => Ok(()),
        _ if spec.model_name.is_none() => Err(PipelineError::Config("LLM detector needs a model name".into())),
        _ => ctx.require_gateway().map(|_| ()),
    }
}

/// Runs one detector over every item. Always yields exactly one record per item.
pub fn detect_batch(
    ctx: &PipelineContext<'_>,
    items: &[DetectionItem],
    spec: &DetectorSpec,
    dataset: &str,
) -> Result<DetectionRun, PipelineError> {
    let spec = spec.clone().normalized();
    check_detector(ctx, &spec)?;
    let results = par_map(items, ctx.workers(), |item| detect_one(ctx, item, &spec, dataset));
    let mut run = DetectionRun::default();
    for (record, err) in results {
        run.records.push(record);
        run.errors.extend(err);
    }
    log::info!("detect {dataset} [{spec}]: {} records, {} errors", run.records.len(), run.errors.len());
    Ok(run)
}

/// A named dataset of detection items, e.g. `d_gpt_cot`.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub items: Vec<DetectionItem>,
}

/// Every model × variant × dataset cell, each a full [`detect_batch`] run.
/// Cells run in (model, variant, dataset) order.
pub fn run_ablation_grid(
    ctx: &PipelineContext<'_>,
    datasets: &[NamedDataset],
    models: &[String],
    variants: &[CotVariant],
    threshold: u8,
) -> Result<DetectionRun, PipelineError> {
    let mut run = DetectionRun::default();
    for model in models {
        for variant in variants {
            let spec = DetectorSpec::llm_cot(model.clone(), *variant).with_threshold(threshold);
            for dataset in datasets {
                let mut cell = detect_batch(ctx, &dataset.items, &spec, &dataset.name)?;
                run.records.append(&mut cell.records);
                run.errors.append(&mut cell.errors);
            }
        }
    }
    Ok(run)
}

/// Sibling error-log path: `<dir>/<stem>.errors.jsonl`.
pub fn error_log_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.errors.jsonl"))
}

/// Sibling warning-log path: `<dir>/<stem>.warnings.jsonl`.
pub fn warning_log_path(out: &Path) -> PathBuf {
    error_log_path(out).with_extension("").with_extension("warnings.jsonl")
}

pub fn write_error_log(path: &Path, errors: &[ItemError]) -> Result<(), CorpusError> {
    let mut body = String::new();
    for e in errors {
        body.push_str(&serde_json::to_string(e).expect("serializes"));
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|source| CorpusError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

fn existing<R: Record>(out: &Path) -> Result<Vec<R>, PipelineError> {
    if out.exists() {
        Ok(corpus::read_jsonl_lines(out)?)
    } else {
        Ok(Vec::new())
    }
}

/// Resumable detection: records already present in `out` (same dataset,
/// detector and article) are kept and only missing articles are sent. The
/// file is rewritten in input order together with its manifest and error log.
pub fn detect_to_file(
    ctx: &PipelineContext<'_>,
    items: &[DetectionItem],
    spec: &DetectorSpec,
    dataset: &str,
    out: &Path,
) -> Result<DetectionRun, PipelineError> {
    let spec = spec.clone().normalized();
    let previous: Vec<RunRecord> = existing(out)?;
    let mut done: HashMap<String, RunRecord> = previous
        .into_iter()
        .filter(|r| r.dataset == dataset && r.detector == spec)
        .map(|r| (r.article_id.clone(), r))
        .collect();
    let pending: Vec<DetectionItem> = items.iter().filter(|i| !done.contains_key(&i.id)).cloned().collect();
    let fresh = detect_batch(ctx, &pending, &spec, dataset)?;
    for r in fresh.records {
        done.insert(r.article_id.clone(), r);
    }
    let records: Vec<RunRecord> = items.iter().filter_map(|i| done.remove(&i.id)).collect();
    corpus::write_jsonl(&records, out)?;
    write_error_log(&error_log_path(out), &fresh.errors)?;
    Ok(DetectionRun {
        records,
        errors: fresh.errors,
    })
}

/// Resumable grid: like [`detect_to_file`] but keyed on the full
/// (dataset, detector, article) identity across every cell.
pub fn ablation_grid_to_file(
    ctx: &PipelineContext<'_>,
    datasets: &[NamedDataset],
    models: &[String],
    variants: &[CotVariant],
    threshold: u8,
    out: &Path,
) -> Result<DetectionRun, PipelineError> {
    let previous: Vec<RunRecord> = existing(out)?;
    let mut done: HashMap<(String, DetectorSpec, String), RunRecord> =
        previous.into_iter().map(|r| (r.key(), r)).collect();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for model in models {
        for variant in variants {
            let spec = DetectorSpec::llm_cot(model.clone(), *variant).with_threshold(threshold);
            for dataset in datasets {
                let pending: Vec<DetectionItem> = dataset
                    .items
                    .iter()
                    .filter(|i| !done.contains_key(&(dataset.name.clone(), spec.clone(), i.id.clone())))
                    .cloned()
                    .collect();
                let mut fresh = detect_batch(ctx, &pending, &spec, &dataset.name)?;
                errors.append(&mut fresh.errors);
                for r in fresh.records {
                    done.insert(r.key(), r);
                }
                for item in &dataset.items {
                    if let Some(r) = done.remove(&(dataset.name.clone(), spec.clone(), item.id.clone())) {
                        records.push(r);
                    }
                }
            }
        }
    }
    corpus::write_jsonl(&records, out)?;
    write_error_log(&error_log_path(out), &errors)?;
    Ok(DetectionRun { records, errors })
}

/// Which inputs of a generation run already have outputs in `out`.
fn generated_parents(out: &Path) -> Result<(Vec<GeneratedArticle>, HashSet<String>), PipelineError> {
    let previous: Vec<GeneratedArticle> = existing(out)?;
    let parents = previous
        .iter()
        .map(|a| match a.gen_kind {
            GenKind::Standard => a.parent_fake_id.clone().unwrap_or_default(),
            GenKind::Mixture => format!(
                "{}+{}",
                a.parent_fake_id.as_deref().unwrap_or_default(),
                a.parent_true_id.as_deref().unwrap_or_default()
            ),
            GenKind::Cot => a.parent_true_id.clone().unwrap_or_default(),
        })
        .collect();
    Ok((previous, parents))
}

#[derive(Debug, Clone)]
pub enum GenerationInput {
    Standard(Vec<NewsArticle>),
    Mixture(Vec<(NewsArticle, NewsArticle)>),
    Cot(Vec<NewsArticle>),
}

/// Resumable generation into `out`: inputs whose outputs already exist are
/// skipped; new outputs are appended after the existing ones.
pub fn generate_to_file(
    ctx: &PipelineContext<'_>,
    input: GenerationInput,
    defaults: &GenerationDefaults,
    out: &Path,
) -> Result<GenerationRun, PipelineError> {
    let (mut articles, parents) = generated_parents(out)?;
    let fresh = match input {
        GenerationInput::Standard(fakes) => {
            let todo: Vec<NewsArticle> = fakes.into_iter().filter(|a| !parents.contains(&a.id)).collect();
            generate_standard(ctx, &todo, defaults)?
        }
        GenerationInput::Mixture(pairs) => {
            let todo: Vec<(NewsArticle, NewsArticle)> = pairs
                .into_iter()
                .filter(|(f, t)| !parents.contains(&format!("{}+{}", f.id, t.id)))
                .collect();
            generate_mixture(ctx, &todo, defaults)?
        }
        GenerationInput::Cot(trues) => {
            let todo: Vec<NewsArticle> = trues.into_iter().filter(|a| !parents.contains(&a.id)).collect();
            generate_cot(ctx, &todo, defaults)?
        }
    };
    articles.extend(fresh.articles.iter().cloned());
    corpus::write_jsonl(&articles, out)?;
    write_error_log(&error_log_path(out), &fresh.errors)?;
    write_error_log(&warning_log_path(out), &fresh.warnings)?;
    Ok(GenerationRun {
        articles,
        errors: fresh.errors,
        warnings: fresh.warnings,
    })
}

/// A request a run would send, computed without any network use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedRequest {
    pub item_id: String,
    pub kind_tag: String,
    pub request_digest: String,
    pub prompt: String,
}

fn planned(item_id: &str, model: &str, temperature: f64, prompt: prompts::RenderedPrompt) -> PlannedRequest {
    let req = ChatRequest::user(model, prompt.text.clone(), temperature);
    PlannedRequest {
        item_id: item_id.to_string(),
        kind_tag: prompt.kind_tag,
        request_digest: req.request_digest,
        prompt: prompt.text,
    }
}

/// Renders every generation prompt; items that fail to render are skipped
/// and returned as errors.
pub fn plan_generation(input: &GenerationInput, defaults: &GenerationDefaults) -> (Vec<PlannedRequest>, Vec<ItemError>) {
    let keywords: Vec<&str> = defaults.keywords.iter().map(String::as_str).collect();
    let outlets: Vec<&str> = defaults.outlets.iter().map(|o| o.prompt_name()).collect();
    let jobs: Vec<(String, GenPromptVars)> = match input {
        GenerationInput::Standard(fakes) => fakes
            .iter()
            .map(|a| (a.id.clone(), GenPromptVars::standard(a.content.clone(), &keywords, &defaults.tone, &defaults.role)))
            .collect(),
        GenerationInput::Mixture(pairs) => pairs
            .iter()
            .map(|(f, t)| {
                (
                    format!("{}+{}", f.id, t.id),
                    GenPromptVars::mixture(f.content.clone(), t.content.clone(), &defaults.tone, &defaults.role),
                )
            })
            .collect(),
        GenerationInput::Cot(trues) => trues
            .iter()
            .map(|a| {
                (
                    a.id.clone(),
                    GenPromptVars::cot(a.content.clone(), &defaults.fake_event, &defaults.cot_role, &outlets),
                )
            })
            .collect(),
    };
    let mut plan = Vec::new();
    let mut errors = Vec::new();
    for (id, vars) in jobs {
        match prompts::render_generation(&vars) {
            Ok(p) => plan.push(planned(&id, &defaults.model_name, defaults.temperature, p)),
            Err(e) => errors.push(ItemError::new(&id, "render", "MissingVariable", e)),
        }
    }
    (plan, errors)
}

pub fn plan_detection(items: &[DetectionItem], spec: &DetectorSpec) -> (Vec<PlannedRequest>, Vec<ItemError>) {
    let spec = spec.clone().normalized();
    let mut plan = Vec::new();
    let mut errors = Vec::new();
    for item in items {
        if spec.kind == DetectorKind::SlmSidecar {
            let text = corpus::truncate_words(&item.content, INPUT_WORD_LIMIT);
            plan.push(PlannedRequest {
                item_id: item.id.clone(),
                kind_tag: "slm".into(),
                request_digest: crate::digest::sha256_hex(&text),
                prompt: text,
            });
            continue;
        }
        let vars = match spec.kind {
            DetectorKind::LlmStdNoExpl => DetectPromptVars::standard(item.content.clone(), false),
            DetectorKind::LlmStdWithExpl => DetectPromptVars::standard(item.content.clone(), true),
            _ => DetectPromptVars::cot(item.content.clone(), spec.ablation, spec.output_mode),
        };
        match prompts::render_detection(&vars) {
            Ok(p) => plan.push(planned(&item.id, &spec.effective_model(), DETECTION_TEMPERATURE, p)),
            Err(e) => errors.push(ItemError::new(&item.id, "render", "MissingVariable", e)),
        }
    }
    (plan, errors)
}
