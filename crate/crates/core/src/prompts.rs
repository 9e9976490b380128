//! Prompt templates for disinformation generation and detection.
//!
//! Templates live in `assets/templates/*.txt` and use bracketed slot markers
//! such as `[fake news]`. Rendering substitutes every slot in a single pass,
//! so slot-like text inside an article is never re-expanded.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

const GEN_STANDARD: &str = include_str!("../assets/templates/gen_standard.txt");
const GEN_MIXTURE: &str = include_str!("../assets/templates/gen_mixture.txt");
const GEN_COT: &str = include_str!("../assets/templates/gen_cot.txt");
const DETECT_STD_NO_EXPL: &str = include_str!("../assets/templates/detect_std_no_expl.txt");
const DETECT_STD_WITH_EXPL: &str = include_str!("../assets/templates/detect_std_with_expl.txt");
const DETECT_COT: &str = include_str!("../assets/templates/detect_cot.txt");

pub const SLOT_FAKE_NEWS: &str = "fake news";
pub const SLOT_TRUE_NEWS: &str = "true news";
pub const SLOT_KEYWORDS: &str = "keywords";
pub const SLOT_TONE: &str = "tone";
pub const SLOT_ROLE: &str = "role";
pub const SLOT_FAKE_EVENT: &str = "fake event";
pub const SLOT_NEWS_MEDIA: &str = "news media";
pub const SLOT_N_MEDIA: &str = "# of news media";
const SLOT_EXTRACTION: &str = "extraction targets";
const SLOT_FACTUALNESS: &str = "factualness target";
const SLOT_RELATIONSHIP: &str = "relationship targets";
const SLOT_ANSWER: &str = "answer instruction";

/// Every slot name that may appear in a stored template.
pub const KNOWN_SLOTS: [&str; 12] = [
    SLOT_FAKE_NEWS,
    SLOT_TRUE_NEWS,
    SLOT_KEYWORDS,
    SLOT_TONE,
    SLOT_ROLE,
    SLOT_FAKE_EVENT,
    SLOT_NEWS_MEDIA,
    SLOT_N_MEDIA,
    SLOT_EXTRACTION,
    SLOT_FACTUALNESS,
    SLOT_RELATIONSHIP,
    SLOT_ANSWER,
];

const ANSWER_BINARY: &str = "Show your analytic process and respond with \"Yes\" or \"No\"";
const ANSWER_SCALE: &str =
    "In your response, detail your analytic process and provide a confidence score ranging from 1 to 100.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing variable `{0}`")]
    MissingVariable(String),
    #[error("keyword list is empty")]
    EmptyKeywordList,
    #[error("{n_versions} versions requested for {outlets} outlets")]
    VersionCountMismatch { n_versions: usize, outlets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenPromptKind {
    Standard,
    Mixture,
    Cot,
}

/// Variables for the three generation prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenPromptVars {
    pub kind: GenPromptKind,
    pub fake_news: Option<String>,
    pub true_news: Option<String>,
    pub keywords: Vec<String>,
    pub tone: String,
    pub role: String,
    pub fake_event: Option<String>,
    pub outlets: Vec<String>,
    pub n_versions: usize,
}

impl GenPromptVars {
    pub fn standard(fake_news: impl Into<String>, keywords: &[&str], tone: &str, role: &str) -> Self {
        Self {
            kind: GenPromptKind::Standard,
            fake_news: Some(fake_news.into()),
            true_news: None,
            keywords: keywords.iter().map(|k| k.to_string()).collect(),
            tone: tone.into(),
            role: role.into(),
            fake_event: None,
            outlets: Vec::new(),
            n_versions: 0,
        }
    }

    pub fn mixture(
        fake_news: impl Into<String>,
        true_news: impl Into<String>,
        tone: &str,
        role: &str,
    ) -> Self {
        Self {
            kind: GenPromptKind::Mixture,
            fake_news: Some(fake_news.into()),
            true_news: Some(true_news.into()),
            keywords: Vec::new(),
            tone: tone.into(),
            role: role.into(),
            fake_event: None,
            outlets: Vec::new(),
            n_versions: 0,
        }
    }

    pub fn cot(true_news: impl Into<String>, fake_event: &str, role: &str, outlets: &[&str]) -> Self {
        Self {
            kind: GenPromptKind::Cot,
            fake_news: None,
            true_news: Some(true_news.into()),
            keywords: Vec::new(),
            tone: String::new(),
            role: role.into(),
            fake_event: Some(fake_event.into()),
            outlets: outlets.iter().map(|o| o.to_string()).collect(),
            n_versions: outlets.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectPromptKind {
    StdNoExplanation,
    StdWithExplanation,
    CotDetect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    NoPerson,
    NoPlace,
    NoTime,
    NoEvent,
}

impl Ablation {
    pub const REMOVALS: [Ablation; 4] = [
        Ablation::NoPerson,
        Ablation::NoPlace,
        Ablation::NoTime,
        Ablation::NoEvent,
    ];

    pub fn removed_element(self) -> Option<Element> {
        match self {
            Ablation::None => None,
            Ablation::NoPerson => Some(Element::Characters),
            Ablation::NoPlace => Some(Element::PlaceNames),
            Ablation::NoTime => Some(Element::TimeStamps),
            Ablation::NoEvent => Some(Element::KeyEvents),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    #[default]
    Binary,
    Scale1to100,
}

/// The contextual elements a CoT detection prompt asks the model to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    Characters,
    PlaceNames,
    TimeStamps,
    KeyEvents,
}

impl Element {
    pub const ALL: [Element; 4] = [
        Element::Characters,
        Element::PlaceNames,
        Element::TimeStamps,
        Element::KeyEvents,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Element::Characters => "characters",
            Element::PlaceNames => "place names",
            Element::TimeStamps => "time stamps",
            Element::KeyEvents => "key events",
        }
    }
}

/// The six CoT detection configurations compared in an ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotVariant {
    NoPerson,
    NoPlace,
    NoTime,
    NoEvent,
    AllBinary,
    AllScale,
}

impl CotVariant {
    pub const ALL: [CotVariant; 6] = [
        CotVariant::NoPerson,
        CotVariant::NoPlace,
        CotVariant::NoTime,
        CotVariant::NoEvent,
        CotVariant::AllBinary,
        CotVariant::AllScale,
    ];

    pub fn ablation(self) -> Ablation {
        match self {
            CotVariant::NoPerson => Ablation::NoPerson,
            CotVariant::NoPlace => Ablation::NoPlace,
            CotVariant::NoTime => Ablation::NoTime,
            CotVariant::NoEvent => Ablation::NoEvent,
            CotVariant::AllBinary | CotVariant::AllScale => Ablation::None,
        }
    }

    pub fn output_mode(self) -> OutputMode {
        match self {
            CotVariant::AllScale => OutputMode::Scale1to100,
            _ => OutputMode::Binary,
        }
    }

    pub fn from_parts(ablation: Ablation, mode: OutputMode) -> Option<CotVariant> {
        Some(match (ablation, mode) {
            (Ablation::NoPerson, OutputMode::Binary) => CotVariant::NoPerson,
            (Ablation::NoPlace, OutputMode::Binary) => CotVariant::NoPlace,
            (Ablation::NoTime, OutputMode::Binary) => CotVariant::NoTime,
            (Ablation::NoEvent, OutputMode::Binary) => CotVariant::NoEvent,
            (Ablation::None, OutputMode::Binary) => CotVariant::AllBinary,
            (Ablation::None, OutputMode::Scale1to100) => CotVariant::AllScale,
            _ => return None,
        })
    }

    /// Row label used in report tables, e.g. `w/o person` or `all_scale`.
    pub fn label(self) -> &'static str {
        match self {
            CotVariant::NoPerson => "w/o person",
            CotVariant::NoPlace => "w/o place",
            CotVariant::NoTime => "w/o time",
            CotVariant::NoEvent => "w/o event",
            CotVariant::AllBinary => "all_binary",
            CotVariant::AllScale => "all_scale",
        }
    }

    pub fn parse(s: &str) -> Option<CotVariant> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Some(match key.as_str() {
            "noperson" | "woperson" | "person" => CotVariant::NoPerson,
            "noplace" | "woplace" | "place" => CotVariant::NoPlace,
            "notime" | "wotime" | "time" => CotVariant::NoTime,
            "noevent" | "woevent" | "event" => CotVariant::NoEvent,
            "allbinary" | "binary" => CotVariant::AllBinary,
            "allscale" | "scale" => CotVariant::AllScale,
            _ => return None,
        })
    }
}

impl fmt::Display for CotVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectPromptVars {
    pub kind: DetectPromptKind,
    pub article: String,
    pub ablation: Ablation,
    pub output_mode: OutputMode,
}

impl DetectPromptVars {
    pub fn standard(article: impl Into<String>, with_explanation: bool) -> Self {
        Self {
            kind: if with_explanation {
                DetectPromptKind::StdWithExplanation
            } else {
                DetectPromptKind::StdNoExplanation
            },
            article: article.into(),
            ablation: Ablation::None,
            output_mode: OutputMode::Binary,
        }
    }

    pub fn cot(article: impl Into<String>, ablation: Ablation, output_mode: OutputMode) -> Self {
        Self {
            kind: DetectPromptKind::CotDetect,
            article: article.into(),
            ablation,
            output_mode,
        }
    }

    /// Standard prompts only ever ask for a binary answer.
    pub fn effective_output_mode(&self) -> OutputMode {
        match self.kind {
            DetectPromptKind::CotDetect => self.output_mode,
            _ => OutputMode::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub digest: String,
    pub kind_tag: String,
}

impl RenderedPrompt {
    fn new(text: String, kind_tag: impl Into<String>) -> Self {
        let digest = sha256_hex(&text);
        Self {
            text,
            digest,
            kind_tag: kind_tag.into(),
        }
    }
}

/// Substitutes `[slot]` markers in one left-to-right pass. Bracketed text that
/// is not a known slot is copied through; a known slot with no binding is an
/// error.
fn fill(template: &str, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    substitute(template, bindings, true)
}

fn substitute(template: &str, bindings: &[(&str, &str)], strict: bool) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) if KNOWN_SLOTS.contains(&&after[..close]) => {
                let name = &after[..close];
                match bindings.iter().find(|(slot, _)| *slot == name) {
                    Some((_, value)) => out.push_str(value),
                    None if strict => return Err(PromptError::MissingVariable(name.to_string())),
                    None => out.push_str(&rest[open..open + close + 2]),
                }
                rest = &after[close + 1..];
            }
            _ => {
                out.push('[');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Joins list items the way English prose does: `a`, `a and b`, `a, b, and c`.
pub fn join_with_and(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

fn required<'a>(value: Option<&'a str>, slot: &str) -> Result<&'a str, PromptError> {
    value
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| PromptError::MissingVariable(slot.to_string()))
}

fn required_str<'a>(value: &'a str, slot: &str) -> Result<&'a str, PromptError> {
    required(Some(value), slot)
}

pub fn render_generation(vars: &GenPromptVars) -> Result<RenderedPrompt, PromptError> {
    match vars.kind {
        GenPromptKind::Standard => {
            let fake = required(vars.fake_news.as_deref(), SLOT_FAKE_NEWS)?;
            if vars.keywords.iter().all(|k| k.trim().is_empty()) {
                return Err(PromptError::EmptyKeywordList);
            }
            let keywords = vars.keywords.join(", ");
            let tone = required_str(&vars.tone, SLOT_TONE)?;
            let role = required_str(&vars.role, SLOT_ROLE)?;
            let text = fill(
                GEN_STANDARD,
                &[
                    (SLOT_FAKE_NEWS, fake),
                    (SLOT_KEYWORDS, &keywords),
                    (SLOT_TONE, tone),
                    (SLOT_ROLE, role),
                ],
            )?;
            Ok(RenderedPrompt::new(text, "gen_standard"))
        }
        GenPromptKind::Mixture => {
            let tone = required_str(&vars.tone, SLOT_TONE)?;
            let role = required_str(&vars.role, SLOT_ROLE)?;
            let fake = required(vars.fake_news.as_deref(), SLOT_FAKE_NEWS)?;
            let real = required(vars.true_news.as_deref(), SLOT_TRUE_NEWS)?;
            let text = fill(
                GEN_MIXTURE,
                &[
                    (SLOT_TONE, tone),
                    (SLOT_ROLE, role),
                    (SLOT_FAKE_NEWS, fake),
                    (SLOT_TRUE_NEWS, real),
                ],
            )?;
            Ok(RenderedPrompt::new(text, "gen_mixture"))
        }
        GenPromptKind::Cot => {
            let real = required(vars.true_news.as_deref(), SLOT_TRUE_NEWS)?;
            let event = required(vars.fake_event.as_deref(), SLOT_FAKE_EVENT)?;
            let role = required_str(&vars.role, SLOT_ROLE)?;
            let outlets: Vec<&str> = vars
                .outlets
                .iter()
                .map(String::as_str)
                .filter(|o| !o.trim().is_empty())
                .collect();
            if outlets.is_empty() {
                return Err(PromptError::MissingVariable(SLOT_NEWS_MEDIA.to_string()));
            }
            if vars.n_versions != outlets.len() {
                return Err(PromptError::VersionCountMismatch {
                    n_versions: vars.n_versions,
                    outlets: outlets.len(),
                });
            }
            let media = join_with_and(&outlets);
            let count = vars.n_versions.to_string();
            let text = fill(
                GEN_COT,
                &[
                    (SLOT_TRUE_NEWS, real),
                    (SLOT_FAKE_EVENT, event),
                    (SLOT_ROLE, role),
                    (SLOT_NEWS_MEDIA, &media),
                    (SLOT_N_MEDIA, &count),
                ],
            )?;
            Ok(RenderedPrompt::new(text, "gen_cot"))
        }
    }
}

/// Tag identifying a detection prompt variant.
pub fn detection_kind_tag(vars: &DetectPromptVars) -> &'static str {
    match vars.kind {
        DetectPromptKind::StdNoExplanation => "detect_std_no_expl",
        DetectPromptKind::StdWithExplanation => "detect_std_with_expl",
        DetectPromptKind::CotDetect => match (vars.ablation, vars.output_mode) {
            (Ablation::None, OutputMode::Binary) => "detect_cot_all_binary",
            (Ablation::None, OutputMode::Scale1to100) => "detect_cot_all_scale",
            (Ablation::NoPerson, OutputMode::Binary) => "detect_cot_no_person",
            (Ablation::NoPlace, OutputMode::Binary) => "detect_cot_no_place",
            (Ablation::NoTime, OutputMode::Binary) => "detect_cot_no_time",
            (Ablation::NoEvent, OutputMode::Binary) => "detect_cot_no_event",
            (Ablation::NoPerson, OutputMode::Scale1to100) => "detect_cot_no_person_scale",
            (Ablation::NoPlace, OutputMode::Scale1to100) => "detect_cot_no_place_scale",
            (Ablation::NoTime, OutputMode::Scale1to100) => "detect_cot_no_time_scale",
            (Ablation::NoEvent, OutputMode::Scale1to100) => "detect_cot_no_event_scale",
        },
    }
}

/// Fills the CoT detection scaffold for an ablation and output mode, leaving
/// the article slot in place.
fn cot_detection_skeleton(ablation: Ablation, mode: OutputMode) -> String {
    let removed = ablation.removed_element();
    let kept: Vec<&str> = Element::ALL
        .iter()
        .filter(|e| Some(**e) != removed)
        .map(|e| e.phrase())
        .collect();
    let targets = join_with_and(&kept);
    let factualness = if removed == Some(Element::KeyEvents) {
        "information"
    } else {
        "events"
    };
    let answer = match mode {
        OutputMode::Binary => ANSWER_BINARY,
        OutputMode::Scale1to100 => ANSWER_SCALE,
    };
    // `[fake news]` stays unbound here and passes through.
    substitute(
        DETECT_COT,
        &[
            (SLOT_EXTRACTION, targets.as_str()),
            (SLOT_FACTUALNESS, factualness),
            (SLOT_RELATIONSHIP, targets.as_str()),
            (SLOT_ANSWER, answer),
        ],
        false,
    )
    .expect("non-strict substitution cannot fail")
}

pub fn render_detection(vars: &DetectPromptVars) -> Result<RenderedPrompt, PromptError> {
    let article = required_str(&vars.article, SLOT_FAKE_NEWS)?;
    let template = match vars.kind {
        DetectPromptKind::StdNoExplanation => DETECT_STD_NO_EXPL.to_string(),
        DetectPromptKind::StdWithExplanation => DETECT_STD_WITH_EXPL.to_string(),
        DetectPromptKind::CotDetect => cot_detection_skeleton(vars.ablation, vars.output_mode),
    };
    let text = fill(&template, &[(SLOT_FAKE_NEWS, article)])?;
    Ok(RenderedPrompt::new(text, detection_kind_tag(vars)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub kind_tag: String,
    pub skeleton: String,
}

/// Every concrete prompt variant with its unfilled skeleton: three generation
/// prompts, two standard detection prompts and seven CoT detection prompts.
/// `detect_cot` is the plain CoT prompt; the grid's `all_binary` variant
/// renders the same text under its own tag.
pub fn prompt_catalog() -> Vec<CatalogEntry> {
    let mut entries = vec![
        ("gen_standard".to_string(), GEN_STANDARD.to_string()),
        ("gen_mixture".to_string(), GEN_MIXTURE.to_string()),
        ("gen_cot".to_string(), GEN_COT.to_string()),
        ("detect_std_no_expl".to_string(), DETECT_STD_NO_EXPL.to_string()),
        ("detect_std_with_expl".to_string(), DETECT_STD_WITH_EXPL.to_string()),
        (
            "detect_cot".to_string(),
            cot_detection_skeleton(Ablation::None, OutputMode::Binary),
        ),
    ];
    for variant in CotVariant::ALL {
        let probe = DetectPromptVars::cot("", variant.ablation(), variant.output_mode());
        entries.push((
            detection_kind_tag(&probe).to_string(),
            cot_detection_skeleton(variant.ablation(), variant.output_mode()),
        ));
    }
    entries
        .into_iter()
        .map(|(kind_tag, skeleton)| CatalogEntry { kind_tag, skeleton })
        .collect()
}

/// True when `text` still contains a `[slot]` marker for a known slot.
pub fn has_unreplaced_slot(text: &str) -> bool {
    KNOWN_SLOTS.iter().any(|s| text.contains(&format!("[{s}]")))
}
