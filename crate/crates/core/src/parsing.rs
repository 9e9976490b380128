//! Turning free-form model output into typed records.
//!
//! Verdicts follow a last-answer-wins rule: when a reply says "Yes" early and
//! "No" at the end, the final statement is taken as the model's answer.
//! Phrases that merely echo the instruction (`"Yes" or "No"`, `yes/no`) are
//! never counted as answers.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, Outlet};
use crate::prompts::OutputMode;

pub const DEFAULT_THRESHOLD: u8 = 50;

const DEFAULT_REFUSALS: &str = include_str!("../assets/refusal_phrases.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unparseable output: {0}")]
    Unparseable(String),
    #[error("model refused to answer")]
    Refusal,
    #[error("score {0} outside 1..=100")]
    OutOfRange(i64),
    #[error("section `{0}` missing")]
    SectionMissing(String),
    #[error("no version for outlet {0}")]
    OutletVersionMissing(String),
}

/// Elements extracted in step 1 of a CoT prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedElements {
    pub characters: Vec<String>,
    pub places: Vec<String>,
    pub timestamps: Vec<String>,
    pub key_events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotGenerationOutput {
    pub characters: Vec<String>,
    pub places: Vec<String>,
    pub timestamps: Vec<String>,
    pub key_events: Vec<String>,
    pub hallucinated_event: String,
    pub outlet_versions: BTreeMap<Outlet, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    /// True when the model says the article is misleading.
    pub flagged: bool,
    pub confidence: Option<u8>,
    pub analytic_text: Option<String>,
    pub extracted: Option<ExtractedElements>,
    pub raw: String,
}

/// Case-insensitive substring patterns that mark a refusal.
#[derive(Debug, Clone)]
pub struct RefusalMatcher {
    phrases: Vec<String>,
}

impl Default for RefusalMatcher {
    fn default() -> Self {
        Self::from_text(DEFAULT_REFUSALS)
    }
}

impl RefusalMatcher {
    pub fn from_text(text: &str) -> Self {
        let phrases = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| normalize_apostrophes(&l.to_lowercase()))
            .collect();
        Self { phrases }
    }

    /// Default phrases plus those in `path`.
    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        let mut matcher = Self::default();
        matcher.phrases.extend(Self::from_text(&std::fs::read_to_string(path)?).phrases);
        Ok(matcher)
    }

    pub fn is_refusal(&self, text: &str) -> bool {
        let lower = normalize_apostrophes(&text.to_lowercase());
        self.phrases.iter().any(|p| lower.contains(p.as_str()))
    }
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'")
}

static ECHO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)["“”'‘’`*]*\byes\b["“”'‘’`*]*\s*(?:or|/)\s*["“”'‘’`*]*\bno\b["“”'‘’`*]*"#).unwrap()
});
static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());
static ANSWER_MARK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)\b(?:final\s+)?answer\b\s*[:\-]?\s*["“”'*\s]*\b(yes|no)\b"#).unwrap()
});

/// Overwrites matches with spaces so byte offsets stay valid.
fn blank_out(text: &str, re: &Regex) -> String {
    let mut out = text.to_string();
    for m in re.find_iter(text) {
        out.replace_range(m.range(), &" ".repeat(m.len()));
    }
    out
}

/// A Yes/No token is an answer when it stands alone: followed by the end of
/// the text, punctuation or a line break rather than by more words of the
/// same sentence ("no evidence", "yes it does"). A short confirmation such as
/// "Yes it does" or "No, it is not" also counts.
fn is_standalone(text: &str, end: usize) -> bool {
    let rest = &text[end..];
    match rest.chars().next() {
        None => true,
        Some(c) if c.is_whitespace() => {
            let after = rest.trim_start_matches([' ', '\t']);
            after.chars().next().is_none_or(|n| !n.is_alphanumeric()) || CONFIRMATION.is_match(after)
        }
        Some(c) => !c.is_alphanumeric(),
    }
}

static CONFIRMATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:it|this|that)\s+(?:does|doesn't|does\s+not|is|isn't|is\s+not|contains)\b").unwrap()
});

/// Byte range and value of the last answer token in `raw`.
fn last_answer(raw: &str) -> Option<(usize, bool)> {
    let scrubbed = blank_out(raw, &ECHO);
    let mut best: Option<(usize, bool)> = None;
    let mut consider = |start: usize, word: &str| {
        if best.is_none_or(|(s, _)| start > s) {
            best = Some((start, word.eq_ignore_ascii_case("yes")));
        }
    };
    for m in YES_NO.find_iter(&scrubbed) {
        if is_standalone(&scrubbed, m.end()) {
            consider(m.start(), m.as_str());
        }
    }
    for caps in ANSWER_MARK.captures_iter(&scrubbed) {
        let m = caps.get(1).unwrap();
        consider(m.start(), m.as_str());
    }
    best
}

static TRAILING_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)(?:\b(?:final\s+)?answer\b|\bverdict\b|\bconclusion\b)?[\s:\-"“”'*(]*$"#).unwrap()
});

fn analytic_prefix(raw: &str, token_start: usize) -> Option<String> {
    let prefix = &raw[..token_start];
    let cut = TRAILING_LABEL.find(prefix).map_or(prefix.len(), |m| m.start());
    let text = prefix[..cut].trim();
    text.chars().any(char::is_alphanumeric).then(|| text.to_string())
}

pub fn parse_verdict(raw: &str) -> Result<DetectionVerdict, ParseError> {
    parse_verdict_with(raw, &RefusalMatcher::default())
}

pub fn parse_verdict_with(raw: &str, refusals: &RefusalMatcher) -> Result<DetectionVerdict, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Unparseable("empty output".into()));
    }
    match last_answer(raw) {
        Some((start, flagged)) => Ok(DetectionVerdict {
            flagged,
            confidence: None,
            analytic_text: analytic_prefix(raw, start),
            extracted: extract_elements(raw),
            raw: raw.to_string(),
        }),
        None if refusals.is_refusal(raw) => Err(ParseError::Refusal),
        None => Err(ParseError::Unparseable("no Yes/No answer".into())),
    }
}

static SCALE_ECHO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:ranging\s+)?from\s+1\s+to\s+100|\b1\s*(?:-|–|to)\s*100\b|\bsteps?\s+\d+(?:\s*(?:,|and|-)\s*\d+)*")
        .unwrap()
});
static SCORE_WORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:confidence|score|rating)\b[^0-9\n]{0,40}?(-?\d+)(?:\.\d+)?").unwrap()
});
static OUT_OF_100: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(-?\d+)(?:\.\d+)?\s*(?:/|out\s+of)\s*100\b").unwrap());
static BARE_INT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+)(?:\.\d+)?\b").unwrap());
static LIST_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*\d+[.)]").unwrap());

/// Reads a 1–100 confidence score. Numbers next to score/confidence wording or
/// written as `N/100`, `N out of 100` win; otherwise the last bare integer in
/// range is used.
pub fn parse_confidence(raw: &str) -> Result<u8, ParseError> {
    let scrubbed = blank_out(&blank_out(raw, &SCALE_ECHO), &LIST_NUMBER);
    let mut adjacent: Option<(usize, i64)> = None;
    for re in [&*SCORE_WORD, &*OUT_OF_100] {
        for caps in re.captures_iter(&scrubbed) {
            let m = caps.get(1).unwrap();
            let value: i64 = m.as_str().parse().unwrap_or(i64::MAX);
            if adjacent.is_none_or(|(pos, _)| m.start() > pos) {
                adjacent = Some((m.start(), value));
            }
        }
    }
    if let Some((_, value)) = adjacent {
        return if (1..=100).contains(&value) {
            Ok(value as u8)
        } else {
            Err(ParseError::OutOfRange(value))
        };
    }
    BARE_INT
        .captures_iter(&scrubbed)
        .filter_map(|c| c.get(1).unwrap().as_str().parse::<i64>().ok())
        .filter(|v| (1..=100).contains(v))
        .last()
        .map(|v| v as u8)
        .ok_or_else(|| ParseError::Unparseable("no confidence score".into()))
}

/// Parses a reply to a detection prompt of the given output mode. In scale
/// mode the confidence is required; `flagged` comes from an explicit Yes/No if
/// one is present and from the default threshold otherwise.
pub fn parse_detection(raw: &str, mode: OutputMode, refusals: &RefusalMatcher) -> Result<DetectionVerdict, ParseError> {
    match mode {
        OutputMode::Binary => parse_verdict_with(raw, refusals),
        OutputMode::Scale1to100 => {
            if raw.trim().is_empty() {
                return Err(ParseError::Unparseable("empty output".into()));
            }
            let confidence = match parse_confidence(raw) {
                Ok(c) => c,
                Err(ParseError::Unparseable(_)) if refusals.is_refusal(raw) => return Err(ParseError::Refusal),
                Err(e) => return Err(e),
            };
            let answer = last_answer(raw);
            Ok(DetectionVerdict {
                flagged: answer.map_or(confidence >= DEFAULT_THRESHOLD, |(_, f)| f),
                confidence: Some(confidence),
                analytic_text: Some(raw.trim().to_string()).filter(|t| t.split_whitespace().count() > 3),
                extracted: extract_elements(raw),
                raw: raw.to_string(),
            })
        }
    }
}

/// With a confidence score: Fake iff `confidence >= threshold`. Without: Fake
/// iff flagged.
pub fn verdict_to_label(v: &DetectionVerdict, threshold: u8) -> Label {
    let fake = match v.confidence {
        Some(c) => c >= threshold,
        None => v.flagged,
    };
    if fake {
        Label::Fake
    } else {
        Label::True
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Characters,
    Places,
    Timestamps,
    KeyEvents,
    NewEvent,
    Version(Outlet),
    Other,
}

static NUMBERING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:step\s*\d+\s*[:.)\-]?|\d+\s*[.)]|[-*•]+)\s*").unwrap());
static ELEMENT_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(characters|people|persons|place\s*names|places|locations|time\s*stamps|timestamps|times|key\s*events|events)\s*:\s*(.*)$")
        .unwrap()
});
static NEW_EVENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:.*\bnew\s+event\b[^:]*|hallucinated\s+events?|fake\s+event)\s*:\s*(.*)$").unwrap()
});
static VERSION_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^([a-z][a-z .]*?)\s+version\s*:\s*(.*)$").unwrap());

struct Line<'a> {
    numbered: bool,
    body: String,
    _raw: &'a str,
}

fn clean_line(raw: &str) -> Line<'_> {
    let no_emphasis = raw.replace("**", "").replace("__", "");
    let trimmed = no_emphasis.trim();
    let (numbered, body) = match NUMBERING.find(trimmed) {
        Some(m) => (
            m.as_str().chars().any(|c| c.is_ascii_digit()),
            trimmed[m.end()..].trim().to_string(),
        ),
        None => (false, trimmed.to_string()),
    };
    Line {
        numbered,
        body,
        _raw: raw,
    }
}

fn classify(body: &str) -> Option<(Section, String)> {
    if let Some(c) = ELEMENT_LABEL.captures(body) {
        let label: String = c[1].to_lowercase().split_whitespace().collect();
        let section = match label.as_str() {
            "characters" | "people" | "persons" => Section::Characters,
            "placenames" | "places" | "locations" => Section::Places,
            "timestamps" | "times" => Section::Timestamps,
            _ => Section::KeyEvents,
        };
        return Some((section, c[2].to_string()));
    }
    if let Some(c) = VERSION_LABEL.captures(body) {
        if let Some(outlet) = Outlet::parse(&c[1]) {
            return Some((Section::Version(outlet), c[2].to_string()));
        }
    }
    if let Some(c) = NEW_EVENT.captures(body) {
        return Some((Section::NewEvent, c[1].to_string()));
    }
    None
}

/// Groups text under recognised labels. Numbered lines without a label start
/// an unlabelled item, ending the previous section.
fn scan_sections(raw: &str) -> Vec<(Section, String)> {
    let mut sections: Vec<(Section, String)> = Vec::new();
    for raw_line in raw.lines() {
        let line = clean_line(raw_line);
        if line.body.is_empty() && !line.numbered {
            continue;
        }
        match classify(&line.body) {
            Some((section, rest)) => sections.push((section, rest)),
            None if line.numbered => sections.push((Section::Other, line.body)),
            None => match sections.last_mut() {
                Some((_, text)) => {
                    text.push('\n');
                    text.push_str(&line.body);
                }
                None => sections.push((Section::Other, line.body)),
            },
        }
    }
    sections
}

static LEADING_AND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^(?:and|&)\s+").unwrap());

fn split_list(text: &str) -> Vec<String> {
    text.split([',', ';', '\n'])
        .map(|item| {
            let item = item.trim().trim_start_matches(['-', '*', '•']).trim();
            let item = LEADING_AND.replace(item, "");
            item.trim().trim_end_matches('.').trim().to_string()
        })
        .filter(|item| !item.is_empty())
        .collect()
}

fn strip_quotes(s: &str) -> String {
    s.trim()
        .trim_matches(|c| matches!(c, '"' | '“' | '”' | '\''))
        .trim()
        .to_string()
}

fn elements_from(sections: &[(Section, String)]) -> (ExtractedElements, [bool; 4]) {
    let mut out = ExtractedElements::default();
    let mut seen = [false; 4];
    for (section, text) in sections {
        let (slot, idx) = match section {
            Section::Characters => (&mut out.characters, 0),
            Section::Places => (&mut out.places, 1),
            Section::Timestamps => (&mut out.timestamps, 2),
            Section::KeyEvents => (&mut out.key_events, 3),
            _ => continue,
        };
        if !seen[idx] {
            seen[idx] = true;
            slot.extend(split_list(text));
        }
    }
    (out, seen)
}

/// Element lists from a reply, if it has any of the four labelled lines.
pub fn extract_elements(raw: &str) -> Option<ExtractedElements> {
    let (elements, seen) = elements_from(&scan_sections(raw));
    seen.iter().any(|s| *s).then_some(elements)
}

/// Parses the reply to a CoT generation prompt. Section labels may be
/// numbered `1.` or `Step 1:`, or not at all; outlet versions are matched on
/// `<outlet> version:` case-insensitively.
pub fn parse_cot_generation(raw: &str, outlets: &[Outlet]) -> Result<CotGenerationOutput, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Unparseable("empty output".into()));
    }
    let sections = scan_sections(raw);
    let (elements, seen) = elements_from(&sections);
    for (present, name) in seen.iter().zip(["characters", "places", "timestamps", "key_events"]) {
        if !present {
            return Err(ParseError::SectionMissing(name.to_string()));
        }
    }
    let hallucinated_event = sections
        .iter()
        .find(|(s, _)| *s == Section::NewEvent)
        .map(|(_, t)| strip_quotes(t))
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ParseError::SectionMissing("hallucinated_event".into()))?;

    let mut outlet_versions = BTreeMap::new();
    for outlet in outlets {
        let text = sections
            .iter()
            .find(|(s, _)| *s == Section::Version(*outlet))
            .map(|(_, t)| strip_quotes(t))
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ParseError::OutletVersionMissing(outlet.prompt_name().to_string()))?;
        outlet_versions.insert(*outlet, text);
    }
    Ok(CotGenerationOutput {
        characters: elements.characters,
        places: elements.places,
        timestamps: elements.timestamps,
        key_events: elements.key_events,
        hallucinated_event,
        outlet_versions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_SKELETON: &str = "\
1. Characters: Joe Biden, Kamala Harris, and Donald Trump
Place Names: Washington, Iowa
Time Stamps: Monday, January 2028
Key events: a rally was held, a bill was signed
2. Retained Characters, Place Names, and Time Stamps in step 1
3. According to the rally and the bill, the new event in the context of the 2028 US presidential election is: \"A rally in Iowa turns into a campaign launch.\"
4. CNN version: CNN reports the rally.
FOX News version: Fox frames the launch.
Reuters version: Reuters lists the facts.
";

    #[test]
    fn cot_generation_skeleton() {
        let out = parse_cot_generation(FIG_SKELETON, &Outlet::ALL).unwrap();
        assert_eq!(out.characters, vec!["Joe Biden", "Kamala Harris", "Donald Trump"]);
        assert_eq!(out.places, vec!["Washington", "Iowa"]);
        assert_eq!(out.timestamps, vec!["Monday", "January 2028"]);
        assert_eq!(out.key_events, vec!["a rally was held", "a bill was signed"]);
        assert_eq!(out.hallucinated_event, "A rally in Iowa turns into a campaign launch.");
        assert_eq!(out.outlet_versions.len(), 3);
        assert_eq!(out.outlet_versions[&Outlet::FoxNews], "Fox frames the launch.");
    }

    #[test]
    fn cot_generation_missing_timestamps() {
        let raw = FIG_SKELETON.replace("Time Stamps: Monday, January 2028\n", "");
        assert_eq!(
            parse_cot_generation(&raw, &Outlet::ALL).unwrap_err(),
            ParseError::SectionMissing("timestamps".into())
        );
    }

    #[test]
    fn cot_generation_single_outlet() {
        let raw = "\
Characters: A
Place Names: B
Time Stamps: C
Key events: D
New event: E
Reuters version: only this one
";
        let out = parse_cot_generation(raw, &[Outlet::Reuters]).unwrap();
        assert_eq!(out.outlet_versions.len(), 1);
        assert_eq!(out.outlet_versions[&Outlet::Reuters], "only this one");
        assert_eq!(
            parse_cot_generation(raw, &[Outlet::Cnn]).unwrap_err(),
            ParseError::OutletVersionMissing("CNN".into())
        );
    }

    #[test]
    fn cot_generation_step_numbering_and_multiline_versions() {
        let raw = "  Step 1: Characters: A, B\n   Place Names: P\nTime Stamps: T\nKey Events: E\nStep 2: kept\nStep 3: New event: \"N\"\nStep 4: cnn version:\nline one\nline two\n\n";
        let out = parse_cot_generation(raw, &[Outlet::Cnn]).unwrap();
        assert_eq!(out.characters, vec!["A", "B"]);
        assert_eq!(out.hallucinated_event, "N");
        assert_eq!(out.outlet_versions[&Outlet::Cnn], "line one\nline two");
    }

    #[test]
    fn verdict_basic_cases() {
        let v = parse_verdict("The article cites no sources and misdates events. Answer: Yes").unwrap();
        assert!(v.flagged);
        assert_eq!(
            v.analytic_text.as_deref(),
            Some("The article cites no sources and misdates events.")
        );

        let v = parse_verdict("No").unwrap();
        assert!(!v.flagged);
        assert_eq!(v.analytic_text, None);

        let v = parse_verdict("Yes, however the claims check out on reflection, so ultimately No.").unwrap();
        assert!(!v.flagged);
    }

    #[test]
    fn verdict_ignores_in_sentence_words_and_echo() {
        let v = parse_verdict("Yes.\nNo further analysis is needed").unwrap();
        assert!(v.flagged);
        assert!(matches!(
            parse_verdict("I was asked to answer \"Yes\" or \"No\" but there is no clear answer here"),
            Err(ParseError::Unparseable(_))
        ));
    }

    #[test]
    fn verdict_refusal_and_unparseable() {
        assert_eq!(
            parse_verdict("I'm sorry, but I can't assist with that request.").unwrap_err(),
            ParseError::Refusal
        );
        assert!(matches!(parse_verdict("Maybe."), Err(ParseError::Unparseable(_))));
        assert!(matches!(parse_verdict("   "), Err(ParseError::Unparseable(_))));
    }

    #[test]
    fn refusal_list_is_extensible() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.txt");
        std::fs::write(&path, "# extra\nrather not say\n").unwrap();
        let matcher = RefusalMatcher::with_file(&path).unwrap();
        assert!(matcher.is_refusal("I would RATHER NOT SAY."));
        assert!(matcher.is_refusal("As an AI model"));
        assert!(!RefusalMatcher::default().is_refusal("rather not say"));
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(parse_confidence("Confidence score: 87"), Ok(87));
        assert_eq!(parse_confidence("I give it a score of 150"), Err(ParseError::OutOfRange(150)));
        assert_eq!(parse_confidence("I'd say 60 out of 100"), Ok(60));
        assert_eq!(parse_confidence("confidence 72/100"), Ok(72));
        assert_eq!(
            parse_confidence("On a scale ranging from 1 to 100, my confidence score is 35."),
            Ok(35)
        );
        assert!(matches!(parse_confidence("no numbers here"), Err(ParseError::Unparseable(_))));
    }

    #[test]
    fn scaled_detection_sets_confidence() {
        let v = parse_detection(
            "1. Characters: A\n2. Events look fabricated.\nConfidence score: 91",
            OutputMode::Scale1to100,
            &RefusalMatcher::default(),
        )
        .unwrap();
        assert_eq!(v.confidence, Some(91));
        assert!(v.flagged);
        assert_eq!(v.extracted.unwrap().characters, vec!["A"]);
    }

    #[test]
    fn label_mapping() {
        let mut v = parse_verdict("No").unwrap();
        assert_eq!(verdict_to_label(&v, 50), Label::True);
        v.confidence = Some(70);
        assert_eq!(verdict_to_label(&v, 50), Label::Fake);
        v.confidence = Some(50);
        assert_eq!(verdict_to_label(&v, 50), Label::Fake);
        v.confidence = Some(49);
        assert_eq!(verdict_to_label(&v, 50), Label::True);
    }
}
