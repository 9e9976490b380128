//! Lexicon-based linguistic profiling.
//!
//! A lexicon maps category names to word patterns: literal words, or stems
//! ending in `*` that match any token with that prefix. A text's profile is,
//! per category, the share of its tokens matching at least one pattern. A
//! token may count towards several categories.
//!
//! Lexicon file format, UTF-8, one category per line:
//!
//! ```text
//! # comment
//! Swear: damn*, hell
//! Prosocial: help*, care*, support
//! ```
//!
//! Category proportions are a proxy only. Summary scales such as an
//! "Analytic" score computed by a proprietary formula are not reproduced; an
//! `Analytic` category here is just another word list.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::word_tokens;

pub const DEMO_LEXICON: &str = include_str!("../assets/lexicon_demo.txt");

/// Categories whose canonical versions are composite scales, not word lists.
pub const PROXY_CATEGORIES: [&str; 2] = ["Analytic", "Linguistic"];

#[derive(Debug, Error)]
pub enum TextStatsError {
    #[error("lexicon line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("cannot read lexicon {path}: {source}")]
    IoFailure {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("text has no tokens")]
    EmptyText,
    #[error("corpus has no texts")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Word(String),
    Stem(String),
}

impl Pattern {
    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Word(w) => token == w,
            Pattern::Stem(s) => token.starts_with(s.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Category {
    name: String,
    patterns: Vec<Pattern>,
    words: HashSet<String>,
    stems: Vec<String>,
}

impl Category {
    fn new(name: String, patterns: Vec<Pattern>) -> Self {
        let mut words = HashSet::new();
        let mut stems = Vec::new();
        for p in &patterns {
            match p {
                Pattern::Word(w) => {
                    words.insert(w.clone());
                }
                Pattern::Stem(s) => stems.push(s.clone()),
            }
        }
        Self {
            name,
            patterns,
            words,
            stems,
        }
    }

    fn matches(&self, token: &str) -> bool {
        self.words.contains(token) || self.stems.iter().any(|s| token.starts_with(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    categories: Vec<Category>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, TextStatsError> {
        let mut categories: Vec<Category> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| TextStatsError::ParseError { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (name, rest) = trimmed
                .split_once(':')
                .ok_or_else(|| err("expected `category: patterns`".into()))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(err("empty category name".into()));
            }
            if categories.iter().any(|c| c.name == name) {
                return Err(err(format!("duplicate category {name:?}")));
            }
            let mut patterns = Vec::new();
            for item in rest.split(',') {
                let item = item.trim().to_lowercase();
                if item.is_empty() {
                    continue;
                }
                let (body, stem) = match item.strip_suffix('*') {
                    Some(body) => (body, true),
                    None => (item.as_str(), false),
                };
                if body.contains('*') {
                    return Err(err(format!("wildcard must be final in {item:?}")));
                }
                if body.is_empty() || !body.chars().all(char::is_alphanumeric) {
                    return Err(err(format!("pattern {item:?} is not a word or stem")));
                }
                patterns.push(if stem {
                    Pattern::Stem(body.to_string())
                } else {
                    Pattern::Word(body.to_string())
                });
            }
            if patterns.is_empty() {
                return Err(err(format!("category {name:?} has no patterns")));
            }
            categories.push(Category::new(name.to_string(), patterns));
        }
        Ok(Self { categories })
    }

    pub fn load(path: &Path) -> Result<Self, TextStatsError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextStatsError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_LEXICON).expect("demo lexicon parses")
    }

    pub fn category_names(&self) -> Vec<&str> {
        self.categories.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn patterns(&self, category: &str) -> Option<&[Pattern]> {
        self.categories
            .iter()
            .find(|c| c.name == category)
            .map(|c| c.patterns.as_slice())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub proportions: BTreeMap<String, f64>,
    pub matches: BTreeMap<String, usize>,
    pub token_count: usize,
}

pub fn profile_text(text: &str, lexicon: &Lexicon) -> Result<CategoryProfile, TextStatsError> {
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return Err(TextStatsError::EmptyText);
    }
    let matches: BTreeMap<String, usize> = lexicon
        .categories
        .iter()
        .map(|c| (c.name.clone(), tokens.iter().filter(|t| c.matches(t)).count()))
        .collect();
    Ok(from_counts(matches, tokens.len()))
}

fn from_counts(matches: BTreeMap<String, usize>, token_count: usize) -> CategoryProfile {
    let proportions = matches
        .iter()
        .map(|(k, m)| (k.clone(), *m as f64 / token_count as f64))
        .collect();
    CategoryProfile {
        proportions,
        matches,
        token_count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusAggregation {
    /// Pooled tokens: each text weighs by its length.
    #[default]
    TokenWeighted,
    /// Plain mean of per-text proportions.
    MeanOfTexts,
}

pub fn profile_corpus<S: AsRef<str>>(
    texts: &[S],
    lexicon: &Lexicon,
    aggregation: CorpusAggregation,
) -> Result<CategoryProfile, TextStatsError> {
    if texts.is_empty() {
        return Err(TextStatsError::EmptyCorpus);
    }
    let profiles = texts
        .iter()
        .map(|t| profile_text(t.as_ref(), lexicon))
        .collect::<Result<Vec<_>, _>>()?;
    let token_count: usize = profiles.iter().map(|p| p.token_count).sum();
    let mut matches: BTreeMap<String, usize> = BTreeMap::new();
    for p in &profiles {
        for (k, m) in &p.matches {
            *matches.entry(k.clone()).or_default() += m;
        }
    }
    match aggregation {
        CorpusAggregation::TokenWeighted => Ok(from_counts(matches, token_count)),
        CorpusAggregation::MeanOfTexts => {
            let n = profiles.len() as f64;
            let proportions = matches
                .keys()
                .map(|k| (k.clone(), profiles.iter().map(|p| p.proportions[k]).sum::<f64>() / n))
                .collect();
            Ok(CategoryProfile {
                proportions,
                matches,
                token_count,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    Percent(f64),
    /// Baseline is zero but the comparison is not.
    Undefined,
}

/// `100 * (generated - human) / human` for every category both profiles share.
pub fn percent_change(human: &CategoryProfile, generated: &CategoryProfile) -> BTreeMap<String, Change> {
    human
        .proportions
        .iter()
        .filter_map(|(k, h)| {
            let g = *generated.proportions.get(k)?;
            let change = if *h == 0.0 {
                if g == 0.0 {
                    Change::Percent(0.0)
                } else {
                    Change::Undefined
                }
            } else {
                Change::Percent(100.0 * (g - h) / h)
            };
            Some((k.clone(), change))
        })
        .collect()
}

/// Markdown comparison table in lexicon order.
pub fn comparison_markdown(
    lexicon: &Lexicon,
    human: &CategoryProfile,
    generated: &CategoryProfile,
) -> String {
    let changes = percent_change(human, generated);
    let mut s = String::from("| Category | Human | Generated | Change |\n|---|---:|---:|---:|\n");
    let mut proxy = false;
    for name in lexicon.category_names() {
        let Some(change) = changes.get(name) else { continue };
        let mark = if PROXY_CATEGORIES.contains(&name) {
            proxy = true;
            "*"
        } else {
            ""
        };
        let change = match change {
            Change::Percent(p) => format!("{p:+.1}%"),
            Change::Undefined => "undefined".into(),
        };
        let _ = writeln!(
            s,
            "| {name}{mark} | {:.4} | {:.4} | {change} |",
            human.proportions[name], generated.proportions[name]
        );
    }
    if proxy {
        s.push_str("\n\\* word-list proportion, not the composite summary scale.\n");
    }
    s
}
