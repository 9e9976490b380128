//! News records, JSONL persistence and corpus utilities.
//!
//! Human-written articles come in through [`ingest_human_csv`] (the
//! `title,text,subject,date` layout of the public fake/real news benchmark).
//! Every dataset the pipelines produce is stored as JSON Lines next to a
//! `<name>.manifest.json` file recording how many records it holds.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("CSV header is missing column `{0}`")]
    MissingColumn(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("schema mismatch at line {line}: {message}")]
    SchemaMismatch { line: usize, message: String },
    #[error("manifest for {path} declares {declared} records but file holds {actual}")]
    ManifestMismatch {
        path: PathBuf,
        declared: usize,
        actual: usize,
    },
    #[error("cannot sample {requested} records from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Fake,
    True,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Fake => "fake",
            Label::True => "true",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    GeneralNews,
    Politics,
    LeftNews,
    GovernmentNews,
    UsNews,
    MiddleEastNews,
    WorldNews,
    PoliticsNews,
    Unknown,
}

impl Topic {
    pub const FAKE_TOPICS: [Topic; 6] = [
        Topic::GeneralNews,
        Topic::Politics,
        Topic::LeftNews,
        Topic::GovernmentNews,
        Topic::UsNews,
        Topic::MiddleEastNews,
    ];
    pub const TRUE_TOPICS: [Topic; 2] = [Topic::WorldNews, Topic::PoliticsNews];

    /// Maps a raw `subject` cell onto a topic. Case and punctuation are
    /// ignored; anything unrecognised becomes [`Topic::Unknown`].
    pub fn from_subject(subject: &str) -> Topic {
        let key: String = subject
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "news" | "generalnews" => Topic::GeneralNews,
            "politics" => Topic::Politics,
            "leftnews" | "leftwingnews" => Topic::LeftNews,
            "governmentnews" | "govnews" => Topic::GovernmentNews,
            "usnews" => Topic::UsNews,
            "middleeast" | "middleeastnews" | "menews" => Topic::MiddleEastNews,
            "worldnews" => Topic::WorldNews,
            "politicsnews" => Topic::PoliticsNews,
            _ => Topic::Unknown,
        }
    }

    pub fn allowed_for(self, label: Label) -> bool {
        self == Topic::Unknown
            || match label {
                Label::Fake => Self::FAKE_TOPICS.contains(&self),
                Label::True => Self::TRUE_TOPICS.contains(&self),
            }
    }

    /// Short column heading used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Topic::GeneralNews => "Gen. News",
            Topic::Politics => "Politics",
            Topic::LeftNews => "Left News",
            Topic::GovernmentNews => "Gov. News",
            Topic::UsNews => "U.S. News",
            Topic::MiddleEastNews => "M.E. News",
            Topic::WorldNews => "World News",
            Topic::PoliticsNews => "Politics News",
            Topic::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDataset {
    Human,
}

/// One human-written news item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub headline: Option<String>,
    pub content: String,
    pub label: Label,
    pub topic: Topic,
    pub source_dataset: SourceDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Standard,
    Mixture,
    Cot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outlet {
    Cnn,
    FoxNews,
    Reuters,
}

impl Outlet {
    pub const ALL: [Outlet; 3] = [Outlet::Cnn, Outlet::FoxNews, Outlet::Reuters];

    /// The outlet name as written in prompts and model output.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Outlet::Cnn => "CNN",
            Outlet::FoxNews => "FOX News",
            Outlet::Reuters => "Reuters",
        }
    }

    /// Table heading spelling.
    pub fn display_name(self) -> &'static str {
        match self {
            Outlet::Cnn => "CNN",
            Outlet::FoxNews => "Fox News",
            Outlet::Reuters => "Reuters",
        }
    }

    pub fn parse(s: &str) -> Option<Outlet> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "cnn" => Some(Outlet::Cnn),
            "fox" | "foxnews" => Some(Outlet::FoxNews),
            "reuters" => Some(Outlet::Reuters),
            _ => None,
        }
    }
}

impl fmt::Display for Outlet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// One LLM-generated (and therefore fake) news item with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedArticle {
    pub id: String,
    pub parent_fake_id: Option<String>,
    pub parent_true_id: Option<String>,
    pub content: String,
    pub gen_kind: GenKind,
    pub outlet: Option<Outlet>,
    pub model_name: String,
    pub prompt_digest: String,
    pub label: Label,
    /// Topic inherited from the fake parent (standard generations only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
}

/// Row type stored in a JSONL dataset.
pub trait Record: Serialize + DeserializeOwned {
    const KIND: DatasetKind;
    fn record_id(&self) -> &str;
    fn validate(&self) -> Result<(), String>;
}

impl Record for NewsArticle {
    const KIND: DatasetKind = DatasetKind::Human;

    fn record_id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Result<(), String> {
        if self.content.trim().is_empty() {
            return Err(format!("article {} has empty content", self.id));
        }
        if !self.topic.allowed_for(self.label) {
            return Err(format!(
                "article {} labelled {} cannot carry topic {:?}",
                self.id, self.label, self.topic
            ));
        }
        Ok(())
    }
}

impl Record for GeneratedArticle {
    const KIND: DatasetKind = DatasetKind::Generated;

    fn record_id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Result<(), String> {
        if self.label != Label::Fake {
            return Err(format!("generated article {} must be labelled fake", self.id));
        }
        if self.content.trim().is_empty() {
            return Err(format!("generated article {} has empty content", self.id));
        }
        let fake = self.parent_fake_id.is_some();
        let real = self.parent_true_id.is_some();
        let parents_ok = match self.gen_kind {
            GenKind::Standard => fake && !real,
            GenKind::Mixture => fake && real,
            GenKind::Cot => real,
        };
        if !parents_ok {
            return Err(format!(
                "generated article {} ({:?}) has inconsistent parent ids",
                self.id, self.gen_kind
            ));
        }
        if self.outlet.is_some() != (self.gen_kind == GenKind::Cot) {
            return Err(format!(
                "generated article {}: outlet must be set exactly for CoT generations",
                self.id
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Human,
    Generated,
    /// Detector run records.
    Runs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub kind: DatasetKind,
    pub record_count: usize,
    pub created_at: DateTime<Utc>,
    pub config_digest: String,
}

/// `<dir>/<stem>.manifest.json` for a dataset at `<dir>/<stem>.jsonl`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_file_name(format!("{}.manifest.json", dataset_name(path)))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Writes records as JSONL plus a sibling manifest. The config digest defaults
/// to the SHA-256 of the written bytes.
pub fn write_jsonl<R: Record>(records: &[R], path: &Path) -> Result<DatasetManifest, CorpusError> {
    write_jsonl_with_digest(records, path, None)
}

pub fn write_jsonl_with_digest<R: Record>(
    records: &[R],
    path: &Path,
    config_digest: Option<&str>,
) -> Result<DatasetManifest, CorpusError> {
    let mut body = Vec::new();
    for record in records {
        record.validate().map_err(CorpusError::InvalidRecord)?;
        serde_json::to_writer(&mut body, record)
            .map_err(|e| CorpusError::InvalidRecord(e.to_string()))?;
        body.push(b'\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    out.write_all(&body).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))?;

    let manifest = DatasetManifest {
        name: dataset_name(path),
        kind: R::KIND,
        record_count: records.len(),
        created_at: Utc::now(),
        config_digest: config_digest
            .map(str::to_owned)
            .unwrap_or_else(|| sha256_hex(&body)),
    };
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, json + "\n").map_err(io_err(&mpath))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Option<DatasetManifest>, CorpusError> {
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CorpusError::SchemaMismatch {
            line: e.line(),
            message: format!("manifest {}: {e}", mpath.display()),
        })
}

/// Reads and validates every line. Line numbers in errors are 1-based. When a
/// manifest sits next to the file its record count is checked too.
pub fn read_jsonl<R: Record>(path: &Path) -> Result<Vec<R>, CorpusError> {
    let records = read_jsonl_lines(path)?;
    if let Some(manifest) = read_manifest(path)? {
        if manifest.record_count != records.len() {
            return Err(CorpusError::ManifestMismatch {
                path: path.to_path_buf(),
                declared: manifest.record_count,
                actual: records.len(),
            });
        }
    }
    Ok(records)
}

/// Like [`read_jsonl`] but ignores any manifest. Used for append-style outputs
/// that are being resumed.
pub fn read_jsonl_lines<R: Record>(path: &Path) -> Result<Vec<R>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: R = serde_json::from_str(&line).map_err(|e| CorpusError::SchemaMismatch {
            line: line_no,
            message: e.to_string(),
        })?;
        record
            .validate()
            .map_err(|message| CorpusError::SchemaMismatch {
                line: line_no,
                message,
            })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopicColumnPolicy {
    /// Map the `subject` column onto [`Topic`].
    #[default]
    FromSubject,
    /// Ignore the `subject` column; every topic is `Unknown`.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOutcome {
    pub articles: Vec<NewsArticle>,
    /// Data rows dropped because their `text` cell was blank.
    pub skipped_empty: usize,
}

/// Reads a `title,text,subject,date` CSV into articles, preserving row order.
/// Ids are `<label>-<row>` with the 1-based data row number.
pub fn ingest_human_csv(
    path: &Path,
    label: Label,
    policy: TopicColumnPolicy,
) -> Result<IngestOutcome, CorpusError> {
    let csv_err = |e: csv::Error| CorpusError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let title_col = column("title")?;
    let text_col = column("text")?;
    let subject_col = column("subject")?;

    let mut outcome = IngestOutcome {
        articles: Vec::new(),
        skipped_empty: 0,
    };
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let content = row.get(text_col).unwrap_or("").trim();
        if content.is_empty() {
            outcome.skipped_empty += 1;
            continue;
        }
        let headline = row
            .get(title_col)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_owned);
        let topic = match policy {
            TopicColumnPolicy::FromSubject => {
                let t = Topic::from_subject(row.get(subject_col).unwrap_or(""));
                if t.allowed_for(label) {
                    t
                } else {
                    Topic::Unknown
                }
            }
            TopicColumnPolicy::Ignore => Topic::Unknown,
        };
        outcome.articles.push(NewsArticle {
            id: format!("{label}-{:06}", idx + 1),
            headline,
            content: content.to_string(),
            label,
            topic,
            source_dataset: SourceDataset::Human,
        });
    }
    Ok(outcome)
}

/// Keeps at most `limit` whitespace-delimited words. The result is a prefix of
/// the input ending at the last kept word; text already within the limit is
/// returned unchanged.
pub fn truncate_words(text: &str, limit: usize) -> String {
    let mut words = 0;
    let mut kept_end = 0;
    let mut in_word = false;
    for (pos, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_word && words == limit {
                kept_end = pos;
            }
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
            if words > limit {
                return text[..kept_end].to_string();
            }
        }
    }
    text.to_string()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Seeded sample without replacement. `n == records.len()` yields a permutation.
pub fn sample<T: Clone>(records: &[T], n: usize, seed: u64) -> Result<Vec<T>, CorpusError> {
    if n > records.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, records.len(), n)
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}

/// Per-label counts, so a human corpus can report fake and real totals separately.
pub fn label_counts(articles: &[NewsArticle]) -> (usize, usize) {
    let fake = articles.iter().filter(|a| a.label == Label::Fake).count();
    (fake, articles.len() - fake)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("in.csv");
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn ingest_maps_subjects() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "title,text,subject,date\n\
             A,first body,politics,\"Dec 31, 2017\"\n\
             B,second body,Government News,\"Dec 30, 2017\"\n\
             C,third body,left-news,\"Dec 29, 2017\"\n",
        );
        let out = ingest_human_csv(&path, Label::Fake, TopicColumnPolicy::FromSubject).unwrap();
        let topics: Vec<Topic> = out.articles.iter().map(|a| a.topic).collect();
        assert_eq!(
            topics,
            vec![Topic::Politics, Topic::GovernmentNews, Topic::LeftNews]
        );
        assert_eq!(out.skipped_empty, 0);
        assert_eq!(out.articles[0].headline.as_deref(), Some("A"));
        assert_eq!(out.articles[2].content, "third body");
    }

    #[test]
    fn ingest_skips_empty_text_and_keeps_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "title,text,subject,date\nt1,one,News,d\nt2,two,News,d\nt3,  ,News,d\nt4,four,News,d\nt5,five,News,d\n",
        );
        let out = ingest_human_csv(&path, Label::Fake, TopicColumnPolicy::FromSubject).unwrap();
        assert_eq!(out.articles.len(), 4);
        assert_eq!(out.skipped_empty, 1);
        let bodies: Vec<&str> = out.articles.iter().map(|a| a.content.as_str()).collect();
        assert_eq!(bodies, ["one", "two", "four", "five"]);
    }

    #[test]
    fn ingest_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "title,text,subject,date\n");
        let out = ingest_human_csv(&path, Label::True, TopicColumnPolicy::FromSubject).unwrap();
        assert!(out.articles.is_empty());
    }

    #[test]
    fn ingest_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "title,body,subject,date\nx,y,z,w\n");
        let err = ingest_human_csv(&path, Label::True, TopicColumnPolicy::FromSubject).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(c) if c == "text"));
    }

    #[test]
    fn ingest_label_topic_mismatch_becomes_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "title,text,subject,date\nx,body,worldnews,d\n");
        let out = ingest_human_csv(&path, Label::Fake, TopicColumnPolicy::FromSubject).unwrap();
        assert_eq!(out.articles[0].topic, Topic::Unknown);
    }

    #[test]
    fn truncate_examples() {
        let long: Vec<String> = (0..600).map(|i| format!("w{i}")).collect();
        let text = long.join(" ");
        let cut = truncate_words(&text, 500);
        assert_eq!(word_count(&cut), 500);
        assert_eq!(cut, long[..500].join(" "));

        let short = "one two three four five six seven eight nine ten";
        assert_eq!(truncate_words(short, 500), short);

        let exact = long[..500].join(" ");
        assert_eq!(truncate_words(&exact, 500), exact);
    }

    #[test]
    fn truncate_keeps_original_spacing() {
        assert_eq!(truncate_words("a \n b\t\tc d", 3), "a \n b\t\tc");
        assert_eq!(truncate_words("  lead  trail  ", 5), "  lead  trail  ");
    }

    #[test]
    fn sample_edge_cases() {
        let items: Vec<u32> = (0..20).collect();
        assert!(sample(&items, 0, 1).unwrap().is_empty());
        let mut perm = sample(&items, 20, 7).unwrap();
        perm.sort_unstable();
        assert_eq!(perm, items);
        assert_eq!(sample(&items, 5, 42).unwrap(), sample(&items, 5, 42).unwrap());
        assert!(matches!(
            sample(&items, 21, 0),
            Err(CorpusError::SampleTooLarge { requested: 21, available: 20 })
        ));
    }

    #[test]
    fn generated_parent_constraints() {
        let base = GeneratedArticle {
            id: "g1".into(),
            parent_fake_id: Some("f1".into()),
            parent_true_id: None,
            content: "text".into(),
            gen_kind: GenKind::Standard,
            outlet: None,
            model_name: "m".into(),
            prompt_digest: "00".into(),
            label: Label::Fake,
            topic: None,
        };
        assert!(base.validate().is_ok());
        let mixture_missing_true = GeneratedArticle {
            gen_kind: GenKind::Mixture,
            ..base.clone()
        };
        assert!(mixture_missing_true.validate().is_err());
        let cot_without_outlet = GeneratedArticle {
            gen_kind: GenKind::Cot,
            parent_true_id: Some("t1".into()),
            ..base.clone()
        };
        assert!(cot_without_outlet.validate().is_err());
        let cot = GeneratedArticle {
            outlet: Some(Outlet::Reuters),
            ..cot_without_outlet
        };
        assert!(cot.validate().is_ok());
        let labelled_true = GeneratedArticle {
            label: Label::True,
            ..base
        };
        assert!(labelled_true.validate().is_err());
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let articles: Vec<NewsArticle> = (0..10)
            .map(|i| NewsArticle {
                id: format!("a{i}"),
                headline: None,
                content: format!("body {i}"),
                label: Label::True,
                topic: Topic::WorldNews,
                source_dataset: SourceDataset::Human,
            })
            .collect();
        write_jsonl(&articles, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[6] = lines[6].replace("\"content\"", "\"contnt\"");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = read_jsonl::<NewsArticle>(&path).unwrap_err();
        assert!(matches!(err, CorpusError::SchemaMismatch { line: 7, .. }), "{err}");
    }

    #[test]
    fn empty_write_has_zero_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let m = write_jsonl::<GeneratedArticle>(&[], &path).unwrap();
        assert_eq!(m.record_count, 0);
        assert_eq!(m.name, "empty");
        assert!(dir.path().join("empty.manifest.json").exists());
        assert!(read_jsonl::<GeneratedArticle>(&path).unwrap().is_empty());
    }

    #[test]
    fn manifest_count_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let a = NewsArticle {
            id: "a".into(),
            headline: None,
            content: "c".into(),
            label: Label::Fake,
            topic: Topic::Politics,
            source_dataset: SourceDataset::Human,
        };
        write_jsonl(&[a.clone(), a], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.lines().next().unwrap().to_string() + "\n").unwrap();
        assert!(matches!(
            read_jsonl::<NewsArticle>(&path),
            Err(CorpusError::ManifestMismatch { declared: 2, actual: 1, .. })
        ));
    }
}
