//! Misclassification accounting over [`RunRecord`]s and report rendering.
//!
//! A record counts as misclassified when a fake article is predicted true.
//! Unparseable answers and refusals are never silently folded into either
//! class: they are counted separately and, under the default
//! [`DenominatorPolicy::ParsedOnly`], left out of the denominator.
//!
//! Rates are kept as exact counts plus an `f64`; rounding happens only when
//! rendering, half-up to two decimals on the integer counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::pipelines::{DetectorSpec, Predicted, RunRecord};
use crate::prompts::CotVariant;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("records mix runs: {0}")]
    MixedRuns(String),
    #[error("reports group on different keys: only in a {only_a:?}, only in b {only_b:?}")]
    KeyMismatch { only_a: Vec<String>, only_b: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorPolicy {
    /// Fake articles with a parsed Fake/True prediction.
    #[default]
    ParsedOnly,
    /// Every fake article, unparseable and refused ones included.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Topic,
    Outlet,
    ModelVariant,
    Dataset,
}

pub const UNKNOWN_GROUP: &str = "unknown";

/// Counts behind one rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub parsed_fake: usize,
    pub fake: usize,
    pub misclassified: usize,
    pub unparseable: usize,
    pub refusals: usize,
}

impl Tally {
    fn add(&mut self, r: &RunRecord) {
        self.total += 1;
        match r.predicted {
            Predicted::Unparseable => self.unparseable += 1,
            Predicted::Refusal => self.refusals += 1,
            _ => {}
        }
        if r.truth == Label::Fake {
            self.fake += 1;
            if r.parsed() {
                self.parsed_fake += 1;
            }
            if r.predicted == Predicted::True {
                self.misclassified += 1;
            }
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let mut t = Tally::default();
        for r in records {
            t.add(r);
        }
        t
    }

    pub fn denominator(&self, policy: DenominatorPolicy) -> usize {
        match policy {
            DenominatorPolicy::ParsedOnly => self.parsed_fake,
            DenominatorPolicy::All => self.fake,
        }
    }

    pub fn rate(&self, policy: DenominatorPolicy) -> f64 {
        match self.denominator(policy) {
            0 => 0.0,
            d => self.misclassified as f64 / d as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub total: usize,
    pub misclassified: usize,
    pub denominator: usize,
    pub rate: f64,
}

impl GroupStat {
    fn from_tally(t: &Tally, policy: DenominatorPolicy) -> Self {
        Self {
            total: t.total,
            misclassified: t.misclassified,
            denominator: t.denominator(policy),
            rate: t.rate(policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: DetectorSpec,
    pub model_name: String,
    pub dataset_name: String,
    pub policy: DenominatorPolicy,
    pub total: usize,
    pub denominator: usize,
    pub misclassified: usize,
    pub unparseable: usize,
    pub refusals: usize,
    pub rate: f64,
    pub group_key: Option<GroupKey>,
    pub groups: BTreeMap<String, GroupStat>,
}

fn group_of(r: &RunRecord, key: GroupKey) -> String {
    match key {
        GroupKey::Topic => r.topic.map_or(UNKNOWN_GROUP.into(), |t| t.display_name().into()),
        GroupKey::Outlet => r.outlet.map_or(UNKNOWN_GROUP.into(), |o| o.display_name().into()),
        GroupKey::ModelVariant => format!("{} ({})", r.model_name, r.detector.label()),
        GroupKey::Dataset => r.dataset.clone(),
    }
}

/// Per-group counts and rates; groups with no records never appear.
pub fn group_breakdown(
    records: &[RunRecord],
    key: GroupKey,
    policy: DenominatorPolicy,
) -> BTreeMap<String, GroupStat> {
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    for r in records {
        tallies.entry(group_of(r, key)).or_default().add(r);
    }
    tallies
        .iter()
        .map(|(k, t)| (k.clone(), GroupStat::from_tally(t, policy)))
        .collect()
}

fn single<'a>(records: &'a [RunRecord], what: &str, f: impl Fn(&'a RunRecord) -> &'a str) -> Result<String, EvalError> {
    let first = f(&records[0]);
    match records.iter().map(&f).find(|v| *v != first) {
        Some(other) => Err(EvalError::MixedRuns(format!("{what} {first:?} and {other:?}"))),
        None => Ok(first.to_string()),
    }
}

/// Overall rate for one detector run, optionally broken down by `key`.
/// Records must share one detector and model; they must share one dataset
/// unless the breakdown is by dataset.
pub fn evaluate(
    records: &[RunRecord],
    policy: DenominatorPolicy,
    key: Option<GroupKey>,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(r) = records.iter().find(|r| r.detector != records[0].detector) {
        return Err(EvalError::MixedRuns(format!(
            "detector {} and {}",
            records[0].detector, r.detector
        )));
    }
    let model_name = single(records, "model", |r| r.model_name.as_str())?;
    let dataset_name = if key == Some(GroupKey::Dataset) {
        let mut names: Vec<&str> = Vec::new();
        for r in records {
            if !names.contains(&r.dataset.as_str()) {
                names.push(&r.dataset);
            }
        }
        names.join(",")
    } else {
        single(records, "dataset", |r| r.dataset.as_str())?
    };
    let t = Tally::from_records(records);
    Ok(EvalReport {
        detector: records[0].detector.clone(),
        model_name,
        dataset_name,
        policy,
        total: t.total,
        denominator: t.denominator(policy),
        misclassified: t.misclassified,
        unparseable: t.unparseable,
        refusals: t.refusals,
        rate: t.rate(policy),
        group_key: key,
        groups: key.map(|k| group_breakdown(records, k, policy)).unwrap_or_default(),
    })
}

pub fn misclassification_rate(records: &[RunRecord], policy: DenominatorPolicy) -> Result<EvalReport, EvalError> {
    evaluate(records, policy, None)
}

/// `100 * num / den` rounded half-up to `decimals` places, computed on
/// integers so that e.g. 154/1000 renders as exactly `15.40`.
pub fn percent_half_up(num: usize, den: usize, decimals: u32) -> String {
    if den == 0 {
        return format!("{:.*}", decimals as usize, 0.0);
    }
    let scale = 10u128.pow(decimals);
    let (num, den) = (num as u128, den as u128);
    let scaled = (num * 100 * scale * 2 + den) / (2 * den);
    if decimals == 0 {
        scaled.to_string()
    } else {
        format!("{}.{:0width$}", scaled / scale, scaled % scale, width = decimals as usize)
    }
}

/// Half-up rounding of an arbitrary percentage value (used for deltas).
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value * scale;
    // nudge values that sit a hair below .5 through binary representation
    let nudged = scaled + scaled.signum() * 1e-9;
    (nudged.abs() + 0.5).floor().copysign(value) / scale
}

fn cell(misclassified: usize, denominator: usize) -> String {
    format!("{misclassified} ({}%)", percent_half_up(misclassified, denominator, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

fn policy_name(p: DenominatorPolicy) -> &'static str {
    match p {
        DenominatorPolicy::ParsedOnly => "parsed_only",
        DenominatorPolicy::All => "all",
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

fn render_markdown(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Detector | Dataset | Total | Unparseable | Refusals | Misclassified (↓) |");
    let _ = writeln!(s, "|---|---|---:|---:|---:|---:|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} | {} |",
        r.detector,
        r.dataset_name,
        r.total,
        r.unparseable,
        r.refusals,
        cell(r.misclassified, r.denominator)
    );
    if !r.groups.is_empty() {
        let key = r.group_key.map_or("group".to_string(), |k| format!("{k:?}").to_lowercase());
        let _ = writeln!(s);
        let _ = writeln!(s, "| {key} | Total | Misclassified (↓) |");
        let _ = writeln!(s, "|---|---:|---:|");
        for (name, g) in &r.groups {
            let _ = writeln!(s, "| {name} | {} | {} |", g.total, cell(g.misclassified, g.denominator));
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Denominator: {} ({} articles).", policy_name(r.policy), r.denominator);
    s
}

fn render_csv(r: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "total", "denominator", "misclassified", "rate_percent"])
        .expect("in-memory write");
    w.write_record([
        "overall".to_string(),
        r.total.to_string(),
        r.denominator.to_string(),
        r.misclassified.to_string(),
        percent_half_up(r.misclassified, r.denominator, 2),
    ])
    .expect("in-memory write");
    for (name, g) in &r.groups {
        w.write_record([
            name.clone(),
            g.total.to_string(),
            g.denominator.to_string(),
            g.misclassified.to_string(),
            percent_half_up(g.misclassified, g.denominator, 2),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Per-group rate differences `b - a`, in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub overall: f64,
    pub groups: BTreeMap<String, f64>,
}

pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<ReportDelta, EvalError> {
    let only_a: Vec<String> = a.groups.keys().filter(|k| !b.groups.contains_key(*k)).cloned().collect();
    let only_b: Vec<String> = b.groups.keys().filter(|k| !a.groups.contains_key(*k)).cloned().collect();
    if a.group_key != b.group_key || !only_a.is_empty() || !only_b.is_empty() {
        return Err(EvalError::KeyMismatch { only_a, only_b });
    }
    Ok(ReportDelta {
        overall: 100.0 * (b.rate - a.rate),
        groups: a
            .groups
            .iter()
            .map(|(k, ga)| (k.clone(), 100.0 * (b.groups[k].rate - ga.rate)))
            .collect(),
    })
}

/// Model × detector rows against dataset columns, the layout of an ablation
/// grid table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub policy: DenominatorPolicy,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][col]`; `None` where no record exists.
    pub cells: Vec<Vec<Option<Tally>>>,
}

fn row_order(spec: &DetectorSpec) -> (usize, String) {
    match spec.variant() {
        Some(v) => (CotVariant::ALL.iter().position(|x| *x == v).unwrap_or(usize::MAX), String::new()),
        None => (usize::MAX, spec.label()),
    }
}

/// Rows are ordered by model (first appearance) then by variant in canonical
/// order; columns by first appearance of each dataset.
pub fn grid_table(records: &[RunRecord], policy: DenominatorPolicy) -> Result<GridTable, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut models: Vec<&str> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    for r in records {
        if !models.contains(&r.model_name.as_str()) {
            models.push(&r.model_name);
        }
        if !columns.contains(&r.dataset) {
            columns.push(r.dataset.clone());
        }
    }
    let mut row_keys: Vec<(usize, (usize, String), DetectorSpec)> = Vec::new();
    for r in records {
        let m = models.iter().position(|m| *m == r.model_name).expect("seen");
        if !row_keys.iter().any(|(rm, _, d)| *rm == m && *d == r.detector) {
            row_keys.push((m, row_order(&r.detector), r.detector.clone()));
        }
    }
    row_keys.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));

    let mut cells = vec![vec![None; columns.len()]; row_keys.len()];
    for r in records {
        let m = models.iter().position(|m| *m == r.model_name).expect("seen");
        let row = row_keys.iter().position(|(rm, _, d)| *rm == m && *d == r.detector).expect("seen");
        let col = columns.iter().position(|c| *c == r.dataset).expect("seen");
        cells[row][col].get_or_insert_with(Tally::default).add(r);
    }
    let rows = row_keys
        .iter()
        .map(|(m, _, d)| format!("{} ({})", models[*m], d.label()))
        .collect();
    Ok(GridTable {
        policy,
        rows,
        columns,
        cells,
    })
}

impl GridTable {
    pub fn rate(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row][col].map(|t| t.rate(self.policy))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "dataset", "denominator", "misclassified", "unparseable", "refusals", "rate_percent"])
            .expect("in-memory write");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, col) in self.columns.iter().enumerate() {
                if let Some(t) = self.cells[i][j] {
                    let d = t.denominator(self.policy);
                    w.write_record([
                        row.clone(),
                        col.clone(),
                        d.to_string(),
                        t.misclassified.to_string(),
                        t.unparseable.to_string(),
                        t.refusals.to_string(),
                        percent_half_up(t.misclassified, d, 2),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "| Model (variant) |");
        for c in &self.columns {
            let _ = write!(s, " {c} |");
        }
        let _ = writeln!(s, " Excluded |");
        let _ = write!(s, "|---|");
        for _ in &self.columns {
            let _ = write!(s, "---:|");
        }
        let _ = writeln!(s, "---:|");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "| {row} |");
            let mut excluded = 0;
            for t in &self.cells[i] {
                match t {
                    Some(t) => {
                        excluded += t.unparseable + t.refusals;
                        let _ = write!(s, " {}% |", percent_half_up(t.misclassified, t.denominator(self.policy), 2));
                    }
                    None => {
                        let _ = write!(s, " n/a |");
                    }
                }
            }
            let _ = writeln!(s, " {excluded} |");
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "Misclassification rate (↓), denominator {}. Excluded counts unparseable and refused answers.",
            policy_name(self.policy)
        );
        s
    }
}
