//! Corpus ingestion: record loading, domain-bias ideology labeling, keyword
//! topic tagging and the minimum-count filter.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

/// Topics need at least this many texts from each group by default.
pub const DEFAULT_MIN_PER_GROUP: usize = 1000;
pub const DEFAULT_IDEOLOGY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: u64, field: &'static str },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("cannot infer record format from `{0}` (expected .jsonl or .csv)")]
    UnknownFormat(PathBuf),
    #[error("invalid topic config: {0}")]
    InvalidTopics(String),
    #[error("ideology threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("minimum per group must be at least 1")]
    InvalidMinimum,
    #[error("no topic has at least {min_per_group} texts from both groups")]
    EmptyResult { min_per_group: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ideology {
    Liberal,
    Conservative,
}

impl Ideology {
    pub const BOTH: [Ideology; 2] = [Ideology::Liberal, Ideology::Conservative];

    pub fn as_str(self) -> &'static str {
        match self {
            Ideology::Liberal => "liberal",
            Ideology::Conservative => "conservative",
        }
    }

    pub fn opposite(self) -> Ideology {
        match self {
            Ideology::Liberal => Ideology::Conservative,
            Ideology::Conservative => Ideology::Liberal,
        }
    }
}

impl fmt::Display for Ideology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ideology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "liberal" => Ok(Ideology::Liberal),
            "conservative" => Ok(Ideology::Conservative),
            other => Err(format!("unknown ideology `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub text: String,
    pub author_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideology: Option<Ideology>,
    #[serde(default)]
    pub shared_domains: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => Ok(RecordFormat::Jsonl),
            Some("csv") => Ok(RecordFormat::Csv),
            _ => Err(IngestError::UnknownFormat(path.to_path_buf())),
        }
    }
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(format!("unknown record format `{other}`")),
        }
    }
}

/// Records as loaded, with the number of empty-text rows skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<SourceRecord>,
    pub dropped_empty: usize,
}

#[derive(Deserialize)]
struct RawJsonRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    author_id: Option<serde_json::Value>,
    #[serde(default)]
    ideology: Option<String>,
    #[serde(default)]
    shared_domains: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawCsvRecord {
    id: Option<String>,
    text: Option<String>,
    author_id: Option<String>,
    #[serde(default)]
    ideology: Option<String>,
    #[serde(default)]
    shared_domains: Option<String>,
}

fn id_string(v: serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_ideology(line: u64, raw: Option<String>) -> Result<Option<Ideology>, IngestError> {
    match raw {
        None => Ok(None),
        Some(s) if s.trim().is_empty() => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|message| IngestError::Parse { line, message }),
    }
}

fn normalize_domain(domain: &str) -> String {
    let lower = domain.trim().to_ascii_lowercase();
    lower.strip_prefix("www.").map(str::to_string).unwrap_or(lower)
}

struct RecordBuilder {
    seen: HashSet<String>,
    loaded: LoadedRecords,
}

impl RecordBuilder {
    fn new() -> Self {
        Self {
            seen: HashSet::new(),
            loaded: LoadedRecords {
                records: Vec::new(),
                dropped_empty: 0,
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        line: u64,
        id: Option<String>,
        text: Option<String>,
        author_id: Option<String>,
        ideology: Option<Ideology>,
        shared_domains: Vec<String>,
    ) -> Result<(), IngestError> {
        let id = id.ok_or(IngestError::MissingField { line, field: "id" })?;
        let text = text.ok_or(IngestError::MissingField { line, field: "text" })?;
        let author_id = author_id.ok_or(IngestError::MissingField {
            line,
            field: "author_id",
        })?;
        if !self.seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line, id });
        }
        if text.trim().is_empty() {
            self.loaded.dropped_empty += 1;
            return Ok(());
        }
        self.loaded.records.push(SourceRecord {
            id,
            text,
            author_id,
            ideology,
            shared_domains: shared_domains
                .iter()
                .map(|d| normalize_domain(d))
                .filter(|d| !d.is_empty())
                .collect(),
        });
        Ok(())
    }
}

/// Loads labeled records. Input order is preserved; empty texts are
/// dropped and counted.
pub fn load_records(path: &Path, format: RecordFormat) -> Result<LoadedRecords, IngestError> {
    let content = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        RecordFormat::Jsonl => parse_jsonl(&content),
        RecordFormat::Csv => parse_csv(&content),
    }
}

pub fn parse_jsonl(content: &str) -> Result<LoadedRecords, IngestError> {
    let mut builder = RecordBuilder::new();
    for (i, raw_line) in content.lines().enumerate() {
        let line = i as u64 + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawJsonRecord = serde_json::from_str(raw_line).map_err(|e| IngestError::Parse {
            line,
            message: e.to_string(),
        })?;
        let ideology = parse_ideology(line, raw.ideology)?;
        builder.push(
            line,
            raw.id.and_then(id_string),
            raw.text,
            raw.author_id.and_then(id_string),
            ideology,
            raw.shared_domains.unwrap_or_default(),
        )?;
    }
    Ok(builder.loaded)
}

pub fn parse_csv(content: &str) -> Result<LoadedRecords, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for field in ["id", "text", "author_id"] {
        if !headers.iter().any(|h| h == field) {
            return Err(IngestError::MissingField { line: 1, field });
        }
    }
    let mut builder = RecordBuilder::new();
    for result in reader.records() {
        let row = result.map_err(|e| IngestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let raw: RawCsvRecord = row.deserialize(Some(&headers)).map_err(|e| IngestError::Parse {
            line,
            message: e.to_string(),
        })?;
        let ideology = parse_ideology(line, raw.ideology)?;
        let domains = raw
            .shared_domains
            .map(|s| s.split('|').map(str::to_string).collect())
            .unwrap_or_default();
        builder.push(
            line,
            raw.id.filter(|s| !s.is_empty()),
            raw.text,
            raw.author_id.filter(|s| !s.is_empty()),
            ideology,
            domains,
        )?;
    }
    Ok(builder.loaded)
}

/// Removes records whose text exactly repeats an earlier record's text.
/// Returns the kept records and the number removed.
pub fn drop_duplicates_by_text(records: Vec<SourceRecord>) -> (Vec<SourceRecord>, usize) {
    let mut seen = HashSet::new();
    let before = records.len();
    let kept: Vec<SourceRecord> = records.into_iter().filter(|r| seen.insert(r.text.clone())).collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Political bias score per news domain, in `[-1, 1]`, negative leaning left.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainBiasMap {
    scores: HashMap<String, f64>,
}

impl DomainBiasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: &str, score: f64) -> Result<(), String> {
        if !(-1.0..=1.0).contains(&score) {
            return Err(format!("bias score {score} for `{domain}` outside [-1, 1]"));
        }
        self.scores.insert(normalize_domain(domain), score);
        Ok(())
    }

    pub fn get(&self, domain: &str) -> Option<f64> {
        self.scores.get(&normalize_domain(domain)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Reads a `domain,score` csv with a header row.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let content = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content)
    }

    pub fn parse(content: &str) -> Result<Self, IngestError> {
        let mut reader = csv::Reader::from_reader(content.as_bytes());
        let mut map = Self::new();
        for (i, row) in reader.deserialize::<(String, f64)>().enumerate() {
            let line = i as u64 + 2;
            let (domain, score) = row.map_err(|e| IngestError::Parse {
                line,
                message: e.to_string(),
            })?;
            map.insert(&domain, score)
                .map_err(|message| IngestError::Parse { line, message })?;
        }
        Ok(map)
    }
}

impl FromIterator<(String, f64)> for DomainBiasMap {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        let mut map = Self::new();
        for (d, s) in iter {
            map.scores.insert(normalize_domain(&d), s.clamp(-1.0, 1.0));
        }
        map
    }
}

/// Assigns an ideology to records that lack one, from the mean bias of all
/// known domains their author shared. Authors inside the dead zone
/// `[-threshold, threshold]` stay unlabeled.
pub fn label_ideology(
    records: &[SourceRecord],
    bias: &DomainBiasMap,
    threshold: f64,
) -> Result<Vec<SourceRecord>, IngestError> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(IngestError::InvalidThreshold(threshold));
    }
    let mut per_author: HashMap<&str, (f64, usize)> = HashMap::new();
    for r in records {
        for d in &r.shared_domains {
            if let Some(score) = bias.get(d) {
                let e = per_author.entry(&r.author_id).or_insert((0.0, 0));
                e.0 += score;
                e.1 += 1;
            }
        }
    }
    Ok(records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            if out.ideology.is_none() {
                if let Some(&(sum, n)) = per_author.get(r.author_id.as_str()) {
                    let mean = sum / n as f64;
                    out.ideology = if mean < -threshold {
                        Some(Ideology::Liberal)
                    } else if mean > threshold {
                        Some(Ideology::Conservative)
                    } else {
                        None
                    };
                }
            }
            out
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub issue: String,
    pub topic: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicConfig {
    pub topics: Vec<TopicSpec>,
}

impl TopicConfig {
    /// Reads a topic list from `.toml` or `.json`.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let content = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: TopicConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&content).map_err(|e| IngestError::InvalidTopics(e.to_string()))?,
            _ => toml::from_str(&content).map_err(|e| IngestError::InvalidTopics(e.to_string()))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.topics.is_empty() {
            return Err(IngestError::InvalidTopics("no topics".into()));
        }
        let mut names = HashSet::new();
        for t in &self.topics {
            if !names.insert(t.topic.as_str()) {
                return Err(IngestError::InvalidTopics(format!("duplicate topic `{}`", t.topic)));
            }
            if t.keywords.is_empty() {
                return Err(IngestError::InvalidTopics(format!(
                    "topic `{}` has no keywords",
                    t.topic
                )));
            }
            if let Some(k) = t.keywords.iter().find(|k| text::tokens(k).is_empty()) {
                return Err(IngestError::InvalidTopics(format!(
                    "topic `{}` has empty keyword `{k}`",
                    t.topic
                )));
            }
        }
        Ok(())
    }
}

/// Keyword phrases for each topic, pre-tokenized.
#[derive(Debug, Clone)]
pub struct KeywordMatcher {
    topics: Vec<(String, Vec<Vec<String>>)>,
}

impl KeywordMatcher {
    pub fn new(topics: &[TopicSpec]) -> Self {
        Self {
            topics: topics
                .iter()
                .map(|t| (t.topic.clone(), t.keywords.iter().map(|k| text::tokens(k)).collect()))
                .collect(),
        }
    }

    /// Topics whose keywords appear in `text`, in config order.
    pub fn matches<'a>(&'a self, text: &str) -> Vec<&'a str> {
        let tokens = text::tokens(text);
        self.topics
            .iter()
            .filter(|(_, phrases)| phrases.iter().any(|p| text::contains_run(&tokens, p)))
            .map(|(name, _)| name.as_str())
            .collect()
    }
}

/// All texts from one source on one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCorpus {
    pub topic: String,
    pub group: Ideology,
    pub texts: Vec<String>,
    pub count: usize,
}

/// Human corpora keyed by (topic, group).
pub type CorpusMap = BTreeMap<(String, Ideology), TopicCorpus>;

/// Builds one corpus per (topic, group) from records with a known ideology.
/// A record joins every topic whose keywords it contains.
pub fn tag_topics(records: &[SourceRecord], topics: &[TopicSpec]) -> CorpusMap {
    let matcher = KeywordMatcher::new(topics);
    let mut corpora: CorpusMap = BTreeMap::new();
    for t in topics {
        for group in Ideology::BOTH {
            corpora.insert(
                (t.topic.clone(), group),
                TopicCorpus {
                    topic: t.topic.clone(),
                    group,
                    texts: Vec::new(),
                    count: 0,
                },
            );
        }
    }
    for r in records {
        let Some(group) = r.ideology else { continue };
        for topic in matcher.matches(&r.text) {
            let corpus = corpora
                .get_mut(&(topic.to_string(), group))
                .expect("every configured topic has a corpus");
            corpus.texts.push(r.text.clone());
            corpus.count += 1;
        }
    }
    corpora
}

/// Keeps topics where both groups reach `min_per_group` texts.
pub fn filter_min_count(corpora: &CorpusMap, min_per_group: usize) -> Result<CorpusMap, IngestError> {
    if min_per_group == 0 {
        return Err(IngestError::InvalidMinimum);
    }
    let count = |topic: &str, group: Ideology| corpora.get(&(topic.to_string(), group)).map(|c| c.count).unwrap_or(0);
    let kept: CorpusMap = corpora
        .iter()
        .filter(|((topic, _), _)| Ideology::BOTH.iter().all(|g| count(topic, *g) >= min_per_group))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if kept.is_empty() {
        return Err(IngestError::EmptyResult { min_per_group });
    }
    Ok(kept)
}

/// Topic names present in a corpus map, sorted.
pub fn topic_names(corpora: &CorpusMap) -> Vec<String> {
    let mut names: Vec<String> = corpora.keys().map(|(t, _)| t.clone()).collect();
    names.dedup();
    names
}

/// Counts from one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub dropped_empty: usize,
    pub duplicates_removed: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub topics_kept: Vec<String>,
    /// Topics below the per-group minimum, with their (liberal, conservative) counts.
    pub topics_excluded: Vec<(String, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions<'a> {
    pub topics: &'a [TopicSpec],
    pub domain_bias: Option<&'a DomainBiasMap>,
    pub ideology_threshold: f64,
    pub min_per_group: usize,
    pub drop_duplicates: bool,
}

/// Runs deduplication, ideology labeling, topic tagging and the per-group
/// minimum filter over loaded records.
pub fn build_corpora(
    loaded: LoadedRecords,
    options: &IngestOptions<'_>,
) -> Result<(CorpusMap, IngestSummary), IngestError> {
    let mut summary = IngestSummary {
        loaded: loaded.records.len(),
        dropped_empty: loaded.dropped_empty,
        ..Default::default()
    };
    let mut records = loaded.records;
    if options.drop_duplicates {
        let (kept, removed) = drop_duplicates_by_text(records);
        records = kept;
        summary.duplicates_removed = removed;
    }
    if let Some(bias) = options.domain_bias {
        records = label_ideology(&records, bias, options.ideology_threshold)?;
    }
    summary.labeled = records.iter().filter(|r| r.ideology.is_some()).count();
    summary.unlabeled = records.len() - summary.labeled;

    let tagged = tag_topics(&records, options.topics);
    let kept = filter_min_count(&tagged, options.min_per_group)?;
    summary.topics_kept = topic_names(&kept);
    for name in topic_names(&tagged) {
        if !summary.topics_kept.contains(&name) {
            let count = |g| tagged.get(&(name.clone(), g)).map(|c| c.count).unwrap_or(0);
            summary
                .topics_excluded
                .push((name.clone(), count(Ideology::Liberal), count(Ideology::Conservative)));
        }
    }
    Ok((kept, summary))
}
