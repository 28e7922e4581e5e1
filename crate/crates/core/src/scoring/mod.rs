//! Turning texts into affect score vectors: a pluggable scorer interface,
//! a lexicon scorer for offline use, a client for the remote scoring
//! service, and a score cache.

mod cache;
mod lexicon;
mod remote;

pub use cache::ScoreCache;
pub use lexicon::{lexicon_score, Lexicon, LexiconScorer};
pub use remote::{RemoteScorer, ScoreRequest, ScoreResponse};

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{normalize, AffectVector, MetricsError};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer response violates schema: {0}")]
    SchemaViolation(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid scorer descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("cannot build a distribution from zero texts")]
    EmptyCorpus,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("score cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Remote,
    Lexicon,
}

/// How to build a scorer for one taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerDescriptor {
    pub kind: ScorerKind,
    pub taxonomy: Taxonomy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    pub version: String,
}

fn default_batch_size() -> usize {
    32
}

fn default_parallel() -> usize {
    2
}

fn default_timeout() -> u64 {
    120
}

impl ScorerDescriptor {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let bad = |m: &str| Err(ScoringError::InvalidDescriptor(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_parallel == 0 {
            return bad("max_parallel must be at least 1");
        }
        if self.version.is_empty() {
            return bad("version tag is empty");
        }
        match (self.kind, &self.endpoint, &self.lexicon) {
            (ScorerKind::Remote, Some(_), None) | (ScorerKind::Lexicon, None, Some(_)) => Ok(()),
            (ScorerKind::Remote, _, _) => bad("remote scorers need an endpoint and no lexicon"),
            (ScorerKind::Lexicon, _, _) => bad("lexicon scorers need a lexicon file and no endpoint"),
        }
    }

    /// Instantiates the scorer. Relative lexicon paths resolve against `base`.
    pub fn build(&self, base: &std::path::Path) -> Result<Box<dyn Scorer>, ScoringError> {
        self.validate()?;
        match self.kind {
            ScorerKind::Lexicon => {
                let path = base.join(self.lexicon.as_ref().unwrap());
                let lexicon = Lexicon::load(&path, self.taxonomy)?;
                Ok(Box::new(LexiconScorer::new(lexicon, &self.version)))
            }
            ScorerKind::Remote => Ok(Box::new(RemoteScorer::new(self)?)),
        }
    }
}

/// A text and its per-category confidences (unnormalized, each in `[0, 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub scores: AffectVector,
}

pub trait Scorer: Send + Sync {
    fn taxonomy(&self) -> Taxonomy;

    /// Tag that changes whenever the underlying model changes.
    fn version(&self) -> &str;

    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn max_parallel(&self) -> usize {
        1
    }

    /// Scores one chunk of at most `batch_size` texts, in order.
    fn score_chunk(&self, texts: &[String]) -> Result<Vec<AffectVector>, ScoringError>;
}

/// Checks a vector returned by a scorer against the taxonomy contract.
pub fn validate_scores(taxonomy: Taxonomy, values: Vec<f64>) -> Result<AffectVector, ScoringError> {
    if values.len() != taxonomy.len() {
        return Err(ScoringError::SchemaViolation(format!(
            "expected {} {taxonomy} scores, got {}",
            taxonomy.len(),
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ScoringError::SchemaViolation(format!("score {v} outside [0, 1]")));
    }
    Ok(AffectVector::new(taxonomy, values)?)
}

type ChunkSlot = Mutex<Option<Result<Vec<AffectVector>, ScoringError>>>;

/// Scores every text, preserving order. Cached texts are not re-scored;
/// the rest are deduplicated, chunked to the scorer's batch size and
/// dispatched on at most `max_parallel` threads.
pub fn score_batch(
    texts: &[String],
    scorer: &dyn Scorer,
    cache: Option<&ScoreCache>,
) -> Result<Vec<ScoredText>, ScoringError> {
    let taxonomy = scorer.taxonomy();
    let version = scorer.version();
    let mut resolved: HashMap<&str, AffectVector> = HashMap::new();
    let mut missing: Vec<String> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for text in texts {
        if !seen.insert(text.as_str()) {
            continue;
        }
        match cache.and_then(|c| c.get(taxonomy, version, text)) {
            Some(values) => {
                resolved.insert(text, validate_scores(taxonomy, values)?);
            }
            None => missing.push(text.clone()),
        }
    }

    let chunks: Vec<&[String]> = missing.chunks(scorer.batch_size().max(1)).collect();
    let results: Vec<ChunkSlot> = chunks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..scorer.max_parallel().max(1).min(chunks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= chunks.len() {
                    break;
                }
                let outcome = scorer.score_chunk(chunks[i]).and_then(|vectors| {
                    if vectors.len() != chunks[i].len() {
                        return Err(ScoringError::SchemaViolation(format!(
                            "sent {} texts, got {} score vectors",
                            chunks[i].len(),
                            vectors.len()
                        )));
                    }
                    vectors
                        .into_iter()
                        .map(|v| validate_scores(taxonomy, v.into_values()))
                        .collect()
                });
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut fresh: HashMap<&str, AffectVector> = HashMap::new();
    for (chunk, result) in chunks.iter().zip(results) {
        let vectors = result.into_inner().unwrap().expect("every chunk scored")?;
        for (text, v) in chunk.iter().zip(vectors) {
            if let Some(c) = cache {
                c.insert(taxonomy, version, text, v.values())?;
            }
            fresh.insert(text, v);
        }
    }

    Ok(texts
        .iter()
        .map(|t| ScoredText {
            text: t.clone(),
            scores: resolved
                .get(t.as_str())
                .or_else(|| fresh.get(t.as_str()))
                .cloned()
                .expect("every text resolved"),
        })
        .collect())
}

/// Component-wise mean of raw confidences over all texts.
pub fn mean_scores(scored: &[ScoredText]) -> Result<AffectVector, ScoringError> {
    let first = scored.first().ok_or(ScoringError::EmptyCorpus)?;
    let taxonomy = first.scores.taxonomy();
    let mut sums = vec![0.0; taxonomy.len()];
    for s in scored {
        if s.scores.taxonomy() != taxonomy {
            return Err(MetricsError::TaxonomyMismatch {
                left: taxonomy,
                right: s.scores.taxonomy(),
            }
            .into());
        }
        for (acc, v) in sums.iter_mut().zip(s.scores.values()) {
            *acc += v;
        }
    }
    let n = scored.len() as f64;
    Ok(AffectVector::new(taxonomy, sums.into_iter().map(|s| s / n).collect())?)
}

/// The corpus's affect distribution: normalized mean confidences.
pub fn corpus_distribution(scored: &[ScoredText]) -> Result<AffectVector, ScoringError> {
    Ok(normalize(&mean_scores(scored)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::EmotionKind;
    use proptest::prelude::*;
    use std::sync::atomic::AtomicU32;

    fn scored(text: &str, pairs: &[(EmotionKind, f64)]) -> ScoredText {
        let mut values = vec![0.0; 11];
        for (e, v) in pairs {
            values[e.index()] = *v;
        }
        ScoredText {
            text: text.into(),
            scores: AffectVector::new(Taxonomy::Emotion, values).unwrap(),
        }
    }

    #[test]
    fn distribution_example() {
        let d = corpus_distribution(&[
            scored("a", &[(EmotionKind::Joy, 0.8), (EmotionKind::Anger, 0.2)]),
            scored("b", &[(EmotionKind::Joy, 0.6)]),
        ])
        .unwrap();
        assert!((d.values()[EmotionKind::Joy.index()] - 0.875).abs() < 1e-15);
        assert!((d.values()[EmotionKind::Anger.index()] - 0.125).abs() < 1e-15);
        assert!(d.is_normalized());
    }

    #[test]
    fn distribution_single_text() {
        let one = scored("a", &[(EmotionKind::Fear, 0.3), (EmotionKind::Trust, 0.1)]);
        let d = corpus_distribution(std::slice::from_ref(&one)).unwrap();
        assert_eq!(d, normalize(&one.scores).unwrap());
    }

    #[test]
    fn distribution_errors() {
        assert_eq!(corpus_distribution(&[]), Err(ScoringError::EmptyCorpus));
        assert!(matches!(
            corpus_distribution(&[scored("z", &[])]),
            Err(ScoringError::Metrics(MetricsError::DegenerateDistribution { .. }))
        ));
    }

    struct Fixed {
        taxonomy: Taxonomy,
        len: usize,
        value: f64,
        batch: usize,
        calls: AtomicU32,
    }

    impl Scorer for Fixed {
        fn taxonomy(&self) -> Taxonomy {
            self.taxonomy
        }
        fn version(&self) -> &str {
            "fixed-v1"
        }
        fn batch_size(&self) -> usize {
            self.batch
        }
        fn score_chunk(&self, texts: &[String]) -> Result<Vec<AffectVector>, ScoringError> {
            self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            // Bypasses AffectVector validation to mimic a misbehaving service.
            Ok(texts
                .iter()
                .map(|_| {
                    serde_json::from_value(serde_json::json!({
                        "taxonomy": self.taxonomy,
                        "values": vec![self.value; self.len],
                    }))
                    .unwrap()
                })
                .collect())
        }
    }

    fn fixed(len: usize, value: f64, batch: usize) -> Fixed {
        Fixed {
            taxonomy: Taxonomy::Emotion,
            len,
            value,
            batch,
            calls: AtomicU32::new(0),
        }
    }

    #[test]
    fn empty_input() {
        let s = fixed(11, 0.5, 4);
        assert!(score_batch(&[], &s, None).unwrap().is_empty());
        assert_eq!(s.calls.load(std::sync::atomic::Ordering::SeqCst), 0);
    }

    #[test]
    fn schema_violations() {
        let texts = vec!["a".to_string()];
        assert!(matches!(
            score_batch(&texts, &fixed(10, 0.5, 4), None),
            Err(ScoringError::SchemaViolation(_))
        ));
        assert!(matches!(
            score_batch(&texts, &fixed(11, 1.5, 4), None),
            Err(ScoringError::SchemaViolation(_))
        ));
    }

    #[test]
    fn batching_and_cache() {
        let s = fixed(11, 0.25, 1);
        let cache = ScoreCache::in_memory();
        let texts = vec!["a".to_string(), "b".to_string(), "a".to_string()];
        let cold = score_batch(&texts, &s, Some(&cache)).unwrap();
        assert_eq!(s.calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        assert_eq!(cold.len(), 3);
        let warm = score_batch(&texts, &s, Some(&cache)).unwrap();
        assert_eq!(s.calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        assert_eq!(cold, warm);
    }

    fn scored_vec() -> impl Strategy<Value = Vec<ScoredText>> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 11), 1..30).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, v)| ScoredText {
                    text: format!("t{i}"),
                    scores: AffectVector::new(Taxonomy::Emotion, v).unwrap(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn mean_is_permutation_invariant(rows in scored_vec(), rotate in 0usize..30) {
            let mut other = rows.clone();
            let k = rotate % other.len();
            other.rotate_left(k);
            other.reverse();
            let a = mean_scores(&rows).unwrap();
            let b = mean_scores(&other).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn raising_a_score_never_lowers_its_mean(rows in scored_vec(), which in 0usize..30, cat in 0usize..11, bump in 0.0f64..1.0) {
            let i = which % rows.len();
            let before = mean_scores(&rows).unwrap().values()[cat];
            let mut raised = rows.clone();
            let mut v = raised[i].scores.values().to_vec();
            v[cat] = (v[cat] + bump).min(1.0);
            raised[i].scores = AffectVector::new(Taxonomy::Emotion, v).unwrap();
            let after = mean_scores(&raised).unwrap().values()[cat];
            prop_assert!(after >= before);
        }
    }
}
