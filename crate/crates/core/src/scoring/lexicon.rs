use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Scorer, ScoringError};
use crate::metrics::AffectVector;
use crate::taxonomy::Taxonomy;
use crate::text;

/// Token → per-category weights, in canonical category order.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    taxonomy: Taxonomy,
    entries: HashMap<String, Vec<f64>>,
}

impl Lexicon {
    pub fn new(taxonomy: Taxonomy) -> Self {
        Self {
            taxonomy,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, weights: Vec<f64>) -> Result<(), ScoringError> {
        let vector = AffectVector::new(self.taxonomy, weights)
            .map_err(|e| ScoringError::InvalidLexicon(format!("`{token}`: {e}")))?;
        let key = token.trim().to_lowercase();
        if key.is_empty() {
            return Err(ScoringError::InvalidLexicon("empty token".into()));
        }
        self.entries.insert(key, vector.into_values());
        Ok(())
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Reads a csv whose header is `token` followed by the taxonomy's
    /// category labels in canonical order.
    pub fn load(path: &Path, taxonomy: Taxonomy) -> Result<Self, ScoringError> {
        let content =
            fs::read_to_string(path).map_err(|e| ScoringError::InvalidLexicon(format!("{}: {e}", path.display())))?;
        Self::parse(&content, taxonomy)
    }

    pub fn parse(content: &str, taxonomy: Taxonomy) -> Result<Self, ScoringError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(content.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| ScoringError::InvalidLexicon(e.to_string()))?;
        let expected: Vec<&str> = std::iter::once("token")
            .chain(taxonomy.labels().iter().copied())
            .collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(ScoringError::InvalidLexicon(format!(
                "header must be `{}`",
                expected.join(",")
            )));
        }
        let mut lexicon = Self::new(taxonomy);
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| ScoringError::InvalidLexicon(e.to_string()))?;
            let weights = row
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ScoringError::InvalidLexicon(format!("row {}: {e}", i + 2)))?;
            lexicon.insert(&row[0], weights)?;
        }
        if lexicon.is_empty() {
            return Err(ScoringError::InvalidLexicon("lexicon has no entries".into()));
        }
        Ok(lexicon)
    }
}

/// Sums the weights of every matched token, then squashes each component
/// with `x / (1 + x)` into `[0, 1)`.
pub fn lexicon_score(text: &str, lexicon: &Lexicon) -> AffectVector {
    let mut sums = vec![0.0; lexicon.taxonomy.len()];
    for token in text::tokens(text) {
        if let Some(weights) = lexicon.get(&token) {
            for (s, w) in sums.iter_mut().zip(weights) {
                *s += w;
            }
        }
    }
    AffectVector::new(lexicon.taxonomy, sums.into_iter().map(|x| x / (1.0 + x)).collect())
        .expect("squashed sums of non-negative weights are valid")
}

/// Deterministic offline scorer backed by a [`Lexicon`].
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: Lexicon,
    version: String,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon, version: &str) -> Self {
        Self {
            lexicon,
            version: version.to_string(),
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Scorer for LexiconScorer {
    fn taxonomy(&self) -> Taxonomy {
        self.lexicon.taxonomy
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn score_chunk(&self, texts: &[String]) -> Result<Vec<AffectVector>, ScoringError> {
        Ok(texts.iter().map(|t| lexicon_score(t, &self.lexicon)).collect())
    }
}
