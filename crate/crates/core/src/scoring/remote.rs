use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{validate_scores, Scorer, ScorerDescriptor, ScoringError};
use crate::metrics::AffectVector;
use crate::taxonomy::Taxonomy;

/// Body of `POST /score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    /// `emotions` or `moral_foundations`.
    pub task: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub model_version: String,
}

impl ScoreResponse {
    /// Checks shape, label order and value range against the request.
    pub fn validate(self, taxonomy: Taxonomy, n_texts: usize) -> Result<Vec<AffectVector>, ScoringError> {
        if self.labels != taxonomy.labels() {
            return Err(ScoringError::SchemaViolation(format!(
                "labels {:?} are not the canonical {taxonomy} order",
                self.labels
            )));
        }
        if self.scores.len() != n_texts {
            return Err(ScoringError::SchemaViolation(format!(
                "sent {n_texts} texts, got {} score vectors",
                self.scores.len()
            )));
        }
        self.scores.into_iter().map(|v| validate_scores(taxonomy, v)).collect()
    }
}

/// Client for the scoring service.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: reqwest::blocking::Client,
    url: String,
    taxonomy: Taxonomy,
    batch_size: usize,
    max_parallel: usize,
    version: String,
}

impl RemoteScorer {
    pub fn new(descriptor: &ScorerDescriptor) -> Result<Self, ScoringError> {
        let base = descriptor
            .endpoint
            .as_deref()
            .ok_or_else(|| ScoringError::InvalidDescriptor("remote scorer needs an endpoint".into()))?;
        let url = if base.ends_with("/score") {
            base.to_string()
        } else {
            format!("{}/score", base.trim_end_matches('/'))
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(descriptor.timeout_secs))
            .build()
            .map_err(|e| ScoringError::ScorerUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            url,
            taxonomy: descriptor.taxonomy,
            batch_size: descriptor.batch_size,
            max_parallel: descriptor.max_parallel,
            version: descriptor.version.clone(),
        })
    }
}

impl Scorer for RemoteScorer {
    fn taxonomy(&self) -> Taxonomy {
        self.taxonomy
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn max_parallel(&self) -> usize {
        self.max_parallel
    }

    fn score_chunk(&self, texts: &[String]) -> Result<Vec<AffectVector>, ScoringError> {
        let request = ScoreRequest {
            task: self.taxonomy.task_name().to_string(),
            texts: texts.to_vec(),
        };
        let response = self
            .client
            .post(&self.url)
            .json(&request)
            .send()
            .map_err(|e| ScoringError::ScorerUnavailable(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ScoringError::ScorerUnavailable(format!(
                "{} returned {status}",
                self.url
            )));
        }
        if !status.is_success() {
            return Err(ScoringError::SchemaViolation(format!(
                "{} rejected the request with {status}",
                self.url
            )));
        }
        let body: ScoreResponse = response
            .json()
            .map_err(|e| ScoringError::SchemaViolation(e.to_string()))?;
        body.validate(self.taxonomy, texts.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(scores: Vec<Vec<f64>>, taxonomy: Taxonomy) -> ScoreResponse {
        ScoreResponse {
            scores,
            labels: taxonomy.labels().iter().map(|s| s.to_string()).collect(),
            model_version: "stub".into(),
        }
    }

    #[test]
    fn validates_shape() {
        let ok = response(vec![vec![0.1; 11], vec![0.9; 11]], Taxonomy::Emotion);
        assert_eq!(ok.validate(Taxonomy::Emotion, 2).unwrap().len(), 2);
        let short = response(vec![vec![0.1; 10]], Taxonomy::Emotion);
        assert!(matches!(
            short.validate(Taxonomy::Emotion, 1),
            Err(ScoringError::SchemaViolation(_))
        ));
        let count = response(vec![vec![0.1; 10]], Taxonomy::Moral);
        assert!(count.validate(Taxonomy::Moral, 2).is_err());
        let mut labels = response(vec![vec![0.1; 10]], Taxonomy::Moral);
        labels.labels.swap(0, 1);
        assert!(labels.validate(Taxonomy::Moral, 1).is_err());
    }

    #[test]
    fn endpoint_url() {
        let d = ScorerDescriptor {
            kind: super::super::ScorerKind::Remote,
            taxonomy: Taxonomy::Emotion,
            endpoint: Some("http://localhost:8000/".into()),
            lexicon: None,
            batch_size: 8,
            max_parallel: 1,
            timeout_secs: 5,
            version: "v".into(),
        };
        assert_eq!(RemoteScorer::new(&d).unwrap().url, "http://localhost:8000/score");
    }
}
