use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{CallError, CompletionBackend, CompletionRequest, GenerationError};

/// Serves canned responses. A prompt may appear on several fixture lines;
/// sample `i` of that prompt gets response `i mod n`.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    table: HashMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct FixtureLine {
    prompt: String,
    response: String,
}

impl ReplayBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, prompt: impl Into<String>, response: impl Into<String>) {
        self.table.entry(prompt.into()).or_default().push(response.into());
    }

    /// Reads a jsonl file of `{prompt, response}` pairs.
    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let content =
            fs::read_to_string(path).map_err(|e| GenerationError::Cache(format!("{}: {e}", path.display())))?;
        Self::parse(&content)
    }

    pub fn parse(content: &str) -> Result<Self, GenerationError> {
        let mut backend = Self::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureLine = serde_json::from_str(line)
                .map_err(|e| GenerationError::Cache(format!("replay line {}: {e}", i + 1)))?;
            backend.push(entry.prompt, entry.response);
        }
        Ok(backend)
    }

    pub fn len(&self) -> usize {
        self.table.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl FromIterator<(String, String)> for ReplayBackend {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        let mut backend = Self::new();
        for (p, r) in iter {
            backend.push(p, r);
        }
        backend
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, CallError> {
        let responses = self.table.get(request.prompt).ok_or(CallError::Missing)?;
        Ok(responses[request.sample_index % responses.len()].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{generate, GenerateOptions, GenerationConfig};

    #[test]
    fn canned_responses() {
        let backend = ReplayBackend::parse(
            "{\"prompt\": \"a\", \"response\": \"first\"}\n\
             {\"prompt\": \"a\", \"response\": \"second\"}\n\
             {\"prompt\": \"b\", \"response\": \"\\\"quoted\\\"\"}\n",
        )
        .unwrap();
        assert_eq!(backend.len(), 3);
        let cfg = GenerationConfig {
            model_name: "replay".into(),
            ..Default::default()
        };
        let prompts: Vec<String> = ["a", "a", "b", "a"].map(String::from).to_vec();
        let out: Vec<String> = generate(&prompts, &cfg, &backend, None, GenerateOptions::default())
            .into_iter()
            .map(|r| r.unwrap().response)
            .collect();
        assert_eq!(out, ["first", "second", "quoted", "second"]);
    }

    #[test]
    fn unknown_prompt() {
        let backend = ReplayBackend::new();
        let cfg = GenerationConfig {
            model_name: "replay".into(),
            ..Default::default()
        };
        let out = generate(&["zzz".into()], &cfg, &backend, None, GenerateOptions::default());
        assert!(matches!(out[0], Err(GenerationError::ReplayMiss { index: 0, .. })));
    }
}
