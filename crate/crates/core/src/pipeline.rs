//! End-to-end experiment: human corpora and model generations are scored,
//! reduced to per-topic affect distributions, and compared.
//!
//! The run is split into stages that each produce a serializable artifact,
//! so a run can resume from any stage:
//!
//! 1. [`generate_corpora`]: prompts are realized and sent to each model.
//! 2. [`score_corpora`]: every corpus is scored into mean confidences.
//! 3. [`assemble_report`]: alignment, partisan baseline and significance.
//!
//! A failing (model, mode) cell is reported in the error annex and left out
//! of the report; it never aborts other cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generation::{generate, CompletionBackend, GenerateOptions, GenerationCache, GenerationConfig};
use crate::ingest::{topic_names, CorpusMap, Ideology};
use crate::metrics::{alignment, default_weighting, normalize, AffectVector, AlignmentScore, MetricsError};
use crate::prompts::{realize, Catalog, ModelType, PromptPlan, PromptType};
use crate::scoring::{mean_scores, score_batch, ScoreCache, Scorer, ScoringError};
use crate::significance::{significance_test, SignificanceResult, DEFAULT_ALPHA, DEFAULT_RESAMPLES};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("human corpora: {0}")]
    Human(String),
    #[error("scoring human {group} corpus for `{topic}`: {source}")]
    HumanScoring {
        topic: String,
        group: Ideology,
        #[source]
        source: ScoringError,
    },
    #[error("partisan baseline: {0}")]
    Baseline(#[from] MetricsError),
}

/// A prompting condition: no persona, or steered towards one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Default,
    LibSteered,
    ConSteered,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Default, Mode::LibSteered, Mode::ConSteered];

    pub fn prompt_type(self) -> PromptType {
        match self {
            Mode::Default => PromptType::Default,
            _ => PromptType::Steered,
        }
    }

    pub fn persona(self) -> Option<Ideology> {
        match self {
            Mode::Default => None,
            Mode::LibSteered => Some(Ideology::Liberal),
            Mode::ConSteered => Some(Ideology::Conservative),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Default => "default",
            Mode::LibSteered => "lib_steered",
            Mode::ConSteered => "con_steered",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown prompting mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub model_type: ModelType,
    pub generation: GenerationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceSettings {
    pub n_resamples: usize,
    pub alpha: f64,
}

impl Default for SignificanceSettings {
    fn default() -> Self {
        Self {
            n_resamples: DEFAULT_RESAMPLES,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub models: Vec<ModelSpec>,
    pub modes: Vec<Mode>,
    pub taxonomies: Vec<Taxonomy>,
    pub seed: u64,
    pub significance: SignificanceSettings,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidSpec(m));
        if self.models.is_empty() {
            return bad("no models".into());
        }
        if self.modes.is_empty() {
            return bad("no prompting modes".into());
        }
        if self.taxonomies.is_empty() {
            return bad("no taxonomies".into());
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return bad(format!("duplicate model `{}`", m.name));
            }
            m.generation
                .validate()
                .map_err(|e| PipelineError::InvalidSpec(format!("model `{}`: {e}", m.name)))?;
        }
        if self.significance.n_resamples == 0 {
            return bad("significance.n_resamples must be at least 1".into());
        }
        Ok(())
    }
}

/// Everything a run reads besides the spec.
pub struct ExperimentInputs<'a> {
    /// Post-filter human corpora.
    pub human: &'a CorpusMap,
    /// Completion backend per model name.
    pub backends: &'a BTreeMap<String, Box<dyn CompletionBackend>>,
    pub scorers: &'a BTreeMap<Taxonomy, Box<dyn Scorer>>,
    pub catalog: &'a Catalog,
    pub generation_cache: Option<&'a GenerationCache>,
    pub score_cache: Option<&'a ScoreCache>,
    /// Every generation cache miss becomes an error, whatever the backend.
    pub offline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellError {
    pub model: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<Taxonomy>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCorpus {
    pub model: String,
    pub mode: Mode,
    pub topic: String,
    /// Non-empty cleaned responses, in sample order.
    pub texts: Vec<String>,
    pub requested: usize,
    pub excluded_empty: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCorpora {
    pub corpora: Vec<GeneratedCorpus>,
    pub errors: Vec<CellError>,
}

/// Stable per-plan seed derived from the run seed.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Stage 1: realize prompts and collect model responses for every
/// (model, mode, topic).
pub fn generate_corpora(
    spec: &ExperimentSpec,
    inputs: &ExperimentInputs<'_>,
) -> Result<GeneratedCorpora, PipelineError> {
    spec.validate()?;
    let topics = topic_names(inputs.human);
    if topics.is_empty() {
        return Err(PipelineError::Human("no topics survived filtering".into()));
    }
    let mut out = GeneratedCorpora::default();
    for model in &spec.models {
        let Some(backend) = inputs.backends.get(&model.name) else {
            for mode in &spec.modes {
                out.errors.push(CellError {
                    model: model.name.clone(),
                    mode: *mode,
                    topic: None,
                    taxonomy: None,
                    message: "no backend configured".into(),
                });
            }
            continue;
        };
        for mode in &spec.modes {
            match generate_cell(spec, inputs, model, *mode, &topics, backend.as_ref()) {
                Ok(mut corpora) => out.corpora.append(&mut corpora),
                Err(e) => {
                    log::warn!("{}/{}: {}", model.name, mode, e.message);
                    out.errors.push(e);
                }
            }
        }
    }
    Ok(out)
}

fn generate_cell(
    spec: &ExperimentSpec,
    inputs: &ExperimentInputs<'_>,
    model: &ModelSpec,
    mode: Mode,
    topics: &[String],
    backend: &dyn CompletionBackend,
) -> Result<Vec<GeneratedCorpus>, CellError> {
    let cell_error = |topic: &str, message: String| CellError {
        model: model.name.clone(),
        mode,
        topic: Some(topic.to_string()),
        taxonomy: None,
        message,
    };
    let mut corpora = Vec::new();
    for topic in topics {
        let plan = PromptPlan {
            topic: topic.clone(),
            prompt_type: mode.prompt_type(),
            model_type: model.model_type,
            persona: mode.persona(),
            n_samples: model.generation.n_per_topic,
            seed: derive_seed(spec.seed, &["prompts", mode.as_str(), topic]),
        };
        let prompts = realize(inputs.catalog, &plan).map_err(|e| cell_error(topic, e.to_string()))?;
        log::info!(
            "{}/{}/{}: generating {} responses",
            model.name,
            mode,
            topic,
            prompts.len()
        );
        let records = generate(
            &prompts,
            &model.generation,
            backend,
            inputs.generation_cache,
            GenerateOptions {
                offline: inputs.offline,
            },
        );
        let mut texts = Vec::with_capacity(records.len());
        let mut excluded_empty = 0;
        for r in records {
            let r = r.map_err(|e| cell_error(topic, e.to_string()))?;
            if r.empty {
                excluded_empty += 1;
            } else {
                texts.push(r.response);
            }
        }
        if excluded_empty > 0 {
            log::info!(
                "{}/{}/{}: excluded {excluded_empty} empty responses",
                model.name,
                mode,
                topic
            );
        }
        corpora.push(GeneratedCorpus {
            model: model.name.clone(),
            mode,
            topic: topic.clone(),
            texts,
            requested: prompts.len(),
            excluded_empty,
        });
    }
    Ok(corpora)
}

/// Where a distribution's texts came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Human { group: Ideology },
    Model { model: String, mode: Mode },
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::Human { group } => format!("human:{group}"),
            Source::Model { model, mode } => format!("model:{model}:{mode}"),
        }
    }
}

/// Mean raw confidences of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    pub source: Source,
    pub taxonomy: Taxonomy,
    pub topic: String,
    pub n_texts: usize,
    pub mean: AffectVector,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionSet {
    pub topics: Vec<String>,
    pub distributions: Vec<TopicDistribution>,
    pub errors: Vec<CellError>,
}

fn score_mean(texts: &[String], scorer: &dyn Scorer, cache: Option<&ScoreCache>) -> Result<AffectVector, ScoringError> {
    let scored = score_batch(texts, scorer, cache)?;
    mean_scores(&scored)
}

/// Stage 2: score human and generated corpora for every taxonomy.
pub fn score_corpora(
    spec: &ExperimentSpec,
    inputs: &ExperimentInputs<'_>,
    generated: &GeneratedCorpora,
) -> Result<DistributionSet, PipelineError> {
    spec.validate()?;
    let topics = topic_names(inputs.human);
    let mut out = DistributionSet {
        topics: topics.clone(),
        distributions: Vec::new(),
        errors: generated.errors.clone(),
    };
    for taxonomy in &spec.taxonomies {
        let scorer = inputs
            .scorers
            .get(taxonomy)
            .ok_or_else(|| PipelineError::InvalidSpec(format!("no scorer configured for {taxonomy}")))?;
        for ((topic, group), corpus) in inputs.human {
            log::info!(
                "scoring human {group} corpus for `{topic}` ({taxonomy}, {} texts)",
                corpus.texts.len()
            );
            let mean = score_mean(&corpus.texts, scorer.as_ref(), inputs.score_cache).map_err(|source| {
                PipelineError::HumanScoring {
                    topic: topic.clone(),
                    group: *group,
                    source,
                }
            })?;
            out.distributions.push(TopicDistribution {
                source: Source::Human { group: *group },
                taxonomy: *taxonomy,
                topic: topic.clone(),
                n_texts: corpus.texts.len(),
                mean,
            });
        }

        let mut cells: BTreeMap<(usize, usize, Mode), Vec<&GeneratedCorpus>> = BTreeMap::new();
        for c in &generated.corpora {
            let model_order = spec.models.iter().position(|m| m.name == c.model);
            let mode_order = spec.modes.iter().position(|m| *m == c.mode);
            let key = (
                model_order.unwrap_or(usize::MAX),
                mode_order.unwrap_or(usize::MAX),
                c.mode,
            );
            cells.entry(key).or_default().push(c);
        }
        for corpora in cells.values() {
            let (model, mode) = (&corpora[0].model, corpora[0].mode);
            let mut scored = Vec::new();
            let mut failure = None;
            for c in corpora {
                log::info!(
                    "scoring {model}/{mode} corpus for `{}` ({taxonomy}, {} texts)",
                    c.topic,
                    c.texts.len()
                );
                match score_mean(&c.texts, scorer.as_ref(), inputs.score_cache) {
                    Ok(mean) => scored.push(TopicDistribution {
                        source: Source::Model {
                            model: model.clone(),
                            mode,
                        },
                        taxonomy: *taxonomy,
                        topic: c.topic.clone(),
                        n_texts: c.texts.len(),
                        mean,
                    }),
                    Err(e) => {
                        failure = Some(CellError {
                            model: model.clone(),
                            mode,
                            topic: Some(c.topic.clone()),
                            taxonomy: Some(*taxonomy),
                            message: e.to_string(),
                        });
                        break;
                    }
                }
            }
            match failure {
                Some(e) => {
                    log::warn!("{model}/{mode}: {}", e.message);
                    out.errors.push(e);
                }
                None => out.distributions.append(&mut scored),
            }
        }
    }
    Ok(out)
}

/// Per-(topic, group) distributions of the human corpora for one taxonomy.
pub type HumanDistributions = BTreeMap<(String, Ideology), AffectVector>;

fn group_map(human: &HumanDistributions, group: Ideology) -> BTreeMap<String, AffectVector> {
    human
        .iter()
        .filter(|((_, g), _)| *g == group)
        .map(|((t, _), v)| (t.clone(), v.clone()))
        .collect()
}

/// Alignment between the liberal and conservative human corpora, weighted
/// the same way as model comparisons.
pub fn partisan_baseline(human: &HumanDistributions, taxonomy: Taxonomy) -> Result<AlignmentScore, MetricsError> {
    let weighting = default_weighting(taxonomy);
    alignment(
        &group_map(human, Ideology::Liberal),
        &group_map(human, Ideology::Conservative),
        weighting.as_ref(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: String,
    pub mode: Mode,
    pub taxonomy: Taxonomy,
    pub liberal: AlignmentScore,
    pub conservative: AlignmentScore,
    /// Absent when fewer than two topics are available.
    pub significance: Option<SignificanceResult>,
    pub significant: Option<bool>,
}

impl CellReport {
    pub fn score(&self, group: Ideology) -> &AlignmentScore {
        match group {
            Ideology::Liberal => &self.liberal,
            Ideology::Conservative => &self.conservative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub taxonomy: Taxonomy,
    pub score: AlignmentScore,
}

/// One bar of a per-topic affect chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub source: String,
    pub taxonomy: Taxonomy,
    pub topic: String,
    pub n_texts: usize,
    /// Mean raw confidence per category, canonical order.
    pub mean_scores: Vec<f64>,
    /// The same, normalized to sum to one.
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub topics: Vec<String>,
    pub alpha: f64,
    pub baselines: Vec<BaselineReport>,
    pub cells: Vec<CellReport>,
    pub distributions: Vec<DistributionRow>,
    pub errors: Vec<CellError>,
}

/// Stage 3: alignment scores, baselines and significance from scored
/// distributions.
pub fn assemble_report(spec: &ExperimentSpec, scored: &DistributionSet) -> Result<AlignmentReport, PipelineError> {
    spec.validate()?;
    let mut report = AlignmentReport {
        topics: scored.topics.clone(),
        alpha: spec.significance.alpha,
        baselines: Vec::new(),
        cells: Vec::new(),
        distributions: Vec::new(),
        errors: scored.errors.clone(),
    };
    let failed: BTreeSet<(&str, Mode)> = scored.errors.iter().map(|e| (e.model.as_str(), e.mode)).collect();

    for taxonomy in &spec.taxonomies {
        let weighting = default_weighting(*taxonomy);
        let of_taxonomy = || scored.distributions.iter().filter(|d| d.taxonomy == *taxonomy);

        let human: HumanDistributions = of_taxonomy()
            .filter_map(|d| match d.source {
                Source::Human { group } => Some(((d.topic.clone(), group), d.mean.clone())),
                _ => None,
            })
            .collect();
        let baseline = partisan_baseline(&human, *taxonomy)?;
        report.baselines.push(BaselineReport {
            taxonomy: *taxonomy,
            score: baseline,
        });
        let liberal = group_map(&human, Ideology::Liberal);
        let conservative = group_map(&human, Ideology::Conservative);

        for model in &spec.models {
            for mode in &spec.modes {
                if failed.contains(&(model.name.as_str(), *mode)) {
                    continue;
                }
                let generated: BTreeMap<String, AffectVector> = of_taxonomy()
                    .filter(
                        |d| matches!(&d.source, Source::Model { model: m, mode: md } if *m == model.name && md == mode),
                    )
                    .map(|d| (d.topic.clone(), d.mean.clone()))
                    .collect();
                if generated.is_empty() {
                    continue;
                }
                let scores = alignment(&generated, &liberal, weighting.as_ref())
                    .and_then(|lib| alignment(&generated, &conservative, weighting.as_ref()).map(|con| (lib, con)));
                let (lib, con) = match scores {
                    Ok(pair) => pair,
                    Err(e) => {
                        report.errors.push(CellError {
                            model: model.name.clone(),
                            mode: *mode,
                            topic: None,
                            taxonomy: Some(*taxonomy),
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                let significance = significance_test(
                    &lib.per_topic,
                    &con.per_topic,
                    spec.significance.n_resamples,
                    derive_seed(
                        spec.seed,
                        &["significance", &model.name, mode.as_str(), taxonomy.as_str()],
                    ),
                )
                .ok();
                report.cells.push(CellReport {
                    model: model.name.clone(),
                    mode: *mode,
                    taxonomy: *taxonomy,
                    liberal: lib,
                    conservative: con,
                    significant: significance.map(|s| s.significant(spec.significance.alpha)),
                    significance,
                });
            }
        }
    }

    for d in &scored.distributions {
        let shares = normalize(&d.mean)
            .map(AffectVector::into_values)
            .unwrap_or_else(|_| vec![0.0; d.taxonomy.len()]);
        report.distributions.push(DistributionRow {
            source: d.source.label(),
            taxonomy: d.taxonomy,
            topic: d.topic.clone(),
            n_texts: d.n_texts,
            mean_scores: d.mean.values().to_vec(),
            shares,
        });
    }
    report.errors.sort();
    report.errors.dedup();
    Ok(report)
}

/// Runs every stage.
pub fn run_experiment(spec: &ExperimentSpec, inputs: &ExperimentInputs<'_>) -> Result<AlignmentReport, PipelineError> {
    let generated = generate_corpora(spec, inputs)?;
    let scored = score_corpora(spec, inputs, &generated)?;
    assemble_report(spec, &scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn human(pairs: &[(&str, Ideology, usize)], taxonomy: Taxonomy) -> HumanDistributions {
        pairs
            .iter()
            .map(|(t, g, i)| ((t.to_string(), *g), AffectVector::one_hot(taxonomy, *i)))
            .collect()
    }

    #[test]
    fn baseline_identical_groups() {
        let h = human(
            &[
                ("a", Ideology::Liberal, 0),
                ("a", Ideology::Conservative, 0),
                ("b", Ideology::Liberal, 4),
                ("b", Ideology::Conservative, 4),
            ],
            Taxonomy::Emotion,
        );
        let s = partisan_baseline(&h, Taxonomy::Emotion).unwrap();
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn baseline_disjoint_point_masses() {
        let h = human(
            &[("a", Ideology::Liberal, 0), ("a", Ideology::Conservative, 1)],
            Taxonomy::Moral,
        );
        let s = partisan_baseline(&h, Taxonomy::Moral).unwrap();
        assert_eq!(s.per_topic["a"], 0.0);
    }

    #[test]
    fn baseline_missing_group() {
        let h = human(
            &[
                ("a", Ideology::Liberal, 0),
                ("a", Ideology::Conservative, 1),
                ("b", Ideology::Liberal, 2),
            ],
            Taxonomy::Moral,
        );
        assert!(matches!(
            partisan_baseline(&h, Taxonomy::Moral),
            Err(MetricsError::TopicSetMismatch { .. })
        ));
    }

    #[test]
    fn baseline_matches_direct_alignment() {
        let h: HumanDistributions = [
            (
                ("a".to_string(), Ideology::Liberal),
                AffectVector::new(
                    Taxonomy::Emotion,
                    vec![0.1, 0.3, 0.0, 0.2, 0.5, 0.1, 0.0, 0.0, 0.2, 0.1, 0.4],
                )
                .unwrap(),
            ),
            (
                ("a".to_string(), Ideology::Conservative),
                AffectVector::new(
                    Taxonomy::Emotion,
                    vec![0.4, 0.1, 0.3, 0.2, 0.1, 0.0, 0.1, 0.3, 0.0, 0.2, 0.1],
                )
                .unwrap(),
            ),
        ]
        .into();
        let direct = alignment(
            &group_map(&h, Ideology::Liberal),
            &group_map(&h, Ideology::Conservative),
            Some(&crate::metrics::ProximityMatrix::build()),
        )
        .unwrap();
        assert_eq!(partisan_baseline(&h, Taxonomy::Emotion).unwrap(), direct);
    }

    #[test]
    fn spec_validation() {
        let spec = ExperimentSpec {
            models: vec![ModelSpec {
                name: "m".into(),
                model_type: ModelType::Base,
                generation: GenerationConfig {
                    model_name: "m".into(),
                    ..Default::default()
                },
            }],
            modes: vec![],
            taxonomies: vec![Taxonomy::Emotion],
            seed: 0,
            significance: SignificanceSettings::default(),
        };
        assert!(matches!(spec.validate(), Err(PipelineError::InvalidSpec(_))));
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!(Mode::ConSteered.persona(), Some(Ideology::Conservative));
        assert_eq!(Mode::Default.prompt_type(), PromptType::Default);
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &["a", "b"]), derive_seed(1, &["a", "b"]));
        assert_ne!(derive_seed(1, &["a", "b"]), derive_seed(1, &["ab", ""]));
        assert_ne!(derive_seed(1, &["a"]), derive_seed(2, &["a"]));
    }
}
