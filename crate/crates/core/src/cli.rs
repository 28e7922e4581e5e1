//! The `affalign` command line.
//!
//! Each subcommand runs one stage and stores its artifact in the work
//! directory. A stage whose inputs are missing computes them first, so
//! `align` on a fresh work directory is equivalent to `run-all`.
//!
//! Exit codes: 0 on success, 1 when some (model, mode) cells failed, 2 on a
//! fatal configuration or IO error.

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, Config, LoadedConfig};
use crate::generation::{CompletionBackend, GenerationCache, HttpBackend, ReplayBackend, UnavailableBackend};
use crate::ingest::{
    build_corpora, load_records, CorpusMap, DomainBiasMap, IngestOptions, IngestSummary, TopicConfig, TopicCorpus,
};
use crate::metrics::AffectVector;
use crate::pipeline::{
    assemble_report, generate_corpora, score_corpora, AlignmentReport, DistributionSet, ExperimentInputs,
    ExperimentSpec, GeneratedCorpora,
};
use crate::prompts::{self, Catalog};
use crate::report::emit_report;
use crate::scoring::{ScoreCache, Scorer, ScorerKind, ScoringError};
use crate::taxonomy::Taxonomy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

const CORPORA_FILE: &str = "corpora.json";
const GENERATIONS_FILE: &str = "generations.json";
const DISTRIBUTIONS_FILE: &str = "distributions.json";
const ALIGNMENT_FILE: &str = "alignment.json";

type Fatal = Box<dyn Error>;

#[derive(Debug, Parser)]
#[command(
    name = "affalign",
    version,
    about = "Affective alignment of language models with partisan human corpora"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "affalign.toml")]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set data.min_per_group=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Never touch the network; cache misses become errors.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Report directory; overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load, label, tag and filter human records.
    Ingest,
    /// Collect model responses for every model, mode and topic.
    Generate,
    /// Score human and generated corpora.
    Score,
    /// Compute alignment, baselines and significance, then write the report.
    Align,
    /// Write the report from the last alignment.
    Report,
    /// Every stage from scratch.
    RunAll,
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorporaArtifact {
    summary: IngestSummary,
    corpora: Vec<TopicCorpus>,
}

struct Workspace {
    loaded: LoadedConfig,
    spec: ExperimentSpec,
    work: PathBuf,
    out: PathBuf,
    offline: bool,
}

impl Workspace {
    fn new(cli: &Cli) -> Result<Self, Fatal> {
        let loaded = Config::load(&cli.config, &cli.overrides)?;
        let spec = loaded.config.experiment_spec();
        let work = loaded.resolve(&loaded.config.work_dir);
        let out = match &cli.out {
            Some(o) => o.clone(),
            None => loaded.resolve(&loaded.config.out_dir),
        };
        fs::create_dir_all(&work).map_err(|e| format!("{}: {e}", work.display()))?;
        Ok(Self {
            loaded,
            spec,
            work,
            out,
            offline: cli.offline,
        })
    }

    fn config(&self) -> &Config {
        &self.loaded.config
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.work.join(name)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Fatal> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, Fatal> {
    if !path.exists() {
        return Ok(None);
    }
    let content = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value = serde_json::from_str(&content).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Some(value))
}

fn ingest(ws: &Workspace) -> Result<CorpusMap, Fatal> {
    let cfg = ws.config();
    let loaded = load_records(&ws.loaded.resolve(&cfg.data.records), cfg.record_format()?)?;
    let topics = TopicConfig::load(&ws.loaded.resolve(&cfg.data.topics))?;
    topics.validate()?;
    let bias = match &cfg.data.domain_bias {
        Some(p) => Some(DomainBiasMap::load(&ws.loaded.resolve(p))?),
        None => None,
    };
    let (corpora, summary) = build_corpora(
        loaded,
        &IngestOptions {
            topics: &topics.topics,
            domain_bias: bias.as_ref(),
            ideology_threshold: cfg.data.ideology_threshold,
            min_per_group: cfg.data.min_per_group,
            drop_duplicates: cfg.data.drop_duplicates,
        },
    )?;
    log::info!(
        "ingested {} records ({} empty, {} duplicates dropped); kept topics {:?}",
        summary.loaded,
        summary.dropped_empty,
        summary.duplicates_removed,
        summary.topics_kept
    );
    for (topic, lib, con) in &summary.topics_excluded {
        log::info!("excluded topic `{topic}`: {lib} liberal, {con} conservative texts");
    }
    write_json(
        &ws.artifact(CORPORA_FILE),
        &CorporaArtifact {
            summary,
            corpora: corpora.values().cloned().collect(),
        },
    )?;
    Ok(corpora)
}

fn load_or_ingest(ws: &Workspace) -> Result<CorpusMap, Fatal> {
    match read_json::<CorporaArtifact>(&ws.artifact(CORPORA_FILE))? {
        Some(a) => Ok(a.corpora.into_iter().map(|c| ((c.topic.clone(), c.group), c)).collect()),
        None => ingest(ws),
    }
}

/// Refuses every request; cached scores are still served.
struct OfflineScorer(Box<dyn Scorer>);

impl Scorer for OfflineScorer {
    fn taxonomy(&self) -> Taxonomy {
        self.0.taxonomy()
    }

    fn version(&self) -> &str {
        self.0.version()
    }

    fn batch_size(&self) -> usize {
        self.0.batch_size()
    }

    fn score_chunk(&self, _texts: &[String]) -> Result<Vec<AffectVector>, ScoringError> {
        Err(ScoringError::ScorerUnavailable(
            "scores not cached and network access is disabled".into(),
        ))
    }
}

struct Resources {
    backends: BTreeMap<String, Box<dyn CompletionBackend>>,
    scorers: BTreeMap<Taxonomy, Box<dyn Scorer>>,
    catalog: Catalog,
    generation_cache: GenerationCache,
    score_cache: ScoreCache,
}

impl Resources {
    fn new(ws: &Workspace) -> Result<Self, Fatal> {
        let cfg = ws.config();
        let mut backends: BTreeMap<String, Box<dyn CompletionBackend>> = BTreeMap::new();
        for (m, spec) in cfg.models.iter().zip(&ws.spec.models) {
            let backend: Box<dyn CompletionBackend> = match m.backend {
                BackendKind::Replay => {
                    let path = ws.loaded.resolve(m.replay.as_ref().expect("validated"));
                    Box::new(ReplayBackend::load(&path)?)
                }
                BackendKind::Http if ws.offline => Box::new(UnavailableBackend("network access is disabled".into())),
                BackendKind::Http => match HttpBackend::new(&spec.generation) {
                    Ok(b) => Box::new(b),
                    Err(e) => {
                        log::warn!("model `{}`: {e}", m.name);
                        Box::new(UnavailableBackend(e.to_string()))
                    }
                },
            };
            backends.insert(m.name.clone(), backend);
        }
        let mut scorers: BTreeMap<Taxonomy, Box<dyn Scorer>> = BTreeMap::new();
        for d in &cfg.scorers {
            if !cfg.taxonomies.contains(&d.taxonomy) {
                continue;
            }
            let scorer = d.build(&ws.loaded.base_dir)?;
            let scorer = if ws.offline && d.kind == ScorerKind::Remote {
                Box::new(OfflineScorer(scorer))
            } else {
                scorer
            };
            scorers.insert(d.taxonomy, scorer);
        }
        let catalog = match &cfg.catalog {
            Some(p) => Catalog::load(&ws.loaded.resolve(p))?,
            None => prompts::catalog().clone(),
        };
        let cache_dir = ws.work.join("cache");
        Ok(Self {
            backends,
            scorers,
            catalog,
            generation_cache: GenerationCache::open(&cache_dir.join("generations.jsonl"))?,
            score_cache: ScoreCache::open(&cache_dir.join("scores.jsonl"))?,
        })
    }

    fn inputs<'a>(&'a self, human: &'a CorpusMap) -> ExperimentInputs<'a> {
        ExperimentInputs {
            human,
            backends: &self.backends,
            scorers: &self.scorers,
            catalog: &self.catalog,
            generation_cache: Some(&self.generation_cache),
            score_cache: Some(&self.score_cache),
            offline: false,
        }
    }
}

fn generate(ws: &Workspace, res: &Resources, human: &CorpusMap) -> Result<GeneratedCorpora, Fatal> {
    let generated = generate_corpora(&ws.spec, &res.inputs(human))?;
    write_json(&ws.artifact(GENERATIONS_FILE), &generated)?;
    Ok(generated)
}

fn load_or_generate(ws: &Workspace, res: &Resources, human: &CorpusMap) -> Result<GeneratedCorpora, Fatal> {
    match read_json(&ws.artifact(GENERATIONS_FILE))? {
        Some(g) => Ok(g),
        None => generate(ws, res, human),
    }
}

fn score(
    ws: &Workspace,
    res: &Resources,
    human: &CorpusMap,
    generated: &GeneratedCorpora,
) -> Result<DistributionSet, Fatal> {
    let scored = score_corpora(&ws.spec, &res.inputs(human), generated)?;
    write_json(&ws.artifact(DISTRIBUTIONS_FILE), &scored)?;
    Ok(scored)
}

fn load_or_score(ws: &Workspace, res: &Resources, human: &CorpusMap) -> Result<DistributionSet, Fatal> {
    match read_json(&ws.artifact(DISTRIBUTIONS_FILE))? {
        Some(d) => Ok(d),
        None => {
            let generated = load_or_generate(ws, res, human)?;
            score(ws, res, human, &generated)
        }
    }
}

fn align(ws: &Workspace, scored: &DistributionSet) -> Result<AlignmentReport, Fatal> {
    let report = assemble_report(&ws.spec, scored)?;
    write_json(&ws.artifact(ALIGNMENT_FILE), &report)?;
    Ok(report)
}

fn publish(ws: &Workspace, report: &AlignmentReport) -> Result<i32, Fatal> {
    for path in emit_report(report, &ws.out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(status(&report.errors))
}

fn status<T: std::fmt::Debug>(errors: &[T]) -> i32 {
    for e in errors {
        log::warn!("failed cell: {e:?}");
    }
    if errors.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn execute(cli: &Cli) -> Result<i32, Fatal> {
    let ws = Workspace::new(cli)?;
    if cli.command == Command::Ingest {
        ingest(&ws)?;
        return Ok(EXIT_OK);
    }
    if cli.command == Command::Report {
        if let Some(report) = read_json::<AlignmentReport>(&ws.artifact(ALIGNMENT_FILE))? {
            return publish(&ws, &report);
        }
    }
    let res = Resources::new(&ws)?;
    match cli.command {
        Command::Ingest => unreachable!(),
        Command::Generate => {
            let human = load_or_ingest(&ws)?;
            let generated = generate(&ws, &res, &human)?;
            Ok(status(&generated.errors))
        }
        Command::Score => {
            let human = load_or_ingest(&ws)?;
            let generated = load_or_generate(&ws, &res, &human)?;
            let scored = score(&ws, &res, &human, &generated)?;
            Ok(status(&scored.errors))
        }
        Command::Align | Command::Report => {
            let human = load_or_ingest(&ws)?;
            let scored = load_or_score(&ws, &res, &human)?;
            let report = align(&ws, &scored)?;
            publish(&ws, &report)
        }
        Command::RunAll => {
            let human = ingest(&ws)?;
            let generated = generate(&ws, &res, &human)?;
            let scored = score(&ws, &res, &human, &generated)?;
            let report = align(&ws, &scored)?;
            publish(&ws, &report)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            EXIT_FATAL
        }
    }
}
