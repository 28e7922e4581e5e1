use std::collections::BTreeMap;
use std::path::Path;

use affect_align::generation::{ApiStyle, CallError, CompletionBackend, CompletionRequest, GenerationConfig};
use affect_align::ingest::{CorpusMap, Ideology, TopicCorpus};
use affect_align::pipeline::{
    run_experiment, AlignmentReport, ExperimentInputs, ExperimentSpec, Mode, ModelSpec, SignificanceSettings,
};
use affect_align::prompts::{catalog, ModelType};
use affect_align::report::{alignment_csv, report_json};
use affect_align::scoring::{Lexicon, LexiconScorer, Scorer};
use affect_align::taxonomy::Taxonomy;

const WORDS: [&str; 12] = [
    "furious", "happy", "afraid", "hopeful", "grief", "reliable", "protect", "law", "equal", "rigged", "sacred",
    "patriot",
];

/// Deterministic pseudo-responses built from the prompt and sample index.
struct Babbler {
    fail_on: Option<&'static str>,
}

impl CompletionBackend for Babbler {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, CallError> {
        if let Some(topic) = self.fail_on {
            if request.prompt.contains(topic) {
                return Err(CallError::Status(400));
            }
        }
        let seed = request.prompt.bytes().fold(request.sample_index as u64, |h, b| {
            h.wrapping_mul(31).wrapping_add(b as u64)
        });
        let words: Vec<&str> = (0..3).map(|k| WORDS[((seed >> (k * 5)) % 12) as usize]).collect();
        Ok(words.join(" "))
    }
}

fn human(topics: &[&str]) -> CorpusMap {
    let mut map = CorpusMap::new();
    for (ti, topic) in topics.iter().enumerate() {
        for (gi, group) in Ideology::BOTH.into_iter().enumerate() {
            let texts: Vec<String> = (0..30)
                .map(|i| {
                    format!(
                        "{} {} {topic}",
                        WORDS[(i + ti) % 12],
                        WORDS[(i * (gi + 2) + 3 * gi) % 12]
                    )
                })
                .collect();
            map.insert(
                (topic.to_string(), group),
                TopicCorpus {
                    topic: topic.to_string(),
                    group,
                    count: texts.len(),
                    texts,
                },
            );
        }
    }
    map
}

fn swap_groups(map: &CorpusMap) -> CorpusMap {
    map.iter()
        .map(|((t, g), c)| {
            let g = match g {
                Ideology::Liberal => Ideology::Conservative,
                Ideology::Conservative => Ideology::Liberal,
            };
            ((t.clone(), g), TopicCorpus { group: g, ..c.clone() })
        })
        .collect()
}

fn scorers() -> BTreeMap<Taxonomy, Box<dyn Scorer>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    let mut out: BTreeMap<Taxonomy, Box<dyn Scorer>> = BTreeMap::new();
    for (taxonomy, file) in [
        (Taxonomy::Emotion, "emotion_lexicon.csv"),
        (Taxonomy::Moral, "moral_lexicon.csv"),
    ] {
        out.insert(
            taxonomy,
            Box::new(LexiconScorer::new(
                Lexicon::load(&dir.join(file), taxonomy).unwrap(),
                "t",
            )),
        );
    }
    out
}

fn spec(models: &[&str], max_parallel: usize) -> ExperimentSpec {
    ExperimentSpec {
        models: models
            .iter()
            .map(|name| ModelSpec {
                name: name.to_string(),
                model_type: ModelType::Instruction,
                generation: GenerationConfig {
                    model_name: name.to_string(),
                    api_style: ApiStyle::Chat,
                    n_per_topic: 20,
                    max_parallel,
                    retry_budget: 1,
                    ..Default::default()
                },
            })
            .collect(),
        modes: Mode::ALL.to_vec(),
        taxonomies: Taxonomy::ALL.to_vec(),
        seed: 99,
        significance: SignificanceSettings::default(),
    }
}

fn run(
    spec: &ExperimentSpec,
    human: &CorpusMap,
    backends: BTreeMap<String, Box<dyn CompletionBackend>>,
) -> AlignmentReport {
    let scorers = scorers();
    run_experiment(
        spec,
        &ExperimentInputs {
            human,
            backends: &backends,
            scorers: &scorers,
            catalog: catalog(),
            generation_cache: None,
            score_cache: None,
            offline: false,
        },
    )
    .unwrap()
}

fn babblers(names: &[&str]) -> BTreeMap<String, Box<dyn CompletionBackend>> {
    names
        .iter()
        .map(|n| {
            (
                n.to_string(),
                Box::new(Babbler { fail_on: None }) as Box<dyn CompletionBackend>,
            )
        })
        .collect()
}

const TOPICS: [&str; 4] = ["gun control", "climate change", "immigration", "abortion"];

#[test]
fn swapping_groups_swaps_scores_and_negates_statistic() {
    let human = human(&TOPICS);
    let spec = spec(&["m"], 2);
    let a = run(&spec, &human, babblers(&["m"]));
    let b = run(&spec, &swap_groups(&human), babblers(&["m"]));
    assert_eq!(a.cells.len(), 6);
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.liberal, y.conservative);
        assert_eq!(x.conservative, y.liberal);
        let (sx, sy) = (x.significance.as_ref().unwrap(), y.significance.as_ref().unwrap());
        assert_eq!(sx.statistic, -sy.statistic);
        assert_eq!(sx.p_value, sy.p_value);
    }
    for (x, y) in a.baselines.iter().zip(&b.baselines) {
        assert_eq!(x.score, y.score);
    }
}

#[test]
fn reports_are_deterministic_across_parallelism() {
    let human = human(&TOPICS);
    let a = run(&spec(&["m", "n"], 1), &human, babblers(&["m", "n"]));
    let b = run(&spec(&["m", "n"], 8), &human, babblers(&["m", "n"]));
    assert_eq!(alignment_csv(&a).unwrap(), alignment_csv(&b).unwrap());
    assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
}

#[test]
fn cells_follow_model_then_mode_order() {
    let human = human(&TOPICS);
    let report = run(&spec(&["zeta", "alpha"], 2), &human, babblers(&["zeta", "alpha"]));
    let order: Vec<(String, Mode)> = report
        .cells
        .iter()
        .filter(|c| c.taxonomy == Taxonomy::Emotion)
        .map(|c| (c.model.clone(), c.mode))
        .collect();
    let expected: Vec<(String, Mode)> = ["zeta", "alpha"]
        .iter()
        .flat_map(|m| Mode::ALL.iter().map(move |mode| (m.to_string(), *mode)))
        .collect();
    assert_eq!(order, expected);
}

#[test]
fn failing_topic_drops_the_cell_only() {
    let human = human(&TOPICS);
    let mut backends = babblers(&["good"]);
    backends.insert(
        "flaky".into(),
        Box::new(Babbler {
            fail_on: Some("climate change"),
        }),
    );
    let report = run(&spec(&["good", "flaky"], 2), &human, backends);
    assert!(report.cells.iter().all(|c| c.model == "good"));
    assert_eq!(report.cells.len(), 6);
    assert_eq!(report.errors.len(), 3);
    assert!(report.errors.iter().all(|e| e.model == "flaky"));
}

#[test]
fn single_topic_has_no_significance() {
    let human = human(&TOPICS[..1]);
    let report = run(&spec(&["m"], 2), &human, babblers(&["m"]));
    assert!(!report.cells.is_empty());
    for cell in &report.cells {
        assert!(cell.significance.is_none());
        assert!(cell.significant.is_none());
        assert_eq!(cell.liberal.n_topics, 1);
    }
}

#[test]
fn scores_are_bounded() {
    let human = human(&TOPICS);
    let report = run(&spec(&["m"], 2), &human, babblers(&["m"]));
    for cell in &report.cells {
        for score in [&cell.liberal, &cell.conservative] {
            assert!(score.per_topic.values().all(|s| (0.0..=1.0).contains(s)));
            assert!((0.0..=1.0).contains(&score.mean));
        }
        let p = cell.significance.as_ref().unwrap().p_value;
        assert!(p > 0.0 && p <= 1.0);
    }
}
