//! Prompt templates for eliciting tweets from language models, and
//! seeded sampling of concrete prompts from them.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Ideology;

pub const TOPIC_SLOT: &str = "[topic]";

const BUNDLED_CATALOG: &str = include_str!("../data/prompt_catalog.json");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid template `{text}`: {reason}")]
    InvalidTemplate { text: String, reason: String },
    #[error("catalog has no templates for {prompt_type}/{model_type}")]
    EmptyCell {
        prompt_type: PromptType,
        model_type: ModelType,
    },
    #[error("catalog: {0}")]
    Load(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptType {
    Default,
    Steered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Base,
    Instruction,
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptType::Default => "default",
            PromptType::Steered => "steered",
        })
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelType::Base => "base",
            ModelType::Instruction => "instruction",
        })
    }
}

impl FromStr for ModelType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(ModelType::Base),
            "instruction" | "instruction_tuned" => Ok(ModelType::Instruction),
            other => Err(format!("unknown model type `{other}`")),
        }
    }
}

/// How a steered template names the persona. The slot is the literal
/// `liberal/conservative`-style pair as it appears in the template text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaWording {
    None,
    LiberalConservative,
    DemocratRepublican,
    DemocraticRepublican,
}

impl PersonaWording {
    pub fn slot(self) -> Option<&'static str> {
        match self {
            PersonaWording::None => None,
            PersonaWording::LiberalConservative => Some("liberal/conservative"),
            PersonaWording::DemocratRepublican => Some("Democrat/Republican"),
            PersonaWording::DemocraticRepublican => Some("Democratic/Republican"),
        }
    }

    pub fn word(self, persona: Ideology) -> Option<&'static str> {
        let pair = match self {
            PersonaWording::None => return None,
            PersonaWording::LiberalConservative => ("liberal", "conservative"),
            PersonaWording::DemocratRepublican => ("Democrat", "Republican"),
            PersonaWording::DemocraticRepublican => ("Democratic", "Republican"),
        };
        Some(match persona {
            Ideology::Liberal => pair.0,
            Ideology::Conservative => pair.1,
        })
    }

    const ALL_SLOTS: [PersonaWording; 3] = [
        PersonaWording::LiberalConservative,
        PersonaWording::DemocratRepublican,
        PersonaWording::DemocraticRepublican,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub text: String,
    pub prompt_type: PromptType,
    pub model_type: ModelType,
    pub persona_wording: PersonaWording,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        let invalid = |reason: &str| PromptError::InvalidTemplate {
            text: self.text.clone(),
            reason: reason.to_string(),
        };
        if self.text.matches(TOPIC_SLOT).count() != 1 {
            return Err(invalid("`[topic]` must appear exactly once"));
        }
        let slots: usize = PersonaWording::ALL_SLOTS
            .iter()
            .map(|w| self.text.matches(w.slot().unwrap()).count())
            .sum();
        match (self.prompt_type, self.persona_wording.slot()) {
            (PromptType::Default, None) if slots == 0 => Ok(()),
            (PromptType::Default, _) => Err(invalid("default templates take no persona")),
            (PromptType::Steered, None) => Err(invalid("steered templates need a persona wording")),
            (PromptType::Steered, Some(slot)) => {
                if slots == 1 && self.text.contains(slot) {
                    Ok(())
                } else {
                    Err(invalid("steered templates need exactly one persona slot"))
                }
            }
        }
    }

    /// Fills the topic and, for steered templates, the persona.
    pub fn render(&self, topic: &str, persona: Option<Ideology>) -> String {
        let mut out = self.text.replacen(TOPIC_SLOT, topic, 1);
        if let (Some(slot), Some(p)) = (self.persona_wording.slot(), persona) {
            out = out.replacen(slot, self.persona_wording.word(p).unwrap(), 1);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub templates: Vec<PromptTemplate>,
}

impl Catalog {
    pub fn from_json(json: &str) -> Result<Self, PromptError> {
        let catalog: Catalog = serde_json::from_str(json).map_err(|e| PromptError::Load(e.to_string()))?;
        for t in &catalog.templates {
            t.validate()?;
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let json = fs::read_to_string(path).map_err(|e| PromptError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    /// Templates of one (prompt type, model type) cell, in catalog order.
    pub fn cell(&self, prompt_type: PromptType, model_type: ModelType) -> Vec<&PromptTemplate> {
        self.templates
            .iter()
            .filter(|t| t.prompt_type == prompt_type && t.model_type == model_type)
            .collect()
    }
}

/// The bundled catalog of 40 templates, 10 per cell.
pub fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| Catalog::from_json(BUNDLED_CATALOG).expect("bundled catalog is valid"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub topic: String,
    pub prompt_type: PromptType,
    pub model_type: ModelType,
    pub persona: Option<Ideology>,
    pub n_samples: usize,
    pub seed: u64,
}

impl PromptPlan {
    pub fn validate(&self) -> Result<(), PromptError> {
        match (self.prompt_type, self.persona) {
            (PromptType::Default, Some(_)) => {
                return Err(PromptError::InvalidPlan("default prompting takes no persona".into()))
            }
            (PromptType::Steered, None) => {
                return Err(PromptError::InvalidPlan("steered prompting needs a persona".into()))
            }
            _ => {}
        }
        if self.n_samples == 0 {
            return Err(PromptError::InvalidPlan("n_samples must be at least 1".into()));
        }
        if self.topic.trim().is_empty() {
            return Err(PromptError::InvalidPlan("topic is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizedPrompt {
    /// Position of the template within its cell.
    pub template_index: usize,
    pub text: String,
}

/// Draws `n_samples` templates uniformly with replacement and renders each.
pub fn realize_detailed(catalog: &Catalog, plan: &PromptPlan) -> Result<Vec<RealizedPrompt>, PromptError> {
    plan.validate()?;
    let cell = catalog.cell(plan.prompt_type, plan.model_type);
    if cell.is_empty() {
        return Err(PromptError::EmptyCell {
            prompt_type: plan.prompt_type,
            model_type: plan.model_type,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    Ok((0..plan.n_samples)
        .map(|_| {
            let template_index = rng.gen_range(0..cell.len());
            RealizedPrompt {
                template_index,
                text: cell[template_index].render(&plan.topic, plan.persona),
            }
        })
        .collect())
}

pub fn realize(catalog: &Catalog, plan: &PromptPlan) -> Result<Vec<String>, PromptError> {
    Ok(realize_detailed(catalog, plan)?.into_iter().map(|p| p.text).collect())
}
