//! Affect taxonomies: the 11 emotions on the Plutchik wheel and the 10 moral
//! foundation categories. Canonical order is fixed and shared by score
//! vectors, the proximity matrix and every wire format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Which affect taxonomy a vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taxonomy {
    Emotion,
    Moral,
}

impl Taxonomy {
    pub const ALL: [Taxonomy; 2] = [Taxonomy::Emotion, Taxonomy::Moral];

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        match self {
            Taxonomy::Emotion => EmotionKind::COUNT,
            Taxonomy::Moral => MoralKind::COUNT,
        }
    }

    /// Category labels in canonical order.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Taxonomy::Emotion => &EMOTION_LABELS,
            Taxonomy::Moral => &MORAL_LABELS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Taxonomy::Emotion => "emotion",
            Taxonomy::Moral => "moral",
        }
    }

    /// Task name used by the remote scoring service.
    pub fn task_name(self) -> &'static str {
        match self {
            Taxonomy::Emotion => "emotions",
            Taxonomy::Moral => "moral_foundations",
        }
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Taxonomy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "emotion" | "emotions" => Ok(Taxonomy::Emotion),
            "moral" | "morals" | "moral_foundations" => Ok(Taxonomy::Moral),
            other => Err(format!("unknown taxonomy `{other}`")),
        }
    }
}

const EMOTION_LABELS: [&str; 11] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
];

const MORAL_LABELS: [&str; 10] = [
    "care",
    "harm",
    "fairness",
    "cheating",
    "loyalty",
    "betrayal",
    "authority",
    "subversion",
    "purity",
    "degradation",
];

/// A position on the emotion wheel, stored as an integer number of
/// eighths of π so that angular arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WheelAngle {
    eighths: i32,
}

impl WheelAngle {
    /// Eighths of π in a full turn.
    pub const TURN: i32 = 16;

    pub const fn from_eighths(eighths: i32) -> Self {
        Self { eighths }
    }

    pub fn eighths(self) -> i32 {
        self.eighths
    }

    pub fn radians(self) -> f64 {
        self.eighths as f64 * std::f64::consts::PI / 8.0
    }

    /// The same direction, `turns` full revolutions further round.
    pub fn shifted_turns(self, turns: i32) -> Self {
        Self {
            eighths: self.eighths + turns * Self::TURN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionKind {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Love,
    Optimism,
    Pessimism,
    Sadness,
    Surprise,
    Trust,
}

impl EmotionKind {
    pub const COUNT: usize = 11;

    pub const ALL: [EmotionKind; 11] = [
        EmotionKind::Anger,
        EmotionKind::Anticipation,
        EmotionKind::Disgust,
        EmotionKind::Fear,
        EmotionKind::Joy,
        EmotionKind::Love,
        EmotionKind::Optimism,
        EmotionKind::Pessimism,
        EmotionKind::Sadness,
        EmotionKind::Surprise,
        EmotionKind::Trust,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        EMOTION_LABELS[self.index()]
    }

    /// Polar angle on the wheel. Love, optimism and pessimism are not
    /// Plutchik primaries and sit between their neighbours.
    pub fn angle(self) -> WheelAngle {
        let eighths = match self {
            EmotionKind::Anger => -4,
            EmotionKind::Anticipation => -2,
            EmotionKind::Disgust => -6,
            EmotionKind::Fear => 4,
            EmotionKind::Joy => 0,
            EmotionKind::Love => 1,
            EmotionKind::Optimism => -1,
            EmotionKind::Pessimism => 7,
            EmotionKind::Sadness => 8,
            EmotionKind::Surprise => 6,
            EmotionKind::Trust => 2,
        };
        WheelAngle::from_eighths(eighths)
    }
}

impl FromStr for EmotionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        EmotionKind::ALL
            .into_iter()
            .find(|e| e.label() == lower)
            .ok_or_else(|| format!("unknown emotion `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoralKind {
    Care,
    Harm,
    Fairness,
    Cheating,
    Loyalty,
    Betrayal,
    Authority,
    Subversion,
    Purity,
    Degradation,
}

impl MoralKind {
    pub const COUNT: usize = 10;

    pub const ALL: [MoralKind; 10] = [
        MoralKind::Care,
        MoralKind::Harm,
        MoralKind::Fairness,
        MoralKind::Cheating,
        MoralKind::Loyalty,
        MoralKind::Betrayal,
        MoralKind::Authority,
        MoralKind::Subversion,
        MoralKind::Purity,
        MoralKind::Degradation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        MORAL_LABELS[self.index()]
    }

    /// The virtue/vice counterpart on the same foundation.
    pub fn counterpart(self) -> MoralKind {
        let i = self.index();
        MoralKind::ALL[i ^ 1]
    }

    /// Foundation name, e.g. `care/harm`.
    pub fn dimension(self) -> &'static str {
        match self.index() / 2 {
            0 => "care/harm",
            1 => "fairness/cheating",
            2 => "loyalty/betrayal",
            3 => "authority/subversion",
            _ => "purity/degradation",
        }
    }
}
