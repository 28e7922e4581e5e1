//! Numeric core: score vectors, the emotion proximity matrix, Jensen-Shannon
//! distance and the topic-averaged alignment score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{EmotionKind, Taxonomy, WheelAngle};

/// Sums below this are treated as an all-zero vector.
pub const DEGENERATE_SUM: f64 = 1e-12;

/// Tolerance on the unit sum of a normalized vector.
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("distribution has no mass (sum {sum:e})")]
    DegenerateDistribution { sum: f64 },
    #[error("taxonomy mismatch: {left} vs {right}")]
    TaxonomyMismatch { left: Taxonomy, right: Taxonomy },
    #[error("vector is not normalized")]
    NotNormalized,
    #[error("{taxonomy} vector must have {expected} values, got {got}")]
    LengthMismatch {
        taxonomy: Taxonomy,
        expected: usize,
        got: usize,
    },
    #[error("value {value} at index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f64 },
    #[error("topic sets differ: only in first {only_left:?}, only in second {only_right:?}")]
    TopicSetMismatch {
        only_left: Vec<String>,
        only_right: Vec<String>,
    },
    #[error("no topics to align")]
    EmptyTopicSet,
    #[error("proximity weighting applies to emotions only, got {0}")]
    WeightingNotApplicable(Taxonomy),
}

/// A score vector over one taxonomy, in canonical category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectVector {
    taxonomy: Taxonomy,
    values: Vec<f64>,
    #[serde(default)]
    normalized: bool,
}

impl AffectVector {
    pub fn new(taxonomy: Taxonomy, values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.len() != taxonomy.len() {
            return Err(MetricsError::LengthMismatch {
                taxonomy,
                expected: taxonomy.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(MetricsError::InvalidValue { index, value });
        }
        Ok(Self {
            taxonomy,
            values,
            normalized: false,
        })
    }

    pub fn zeros(taxonomy: Taxonomy) -> Self {
        Self {
            taxonomy,
            values: vec![0.0; taxonomy.len()],
            normalized: false,
        }
    }

    /// A vector with all mass on one category.
    pub fn one_hot(taxonomy: Taxonomy, index: usize) -> Self {
        let mut v = Self::zeros(taxonomy);
        v.values[index] = 1.0;
        v.normalized = true;
        v
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.taxonomy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Proximity between two wheel positions: `|1 - Δ/π|`, with the angular
/// gap taken modulo a full turn. Exact for positions in eighths of π.
pub fn pea_angles(a: WheelAngle, b: WheelAngle) -> f64 {
    let gap = (a.eighths() - b.eighths()).rem_euclid(WheelAngle::TURN);
    (WheelAngle::TURN / 2 - gap).abs() as f64 / (WheelAngle::TURN / 2) as f64
}

/// Proximity between two arbitrary angles in radians.
pub fn pea_radians(a: f64, b: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let gap = (a - b).rem_euclid(TAU);
    (1.0 - gap / PI).abs()
}

/// Plutchik Emotion Agreement between two emotions.
pub fn pea(a: EmotionKind, b: EmotionKind) -> f64 {
    pea_angles(a.angle(), b.angle())
}

/// The 11×11 emotion proximity matrix in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityMatrix {
    entries: [[f64; EmotionKind::COUNT]; EmotionKind::COUNT],
}

impl ProximityMatrix {
    pub fn build() -> Self {
        let mut entries = [[0.0; EmotionKind::COUNT]; EmotionKind::COUNT];
        for a in EmotionKind::ALL {
            for b in EmotionKind::ALL {
                entries[a.index()][b.index()] = pea(a, b);
            }
        }
        Self { entries }
    }

    pub fn identity() -> Self {
        let mut entries = [[0.0; EmotionKind::COUNT]; EmotionKind::COUNT];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { entries }
    }

    pub fn get(&self, a: EmotionKind, b: EmotionKind) -> f64 {
        self.entries[a.index()][b.index()]
    }

    pub fn entries(&self) -> &[[f64; EmotionKind::COUNT]; EmotionKind::COUNT] {
        &self.entries
    }

    pub fn row(&self, e: EmotionKind) -> &[f64; EmotionKind::COUNT] {
        &self.entries[e.index()]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..EmotionKind::COUNT).all(|i| (0..EmotionKind::COUNT).all(|j| self.entries[i][j] == self.entries[j][i]))
    }

    /// Matrix-vector product `A · v`.
    pub fn apply(&self, v: &[f64]) -> [f64; EmotionKind::COUNT] {
        let mut out = [0.0; EmotionKind::COUNT];
        for (o, row) in out.iter_mut().zip(&self.entries) {
            *o = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }
}

impl Default for ProximityMatrix {
    fn default() -> Self {
        Self::build()
    }
}

/// L1-normalizes a non-negative vector.
pub fn normalize(v: &AffectVector) -> Result<AffectVector, MetricsError> {
    let sum = v.sum();
    if sum < DEGENERATE_SUM {
        return Err(MetricsError::DegenerateDistribution { sum });
    }
    Ok(AffectVector {
        taxonomy: v.taxonomy,
        values: v.values.iter().map(|x| x / sum).collect(),
        normalized: true,
    })
}

/// Spreads emotion mass over neighbouring emotions: `normalize(A · v)`.
pub fn weight_emotions(v: &AffectVector, matrix: &ProximityMatrix) -> Result<AffectVector, MetricsError> {
    if v.taxonomy != Taxonomy::Emotion {
        return Err(MetricsError::WeightingNotApplicable(v.taxonomy));
    }
    let weighted = AffectVector {
        taxonomy: Taxonomy::Emotion,
        values: matrix.apply(&v.values).to_vec(),
        normalized: false,
    };
    normalize(&weighted)
}

/// Jensen-Shannon distance (base 2, square root) between two probability
/// slices of equal length. Zero-probability terms contribute nothing.
pub fn jsd_slices(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "jsd over slices of different length");
    let mut divergence = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if mi <= 0.0 {
            continue;
        }
        let term = |x: f64| if x > 0.0 { 0.5 * x * (x / mi).log2() } else { 0.0 };
        divergence += term(pi) + term(qi);
    }
    divergence.clamp(0.0, 1.0).sqrt()
}

/// Jensen-Shannon distance between two normalized vectors.
pub fn jsd(p: &AffectVector, q: &AffectVector) -> Result<f64, MetricsError> {
    if p.taxonomy != q.taxonomy {
        return Err(MetricsError::TaxonomyMismatch {
            left: p.taxonomy,
            right: q.taxonomy,
        });
    }
    if !p.normalized || !q.normalized {
        return Err(MetricsError::NotNormalized);
    }
    Ok(jsd_slices(&p.values, &q.values))
}

/// Topic-averaged alignment between two sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub per_topic: BTreeMap<String, f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub n_topics: usize,
}

impl AlignmentScore {
    /// Mean and population standard deviation over the per-topic values.
    pub fn from_per_topic(per_topic: BTreeMap<String, f64>) -> Self {
        let n = per_topic.len();
        if n == 0 {
            return Self {
                per_topic,
                mean: f64::NAN,
                std_dev: f64::NAN,
                n_topics: 0,
            };
        }
        let mean = per_topic.values().sum::<f64>() / n as f64;
        let var = per_topic.values().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Self {
            per_topic,
            mean,
            std_dev: var.sqrt(),
            n_topics: n,
        }
    }
}

fn check_topic_sets(
    f: &BTreeMap<String, AffectVector>,
    g: &BTreeMap<String, AffectVector>,
) -> Result<(), MetricsError> {
    let left: BTreeSet<&String> = f.keys().collect();
    let right: BTreeSet<&String> = g.keys().collect();
    if left != right {
        return Err(MetricsError::TopicSetMismatch {
            only_left: left.difference(&right).map(|s| s.to_string()).collect(),
            only_right: right.difference(&left).map(|s| s.to_string()).collect(),
        });
    }
    if left.is_empty() {
        return Err(MetricsError::EmptyTopicSet);
    }
    Ok(())
}

/// Prepares a raw topic distribution for comparison: normalized, then
/// proximity-weighted when a matrix is given.
pub fn prepare(v: &AffectVector, weighting: Option<&ProximityMatrix>) -> Result<AffectVector, MetricsError> {
    let normalized = normalize(v)?;
    match weighting {
        Some(matrix) => weight_emotions(&normalized, matrix),
        None => Ok(normalized),
    }
}

/// `1 - JSD` per topic, averaged over the shared topic set.
pub fn alignment(
    f: &BTreeMap<String, AffectVector>,
    g: &BTreeMap<String, AffectVector>,
    weighting: Option<&ProximityMatrix>,
) -> Result<AlignmentScore, MetricsError> {
    check_topic_sets(f, g)?;
    let mut per_topic = BTreeMap::new();
    for (topic, fv) in f {
        let gv = &g[topic];
        if fv.taxonomy != gv.taxonomy {
            return Err(MetricsError::TaxonomyMismatch {
                left: fv.taxonomy,
                right: gv.taxonomy,
            });
        }
        if weighting.is_some() && fv.taxonomy != Taxonomy::Emotion {
            return Err(MetricsError::WeightingNotApplicable(fv.taxonomy));
        }
        let distance = jsd(&prepare(fv, weighting)?, &prepare(gv, weighting)?)?;
        per_topic.insert(topic.clone(), 1.0 - distance);
    }
    Ok(AlignmentScore::from_per_topic(per_topic))
}

/// The weighting rule used throughout the pipeline: emotions are
/// proximity-weighted, moral foundations never are.
pub fn default_weighting(taxonomy: Taxonomy) -> Option<ProximityMatrix> {
    match taxonomy {
        Taxonomy::Emotion => Some(ProximityMatrix::build()),
        Taxonomy::Moral => None,
    }
}
