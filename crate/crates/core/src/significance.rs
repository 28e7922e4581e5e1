//! Paired sign-flip permutation test over per-topic alignment differences.
//!
//! Under the null hypothesis that a model is equally aligned with both
//! groups, each per-topic difference `d_t = S_lib(t) - S_con(t)` is
//! symmetric about zero, so its sign is exchangeable. The statistic is the
//! mean difference; the two-sided p-value is the share of sign assignments
//! whose statistic is at least as extreme as the observed one. The observed
//! assignment is always counted.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Statistics within this distance of the observed one count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignificanceError {
    #[error("need at least 2 topics, got {0}")]
    InsufficientTopics(usize),
    #[error("per-topic scores cover different topics")]
    TopicSetMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub p_value: f64,
    /// Mean per-topic difference (first minus second).
    pub statistic: f64,
    /// Whether every sign assignment was enumerated.
    pub exact: bool,
    pub n_topics: usize,
}

impl SignificanceResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-sided sign-flip test on paired differences. Enumerates all `2^n`
/// assignments when that is at most `n_resamples`, otherwise draws
/// `n_resamples` random assignments from a generator seeded with `seed`.
pub fn sign_flip_test(diffs: &[f64], n_resamples: usize, seed: u64) -> Result<SignificanceResult, SignificanceError> {
    let n = diffs.len();
    if n < 2 {
        return Err(SignificanceError::InsufficientTopics(n));
    }
    let observed = mean(diffs);
    let threshold = observed.abs() - TIE_TOLERANCE;
    let exact = n < usize::BITS as usize - 1 && (1usize << n) <= n_resamples;
    let mut flipped = vec![0.0; n];

    let p_value = if exact {
        let total = 1usize << n;
        let mut extreme = 0usize;
        for mask in 0..total {
            for (i, (f, d)) in flipped.iter_mut().zip(diffs).enumerate() {
                *f = if mask >> i & 1 == 1 { -d } else { *d };
            }
            if mean(&flipped).abs() >= threshold {
                extreme += 1;
            }
        }
        extreme as f64 / total as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut extreme = 0usize;
        for _ in 0..n_resamples {
            for (f, d) in flipped.iter_mut().zip(diffs) {
                *f = if rng.gen::<bool>() { -d } else { *d };
            }
            if mean(&flipped).abs() >= threshold {
                extreme += 1;
            }
        }
        (extreme + 1) as f64 / (n_resamples + 1) as f64
    };

    Ok(SignificanceResult {
        p_value: p_value.min(1.0),
        statistic: observed,
        exact,
        n_topics: n,
    })
}

/// Tests whether a model's per-topic alignment with the first group differs
/// from its alignment with the second.
pub fn significance_test(
    per_topic_first: &BTreeMap<String, f64>,
    per_topic_second: &BTreeMap<String, f64>,
    n_resamples: usize,
    seed: u64,
) -> Result<SignificanceResult, SignificanceError> {
    if !per_topic_first.keys().eq(per_topic_second.keys()) {
        return Err(SignificanceError::TopicSetMismatch);
    }
    let diffs: Vec<f64> = per_topic_first.iter().map(|(t, a)| a - per_topic_second[t]).collect();
    sign_flip_test(&diffs, n_resamples, seed)
}
