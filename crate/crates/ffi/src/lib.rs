//! C ABI for affect-align.
//!
//! Every function returns an [`AaStatus`]; results travel through out
//! parameters. On failure the thread's last error message is set and can be
//! copied out with [`aa_last_error_message`]. Handles are opaque and must be
//! released with their matching `*_free` function.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use affect_align::metrics::{self, default_weighting, AffectVector, MetricsError, ProximityMatrix};
use affect_align::scoring::{lexicon_score, Lexicon};
use affect_align::significance::{sign_flip_test, SignificanceError};
use affect_align::taxonomy::{EmotionKind, Taxonomy};

/// Status codes returned by every entry point.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaStatus {
    AA_OK = 0,
    AA_NULL_POINTER = 1,
    AA_INVALID_ARGUMENT = 2,
    AA_BUFFER_TOO_SMALL = 3,
    AA_DEGENERATE_DISTRIBUTION = 4,
    AA_TOPIC_MISMATCH = 5,
    AA_INSUFFICIENT_TOPICS = 6,
    AA_IO = 7,
    AA_PANIC = 8,
}

/// Category set of a score vector.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaTaxonomy {
    /// 11 emotions: anger, anticipation, disgust, fear, joy, love, optimism,
    /// pessimism, sadness, surprise, trust.
    AA_EMOTION = 0,
    /// 10 moral foundations: care, harm, fairness, cheating, loyalty,
    /// betrayal, authority, subversion, purity, degradation.
    AA_MORAL = 1,
}

impl From<AaTaxonomy> for Taxonomy {
    fn from(t: AaTaxonomy) -> Self {
        match t {
            AaTaxonomy::AA_EMOTION => Taxonomy::Emotion,
            AaTaxonomy::AA_MORAL => Taxonomy::Moral,
        }
    }
}

/// Summary of an alignment computation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AaAlignmentScore {
    pub mean: f64,
    pub std_dev: f64,
    pub n_topics: usize,
}

/// Outcome of a sign-flip test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AaSignificance {
    pub p_value: f64,
    pub statistic: f64,
    pub exact: bool,
    pub n_topics: usize,
}

/// Accumulates per-topic model and human vectors for one taxonomy.
pub struct AaAlignment {
    taxonomy: Taxonomy,
    model: BTreeMap<String, AffectVector>,
    human: BTreeMap<String, AffectVector>,
}

/// A loaded scoring lexicon.
pub struct AaLexicon {
    lexicon: Lexicon,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AaStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: AaStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> FfiResult<()>) -> AaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            AaStatus::AA_OK
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AaStatus::AA_PANIC
        }
    }
}

fn metrics_failure(e: MetricsError) -> Failure {
    let status = match e {
        MetricsError::DegenerateDistribution { .. } => AaStatus::AA_DEGENERATE_DISTRIBUTION,
        MetricsError::TopicSetMismatch { .. } => AaStatus::AA_TOPIC_MISMATCH,
        MetricsError::EmptyTopicSet => AaStatus::AA_INSUFFICIENT_TOPICS,
        _ => AaStatus::AA_INVALID_ARGUMENT,
    };
    Failure(status, e.to_string())
}

fn non_null<T>(p: *const T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        fail(AaStatus::AA_NULL_POINTER, format!("`{name}` is null"))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a nul-terminated string.
unsafe fn string(p: *const c_char, name: &str) -> FfiResult<String> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .or_else(|_| fail(AaStatus::AA_INVALID_ARGUMENT, format!("`{name}` is not valid UTF-8")))
}

fn vector(taxonomy: Taxonomy, values: &[f64]) -> FfiResult<AffectVector> {
    AffectVector::new(taxonomy, values.to_vec()).map_err(metrics_failure)
}

fn emotion(index: u32) -> FfiResult<EmotionKind> {
    EmotionKind::ALL.get(index as usize).copied().ok_or_else(|| {
        Failure(
            AaStatus::AA_INVALID_ARGUMENT,
            format!("emotion index {index} out of range"),
        )
    })
}

/// Copies the calling thread's last error message into `buf` as a
/// nul-terminated string, truncating to fit. Returns the buffer size needed
/// for the full message, including the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn aa_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len) - 1;
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn aa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Plutchik Emotion Agreement between emotions `a` and `b`, given as
/// indices into the canonical emotion order.
///
/// # Safety
/// `out` must be null or point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aa_pea(a: u32, b: u32, out: *mut f64) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = metrics::pea(emotion(a)?, emotion(b)?);
        Ok(())
    })
}

/// Writes the 11×11 emotion proximity matrix, row-major, into `out`.
///
/// # Safety
/// `out` must be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aa_proximity_matrix(out: *mut f64, len: usize) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        let n = EmotionKind::COUNT * EmotionKind::COUNT;
        if len < n {
            return fail(AaStatus::AA_BUFFER_TOO_SMALL, format!("need {n} doubles, got {len}"));
        }
        let m = ProximityMatrix::build();
        let flat: Vec<f64> = m.entries().iter().flatten().copied().collect();
        ptr::copy_nonoverlapping(flat.as_ptr(), out, n);
        Ok(())
    })
}

/// Jensen-Shannon distance between two score vectors of `taxonomy`, each
/// L1-normalized first. `len` must equal the taxonomy's category count.
///
/// # Safety
/// `p` and `q` must be null or point to `len` readable doubles; `out` must
/// be null or point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aa_jsd(
    taxonomy: AaTaxonomy,
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        let taxonomy = Taxonomy::from(taxonomy);
        let p = metrics::normalize(&vector(taxonomy, slice(p, len, "p")?)?).map_err(metrics_failure)?;
        let q = metrics::normalize(&vector(taxonomy, slice(q, len, "q")?)?).map_err(metrics_failure)?;
        *out = metrics::jsd(&p, &q).map_err(metrics_failure)?;
        Ok(())
    })
}

/// Creates an empty alignment accumulator.
///
/// # Safety
/// `out` must be null or point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn aa_alignment_new(taxonomy: AaTaxonomy, out: *mut *mut AaAlignment) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Box::into_raw(Box::new(AaAlignment {
            taxonomy: taxonomy.into(),
            model: BTreeMap::new(),
            human: BTreeMap::new(),
        }));
        Ok(())
    })
}

/// Adds or replaces one topic's model and human score vectors.
///
/// # Safety
/// `handle` must come from [`aa_alignment_new`]; `topic` must be a
/// nul-terminated string; `model` and `human` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aa_alignment_add_topic(
    handle: *mut AaAlignment,
    topic: *const c_char,
    model: *const f64,
    human: *const f64,
    len: usize,
) -> AaStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let a = &mut *handle;
        let topic = string(topic, "topic")?;
        let m = vector(a.taxonomy, slice(model, len, "model")?)?;
        let h = vector(a.taxonomy, slice(human, len, "human")?)?;
        a.model.insert(topic.clone(), m);
        a.human.insert(topic, h);
        Ok(())
    })
}

/// Alignment over every added topic. Emotion vectors are proximity
/// weighted. When `per_topic` is non-null, per-topic scores are written in
/// byte-wise topic order; it must hold at least `per_topic_len` doubles and
/// `per_topic_len` must be at least the topic count.
///
/// # Safety
/// `handle` must come from [`aa_alignment_new`]; `out` must point to a
/// writable [`AaAlignmentScore`]; `per_topic` must be null or point to
/// `per_topic_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aa_alignment_compute(
    handle: *const AaAlignment,
    out: *mut AaAlignmentScore,
    per_topic: *mut f64,
    per_topic_len: usize,
) -> AaStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        let a = &*handle;
        let weighting = default_weighting(a.taxonomy);
        let score = metrics::alignment(&a.model, &a.human, weighting.as_ref()).map_err(metrics_failure)?;
        if !per_topic.is_null() {
            if per_topic_len < score.n_topics {
                return fail(
                    AaStatus::AA_BUFFER_TOO_SMALL,
                    format!("need {} doubles, got {per_topic_len}", score.n_topics),
                );
            }
            for (i, s) in score.per_topic.values().enumerate() {
                *per_topic.add(i) = *s;
            }
        }
        *out = AaAlignmentScore {
            mean: score.mean,
            std_dev: score.std_dev,
            n_topics: score.n_topics,
        };
        Ok(())
    })
}

/// Releases an alignment accumulator. Null is ignored.
///
/// # Safety
/// `handle` must be null or come from [`aa_alignment_new`] and not have been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn aa_alignment_free(handle: *mut AaAlignment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Two-sided sign-flip test on `n` paired differences. Exhaustive when
/// `2^n <= n_resamples`, otherwise seeded Monte Carlo.
///
/// # Safety
/// `diffs` must point to `n` readable doubles; `out` must point to a
/// writable [`AaSignificance`].
#[no_mangle]
pub unsafe extern "C" fn aa_sign_flip_test(
    diffs: *const f64,
    n: usize,
    n_resamples: usize,
    seed: u64,
    out: *mut AaSignificance,
) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        let diffs = slice(diffs, n, "diffs")?;
        if diffs.iter().any(|d| !d.is_finite()) {
            return fail(AaStatus::AA_INVALID_ARGUMENT, "differences must be finite");
        }
        let r = sign_flip_test(diffs, n_resamples, seed).map_err(|e| match e {
            SignificanceError::InsufficientTopics(_) => Failure(AaStatus::AA_INSUFFICIENT_TOPICS, e.to_string()),
            SignificanceError::TopicSetMismatch => Failure(AaStatus::AA_TOPIC_MISMATCH, e.to_string()),
        })?;
        *out = AaSignificance {
            p_value: r.p_value,
            statistic: r.statistic,
            exact: r.exact,
            n_topics: r.n_topics,
        };
        Ok(())
    })
}

/// Loads a lexicon csv whose header is `token` followed by the taxonomy's
/// category labels in canonical order.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must point to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn aa_lexicon_load(
    path: *const c_char,
    taxonomy: AaTaxonomy,
    out: *mut *mut AaLexicon,
) -> AaStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = string(path, "path")?;
        let lexicon =
            Lexicon::load(Path::new(&path), taxonomy.into()).map_err(|e| Failure(AaStatus::AA_IO, e.to_string()))?;
        *out = Box::into_raw(Box::new(AaLexicon { lexicon }));
        Ok(())
    })
}

/// Scores one text; writes one confidence per category into `out`.
///
/// # Safety
/// `handle` must come from [`aa_lexicon_load`]; `text` must be a
/// nul-terminated string; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aa_lexicon_score(
    handle: *const AaLexicon,
    text: *const c_char,
    out: *mut f64,
    len: usize,
) -> AaStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        let text = string(text, "text")?;
        let scores = lexicon_score(&text, &(*handle).lexicon);
        let values = scores.values();
        if len < values.len() {
            return fail(
                AaStatus::AA_BUFFER_TOO_SMALL,
                format!("need {} doubles, got {len}", values.len()),
            );
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        Ok(())
    })
}

/// Releases a lexicon. Null is ignored.
///
/// # Safety
/// `handle` must be null or come from [`aa_lexicon_load`] and not have been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn aa_lexicon_free(handle: *mut AaLexicon) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
