#ifndef AFFECT_ALIGN_H
#define AFFECT_ALIGN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum AaStatus {
  AA_OK = 0,
  AA_NULL_POINTER = 1,
  AA_INVALID_ARGUMENT = 2,
  AA_BUFFER_TOO_SMALL = 3,
  AA_DEGENERATE_DISTRIBUTION = 4,
  AA_TOPIC_MISMATCH = 5,
  AA_INSUFFICIENT_TOPICS = 6,
  AA_IO = 7,
  AA_PANIC = 8,
} AaStatus;

/**
 * Category set of a score vector.
 */
typedef enum AaTaxonomy {
  /**
   * 11 emotions: anger, anticipation, disgust, fear, joy, love, optimism,
   * pessimism, sadness, surprise, trust.
   */
  AA_EMOTION = 0,
  /**
   * 10 moral foundations: care, harm, fairness, cheating, loyalty,
   * betrayal, authority, subversion, purity, degradation.
   */
  AA_MORAL = 1,
} AaTaxonomy;

/**
 * Accumulates per-topic model and human vectors for one taxonomy.
 */
typedef struct AaAlignment AaAlignment;

/**
 * A loaded scoring lexicon.
 */
typedef struct AaLexicon AaLexicon;

/**
 * Summary of an alignment computation.
 */
typedef struct AaAlignmentScore {
  double mean;
  double std_dev;
  size_t n_topics;
} AaAlignmentScore;

/**
 * Outcome of a sign-flip test.
 */
typedef struct AaSignificance {
  double p_value;
  double statistic;
  bool exact;
  size_t n_topics;
} AaSignificance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * nul-terminated string, truncating to fit. Returns the buffer size needed
 * for the full message, including the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t aa_last_error_message(char *buf, size_t len);

/**
 * Library version as a static nul-terminated string.
 */
const char *aa_version(void);

/**
 * Plutchik Emotion Agreement between emotions `a` and `b`, given as
 * indices into the canonical emotion order.
 *
 * # Safety
 * `out` must be null or point to a writable double.
 */
enum AaStatus aa_pea(uint32_t a, uint32_t b, double *out);

/**
 * Writes the 11×11 emotion proximity matrix, row-major, into `out`.
 *
 * # Safety
 * `out` must be null or point to `len` writable doubles.
 */
enum AaStatus aa_proximity_matrix(double *out, size_t len);

/**
 * Jensen-Shannon distance between two score vectors of `taxonomy`, each
 * L1-normalized first. `len` must equal the taxonomy's category count.
 *
 * # Safety
 * `p` and `q` must be null or point to `len` readable doubles; `out` must
 * be null or point to a writable double.
 */
enum AaStatus aa_jsd(enum AaTaxonomy taxonomy,
                     const double *p,
                     const double *q,
                     size_t len,
                     double *out);

/**
 * Creates an empty alignment accumulator.
 *
 * # Safety
 * `out` must be null or point to a writable handle slot.
 */
enum AaStatus aa_alignment_new(enum AaTaxonomy taxonomy, struct AaAlignment **out);

/**
 * Adds or replaces one topic's model and human score vectors.
 *
 * # Safety
 * `handle` must come from [`aa_alignment_new`]; `topic` must be a
 * nul-terminated string; `model` and `human` must point to `len` doubles.
 */
enum AaStatus aa_alignment_add_topic(struct AaAlignment *handle,
                                     const char *topic,
                                     const double *model,
                                     const double *human,
                                     size_t len);

/**
 * Alignment over every added topic. Emotion vectors are proximity
 * weighted. When `per_topic` is non-null, per-topic scores are written in
 * byte-wise topic order; it must hold at least `per_topic_len` doubles and
 * `per_topic_len` must be at least the topic count.
 *
 * # Safety
 * `handle` must come from [`aa_alignment_new`]; `out` must point to a
 * writable [`AaAlignmentScore`]; `per_topic` must be null or point to
 * `per_topic_len` writable doubles.
 */
enum AaStatus aa_alignment_compute(const struct AaAlignment *handle,
                                   struct AaAlignmentScore *out,
                                   double *per_topic,
                                   size_t per_topic_len);

/**
 * Releases an alignment accumulator. Null is ignored.
 *
 * # Safety
 * `handle` must be null or come from [`aa_alignment_new`] and not have been
 * freed.
 */
void aa_alignment_free(struct AaAlignment *handle);

/**
 * Two-sided sign-flip test on `n` paired differences. Exhaustive when
 * `2^n <= n_resamples`, otherwise seeded Monte Carlo.
 *
 * # Safety
 * `diffs` must point to `n` readable doubles; `out` must point to a
 * writable [`AaSignificance`].
 */
enum AaStatus aa_sign_flip_test(const double *diffs,
                                size_t n,
                                size_t n_resamples,
                                uint64_t seed,
                                struct AaSignificance *out);

/**
 * Loads a lexicon csv whose header is `token` followed by the taxonomy's
 * category labels in canonical order.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must point to a writable
 * handle slot.
 */
enum AaStatus aa_lexicon_load(const char *path, enum AaTaxonomy taxonomy, struct AaLexicon **out);

/**
 * Scores one text; writes one confidence per category into `out`.
 *
 * # Safety
 * `handle` must come from [`aa_lexicon_load`]; `text` must be a
 * nul-terminated string; `out` must point to `len` writable doubles.
 */
enum AaStatus aa_lexicon_score(const struct AaLexicon *handle,
                               const char *text,
                               double *out,
                               size_t len);

/**
 * Releases a lexicon. Null is ignored.
 *
 * # Safety
 * `handle` must be null or come from [`aa_lexicon_load`] and not have been
 * freed.
 */
void aa_lexicon_free(struct AaLexicon *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFECT_ALIGN_H */
