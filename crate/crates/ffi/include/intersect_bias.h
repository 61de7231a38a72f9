#ifndef INTERSECT_BIAS_H
#define INTERSECT_BIAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bin assigned to one value of a column.
 */
typedef enum IbBin {
  IB_BIN_ABSENT = -1,
  IB_BIN_LOW = 0,
  IB_BIN_MID = 1,
  IB_BIN_HIGH = 2,
} IbBin;

typedef enum IbScope {
  IB_SCOPE_IDENTITY = 0,
  IB_SCOPE_ALL = 1,
} IbScope;

/**
 * Result codes.
 */
typedef enum IbStatus {
  IB_STATUS_OK = 0,
  IB_STATUS_NULL_POINTER = 1,
  IB_STATUS_INVALID_UTF8 = 2,
  IB_STATUS_INVALID_INPUT = 3,
  IB_STATUS_IO = 4,
  IB_STATUS_PANIC = 5,
} IbStatus;

/**
 * Opaque set of corpora, one per language and prompting method.
 */
typedef struct IbCorpusSet IbCorpusSet;

/**
 * Opaque bias lexicon.
 */
typedef struct IbLexicon IbLexicon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *ib_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ib_string_free(char *s);

/**
 * Creates a handle holding the built-in seed lexicon.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IbStatus ib_lexicon_seed(struct IbLexicon **out);

/**
 * Parses a lexicon from CSV text.
 *
 * # Safety
 * `csv` must be a nul-terminated string and `out` a valid pointer.
 */
enum IbStatus ib_lexicon_from_csv(const char *csv, struct IbLexicon **out);

/**
 * Loads a lexicon CSV file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum IbStatus ib_lexicon_load(const char *path, struct IbLexicon **out);

/**
 * Number of entries.
 *
 * # Safety
 * `lexicon` must be a live handle and `out_len` a valid pointer.
 */
enum IbStatus ib_lexicon_len(const struct IbLexicon *lexicon, size_t *out_len);

/**
 * # Safety
 * `lexicon` must be null or a live handle; it is invalid afterwards.
 */
void ib_lexicon_free(struct IbLexicon *lexicon);

/**
 * Lemmas applicable to an identity, as a sorted JSON array. The identity
 * is a JSON object such as
 * `{"religion":"Hindu","gender":"Female","marital_status":"Married","children":"OneChild"}`.
 *
 * # Safety
 * Pointers must be valid; `identity_json` nul-terminated.
 */
enum IbStatus ib_lexicon_applicable_terms(const struct IbLexicon *lexicon,
                                          const char *identity_json,
                                          char **out_json);

/**
 * Renders an application prompt. `application` is a kind name such as
 * `"Story"` or `"To-do List"`; `story_location` is required for stories
 * and must be null otherwise.
 *
 * # Safety
 * String arguments must be nul-terminated (or null where allowed) and
 * `out_prompt` valid.
 */
enum IbStatus ib_render_prompt(const char *language,
                               const char *identity_json,
                               const char *application,
                               const char *story_location,
                               char **out_prompt);

/**
 * Cleans generation records (JSON Lines text) and builds corpora.
 * `stopwords` is a newline-separated list or null for the built-in list.
 * With `detect_language` false, no record is dropped as non-English.
 *
 * # Safety
 * String arguments must be nul-terminated (or null where allowed) and
 * `out` valid.
 */
enum IbStatus ib_corpus_from_records(const char *records_jsonl,
                                     const char *stopwords,
                                     bool detect_language,
                                     struct IbCorpusSet **out);

/**
 * Total number of documents across all corpora.
 *
 * # Safety
 * `corpora` must be a live handle and `out_count` valid.
 */
enum IbStatus ib_corpus_document_count(const struct IbCorpusSet *corpora, size_t *out_count);

/**
 * # Safety
 * `corpora` must be null or a live handle; it is invalid afterwards.
 */
void ib_corpus_free(struct IbCorpusSet *corpora);

/**
 * Scores every document. Score cells are written as JSON Lines to
 * `out_scores`; overall top terms go to `out_overall` when it is non-null.
 *
 * # Safety
 * Handles must be live; `out_scores` valid; `out_overall` valid or null.
 */
enum IbStatus ib_score(const struct IbCorpusSet *corpora,
                       const struct IbLexicon *lexicon,
                       enum IbScope scope,
                       char **out_scores,
                       char **out_overall);

/**
 * Bins a column at mean ± one population standard deviation. `present`
 * marks which values exist (null means all do); absent values get
 * `IbBin::Absent` and do not enter the statistics.
 *
 * # Safety
 * `values` and `out_bins` must hold `len` elements; `present` likewise
 * unless null.
 */
enum IbStatus ib_bin_column(const double *values,
                            const bool *present,
                            size_t len,
                            enum IbBin *out_bins);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERSECT_BIAS_H */
