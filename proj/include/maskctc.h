#ifndef MASKCTC_H
#define MASKCTC_H

/* C interface to the mask-refinement CTC recognition engine.
 *
 * Conventions:
 *  - Functions returning mc_status report MC_OK (0) on success. On failure
 *    they return a nonzero status and record a human-readable message,
 *    retrievable with mc_last_error() on the same thread.
 *  - Functions returning a pointer return NULL on failure (same error
 *    protocol).
 *  - char* results are heap copies owned by the caller: release them with
 *    mc_string_free(). const char* results are borrowed and stay valid only
 *    as long as the handle they came from.
 *  - Handles are opaque; every mc_<x>_open/new has a matching mc_<x>_free.
 *    Freeing NULL is a no-op. Handles are not thread-safe; use one per
 *    thread or lock externally.
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mc_status {
  MC_OK = 0,
  MC_ERR_USAGE = 1, /* invalid argument, bad configuration value */
  MC_ERR_DATA = 2   /* unreadable or inconsistent file content */
} mc_status;

const char* mc_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* mc_last_error(void);

/* Status code of the most recent failure on this thread; MC_OK if none.
 * Lets callers of pointer-returning functions recover the error class. */
mc_status mc_last_status(void);

void mc_string_free(char* s);

/* ---------------------------------------------------------------- config
 * Flat key-value configuration ("section.key = value" lines). Keys are
 * documented in the README; unknown keys are ignored by consumers, so one
 * config can drive generation, training and decoding at once.
 */
typedef struct mc_config mc_config;

mc_config* mc_config_new(void);
/* Merge a config file into the handle; later values win. */
mc_status mc_config_load_file(mc_config* cfg, const char* path);
mc_status mc_config_set(mc_config* cfg, const char* key, const char* value);
/* Value for key, or NULL with no error recorded when the key is absent. */
char* mc_config_get(const mc_config* cfg, const char* key);
/* All keys, one "key = value" per line, parseable by mc_config_load_file. */
char* mc_config_dump(const mc_config* cfg);
void mc_config_free(mc_config* cfg);

/* ---------------------------------------------------------------- corpus
 * Synthetic corpora live in a directory: manifest.jsonl + features.bin.
 * Generation consumes the data.* config keys.
 */
typedef struct mc_corpus mc_corpus;

mc_status mc_corpus_generate(const mc_config* cfg, long long n_utterances,
                             const char* dir);
mc_corpus* mc_corpus_open(const char* dir);
long long mc_corpus_size(const mc_corpus* corpus);
/* Borrowed; valid while the corpus handle lives. */
const char* mc_corpus_utt_id(const mc_corpus* corpus, long long index);
/* Reference transcript as space-joined token names. */
char* mc_corpus_reference(const mc_corpus* corpus, long long index);
void mc_corpus_free(mc_corpus* corpus);

/* ---------------------------------------------------------------- training
 * Trains on the corpus directory using the model.* and train.* config keys,
 * writing per-epoch checkpoints plus an averaged final checkpoint into
 * train.out_dir. Rerunning with the same directory resumes after the newest
 * epoch checkpoint and reproduces the uninterrupted run bitwise. `log` (may
 * be NULL) receives one line per epoch and resume notice.
 */
typedef void (*mc_log_fn)(const char* line, void* user);

mc_status mc_train_run(const mc_config* cfg, const char* corpus_dir,
                       mc_log_fn log, void* user);

/* Average parameters across checkpoints (delta from the first, so averaging
 * identical inputs is exact); optimizer state is dropped. */
mc_status mc_checkpoint_average(const char* const* paths, long long n,
                                const char* out_path);

/* ---------------------------------------------------------------- engine
 * A model loaded from a checkpoint, ready for inference.
 */
typedef struct mc_engine mc_engine;
typedef struct mc_result mc_result;

mc_engine* mc_engine_open(const char* checkpoint_path);
/* JSON object: model configuration, vocabulary size, training step. */
char* mc_engine_info(const mc_engine* engine);
void mc_engine_free(mc_engine* engine);

/* Decode one utterance with the decode.* config keys (strategy, K, p_thres,
 * max_loop, target_len, recompute_c). Wall time covers the whole decode
 * including the encoder pass. */
mc_result* mc_engine_decode(const mc_engine* engine, const mc_corpus* corpus,
                            long long index, const mc_config* cfg);
/* Hypothesis as space-joined token names (empty string for no output). */
char* mc_result_text(const mc_result* result);
/* One JSON object per call, suitable for line-delimited trace logs. */
char* mc_result_trace_json(const mc_result* result);
long long mc_result_decoder_forwards(const mc_result* result);
long long mc_result_encoder_forwards(const mc_result* result);
double mc_result_wall_seconds(const mc_result* result);
void mc_result_free(mc_result* result);

/* ---------------------------------------------------------------- scoring
 * Hypothesis files hold one utterance per line: "<utt-id> <token> <token>…".
 * Evaluation compares token strings against the corpus references and
 * returns a JSON report with substitution/deletion/insertion counts and the
 * token error rate. Every corpus utterance must appear exactly once.
 */
char* mc_eval_corpus(const char* corpus_dir, const char* hyp_path);

/* Accumulate per-decode timings and render the aggregate report (per
 * strategy: mean/median/std wall seconds and total forward counts). */
typedef struct mc_timings mc_timings;

mc_timings* mc_timings_new(void);
mc_status mc_timings_add(mc_timings* timings, const char* strategy,
                         double wall_seconds, long long decoder_forwards,
                         long long encoder_forwards);
char* mc_timings_report_json(const mc_timings* timings);
char* mc_timings_report_table(const mc_timings* timings);
void mc_timings_free(mc_timings* timings);

#ifdef __cplusplus
}
#endif

#endif /* MASKCTC_H */
