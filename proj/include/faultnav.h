/* C interface for the fault localization engine.
 *
 * All functions returning fn_status set a thread-local error message on
 * failure, readable via fn_last_error().  Strings returned through
 * `const char*` accessors are owned by the handle they were read from and
 * stay valid until that handle is freed.  Strings returned through
 * `char**` out-parameters are heap copies the caller releases with
 * fn_string_free().
 */
#ifndef FAULTNAV_H
#define FAULTNAV_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fn_status {
  FN_OK = 0,
  FN_ERR_IO = 1,          /* file unreadable or unwritable */
  FN_ERR_PARSE = 2,       /* malformed input artifact */
  FN_ERR_INVALID_ARG = 3, /* bad configuration key, value, or argument */
  FN_ERR_BACKEND = 4,     /* model backend failure (transport, refusal, script) */
  FN_ERR_PIPELINE = 5,    /* agent pipeline could not produce a ranking */
  FN_ERR_NOT_FOUND = 6,   /* named method or resource does not exist */
  FN_ERR_INTERNAL = 7     /* unexpected failure */
} fn_status;

/* A loaded fault bundle: coverage, traces, sources, call graph. */
typedef struct fn_bundle fn_bundle;
/* Pipeline configuration as string key-value pairs. */
typedef struct fn_config fn_config;
/* Output of one localization run: ranking, transcripts, warnings. */
typedef struct fn_result fn_result;

/* Library version, e.g. "0.1.0". Static storage. */
const char* fn_version(void);

/* Message describing the last failure on this thread; "" if none. */
const char* fn_last_error(void);

/* Releases a string returned through a char** out-parameter. NULL is a no-op. */
void fn_string_free(char* s);

/* --- bundles ------------------------------------------------------- */

/* Loads the bundle under `bundle_dir` (a directory holding bundle.json
 * plus the artifacts it names) and validates it eagerly. */
fn_status fn_bundle_open(const char* bundle_dir, fn_bundle** out);
const char* fn_bundle_fault_id(const fn_bundle* bundle);
void fn_bundle_free(fn_bundle* bundle);

/* --- configuration ------------------------------------------------- */

/* Creates an empty configuration; unset keys take engine defaults. */
fn_status fn_config_new(fn_config** out);

/* Sets one key. Recognized keys:
 *   backend               "mock" | "remote"           (default mock)
 *   mock_script           path to a script file; overrides the bundle's
 *   order                 "execution" | "ochiai" | "external"
 *   external_scores       path to a {"method id": score} JSON file
 *   token_limit           positive integer
 *   token_counter         counter name (default "heuristic")
 *   budget_safety_factor  float in (0, 1]
 *   navigation            "true" | "false" | "1" | "0"
 *   division              likewise
 *   reflexion             likewise
 *   reflexion_iters       positive integer
 *   max_tool_calls        non-negative integer
 *   max_tokens            non-negative integer (0 = omit from requests)
 *   model                 model name for the remote backend
 *   api_key               bearer token for the remote backend
 *   api_base_url          chat-completions base URL
 *   max_inflight          positive integer
 *   retries               positive integer
 * Unknown keys and unparsable values fail with FN_ERR_INVALID_ARG. */
fn_status fn_config_set(fn_config* config, const char* key, const char* value);

/* Applies `key = value` lines from a file. '#' starts a comment; blank
 * lines are skipped. Later assignments win. */
fn_status fn_config_load_file(fn_config* config, const char* path);
void fn_config_free(fn_config* config);

/* --- localization -------------------------------------------------- */

/* Runs the full pipeline on one bundle. `config` may be NULL for all
 * defaults, in which case the bundle must embed a mock script. */
fn_status fn_localize(const fn_bundle* bundle, const fn_config* config,
                      fn_result** out);

/* Final ranking as a JSON document (trailing newline included). */
const char* fn_result_ranking_json(const fn_result* result);

/* Per-agent transcripts, in pipeline order. */
size_t fn_result_transcript_count(const fn_result* result);
const char* fn_result_transcript_agent(const fn_result* result, size_t index);
const char* fn_result_transcript_json(const fn_result* result, size_t index);

/* Non-fatal diagnostics accumulated during the run. */
size_t fn_result_warning_count(const fn_result* result);
const char* fn_result_warning(const fn_result* result, size_t index);
void fn_result_free(fn_result* result);

/* --- inspection and evaluation ------------------------------------- */

/* Summarizes a bundle (tests, ranked methods, division plan) as JSON
 * without calling any backend. */
fn_status fn_inspect(const fn_bundle* bundle, const fn_config* config,
                     char** json_out);

/* Scores ranking files under `rankings_dir` against a ground-truth file.
 * On success fills `json_out` with the JSON report and `table_out` with
 * the plain-text table; either may be NULL if not wanted. */
fn_status fn_evaluate(const char* rankings_dir, const char* truth_file,
                      char** json_out, char** table_out);

#ifdef __cplusplus
}
#endif

#endif /* FAULTNAV_H */
