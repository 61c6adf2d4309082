/* promptws - prompt-driven weak supervision toolkit.
 *
 * C API over the C++ core: opaque handles, integer status codes, UTF-8 JSON
 * strings at structured boundaries. Every char* returned through an out
 * parameter is heap-allocated and must be released with pws_string_free.
 * On failure, pws_last_error() returns a thread-local message describing the
 * most recent failing call on this thread.
 */
#ifndef PROMPTWS_H
#define PROMPTWS_H

#include <stddef.h>
#include <stdint.h>

#if defined(__cplusplus)
extern "C" {
#endif

typedef enum pws_status {
    PWS_OK = 0,
    PWS_ERR_INVALID_ARGUMENT = 1,
    PWS_ERR_PARSE = 2,
    PWS_ERR_IO = 3,
    PWS_ERR_CONFIG = 4,
    PWS_ERR_CAPABILITY = 5,
    PWS_ERR_TRANSPORT = 6,
    PWS_ERR_BACKEND = 7,
    PWS_ERR_UNAVAILABLE = 8,
    PWS_ERR_INTERNAL = 9
} pws_status;

const char* pws_version(void);
const char* pws_last_error(void);
void pws_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

typedef struct pws_dataset pws_dataset;

/* type_hints_json: optional {"column": "text|integer|real|image_ref"} */
pws_status pws_dataset_load_csv(const char* path, const char* type_hints_json,
                                pws_dataset** out);
pws_status pws_dataset_load_json(const char* path, pws_dataset** out);
pws_status pws_dataset_write_csv(const pws_dataset* dataset, const char* path);
size_t pws_dataset_rows(const pws_dataset* dataset);
size_t pws_dataset_columns(const pws_dataset* dataset);
/* returns NULL when index is out of range; pointer owned by the dataset */
const char* pws_dataset_column_name(const pws_dataset* dataset, size_t index);
pws_status pws_dataset_cell(const pws_dataset* dataset, size_t row, const char* column,
                            char** out);
/* deterministic seeded split into ceil(fraction*n) head rows and the rest */
pws_status pws_dataset_split(const pws_dataset* dataset, double fraction, uint64_t seed,
                             pws_dataset** head, pws_dataset** tail);
void pws_dataset_free(pws_dataset* dataset);

/* ---- templates --------------------------------------------------------- */

typedef struct pws_template pws_template;

/* record_json: {"template": "...", "answer_choices": [...], "slots": {...},
 *               "image_column": "..."}; slots select the image form. */
pws_status pws_template_create(const char* record_json, pws_template** out);
/* query as canonical JSON */
pws_status pws_template_apply(const pws_template* tmpl, const pws_dataset* dataset, size_t row,
                              char** query_json);
/* JSON array of queries, one per dataset row */
pws_status pws_template_apply_all(const pws_template* tmpl, const pws_dataset* dataset,
                                  char** queries_json);
void pws_template_free(pws_template* tmpl);

/* ---- inference client --------------------------------------------------- */

typedef struct pws_client pws_client;

/* backend_json: {"kind": "mock|mock_encoder|http|remote", "model_id": "...",
 *                "endpoint": "...", "api_key": "...", "lexicon": [...]}
 * cache_path: optional persistent response cache. */
pws_status pws_client_open(const char* backend_json, const char* cache_path, pws_client** out);
/* queries_json: JSON array of queries; responses come back in query order */
pws_status pws_client_run(pws_client* client, const char* queries_json, char** responses_json);
uint64_t pws_client_cache_hits(const pws_client* client);
uint64_t pws_client_cache_misses(const pws_client* client);
uint64_t pws_client_backend_calls(const pws_client* client);
void pws_client_close(pws_client* client);

/* ---- voters ------------------------------------------------------------- */

typedef struct pws_voter pws_voter;

/* spec_json: {"label_map": {"answer": class-or-list, ...},
 *             "matcher": "exact|uncased|prefix", "k": int,
 *             "calibration": [w1, w2, ...]}  (classes are 1-based ints) */
pws_status pws_voter_create(const char* spec_json, pws_voter** out);
/* template_record_json as in pws_template_create; the template must carry
 * answer_choices. content_free_json: optional JSON array of strings. */
pws_status pws_voter_calibrate(pws_voter* voter, pws_client* client,
                               const char* template_record_json, const char* content_free_json);
/* response_json: one response; vote rendered as "0", "2" or "1|3" */
pws_status pws_voter_vote(const pws_voter* voter, const char* response_json, char** vote_out);
void pws_voter_free(pws_voter* voter);

/* ---- label models ------------------------------------------------------- */

/* votes_json: {"k": int, "votes": [[entry,...],...]} where entry is 0,
 * a class id, or a list of class ids.
 * model_json: {"kind": "majority|naive_bayes|triplet|partial",
 *              "max_iters": int, "tol": real, "class_balance": real}
 * probs out: JSON array of per-row probability arrays. */
pws_status pws_label_model_run(const char* votes_json, const char* model_json, char** probs_json);

/* ---- serving ------------------------------------------------------------ */

typedef struct pws_server pws_server;

pws_status pws_server_start(const char* backend_json, const char* bind_address,
                            uint32_t token_budget, uint32_t max_batch, pws_server** out);
/* bound "host:port" (resolves an ephemeral port request) */
pws_status pws_server_bound_address(const pws_server* server, char** out);
/* blocks until pws_server_shutdown is called from another thread */
pws_status pws_server_wait(pws_server* server);
void pws_server_shutdown(pws_server* server);
void pws_server_free(pws_server* server);

/* ---- pipeline ------------------------------------------------------------ */

/* Runs the labeling pipeline described by a task config file; writes
 * probs.csv, votes.csv and manifest.json under out_dir. manifest_json
 * receives the manifest content. */
pws_status pws_label_pipeline(const char* config_path, const char* out_dir,
                              const char* cache_path, char** manifest_json);

/* Top-1 accuracy report of probs.csv against a gold CSV (column "label");
 * votes_csv_path may be NULL. */
pws_status pws_evaluate(const char* probs_csv_path, const char* gold_csv_path,
                        const char* votes_csv_path, char** report_json);

#if defined(__cplusplus)
}
#endif

#endif /* PROMPTWS_H */
