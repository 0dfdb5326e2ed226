/* C API for the crawl graph-learning library.
 *
 * All functions return CRAWL_OK on success; on failure they return a status
 * code and leave a message retrievable with crawl_last_error() (thread
 * local). Strings returned through char** are heap-allocated and must be
 * released with crawl_string_free().
 */
#ifndef CRAWL_H
#define CRAWL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum crawl_status {
    CRAWL_OK = 0,
    CRAWL_INVALID_ARGUMENT = 1,
    CRAWL_NUMERICAL_ERROR = 2,
    CRAWL_RESOURCE_ERROR = 3
} crawl_status;

typedef struct crawl_dataset crawl_dataset;
typedef struct crawl_model crawl_model;

const char* crawl_version(void);
const char* crawl_last_error(void);
void crawl_string_free(char* s);
void crawl_set_num_threads(int n);

/* ---- datasets ----------------------------------------------------------
 * Generators: name is one of
 *   "csl"         params: {"seed": u64}
 *   "cycles"      params: {"n": int}   -> C_n and C_{n/2} + C_{n/2} pair
 *   "threepaths"  params: {"n": int}   -> balanced and skewed gadget pair
 * Pairs are emitted as a 2-graph classification dataset (labels 0/1).
 */
crawl_status crawl_dataset_generate(const char* name, const char* params_json,
                                    crawl_dataset** out);
crawl_status crawl_dataset_load(const char* path, crawl_dataset** out);
crawl_status crawl_dataset_save(const crawl_dataset* ds, const char* path);
/* {"n_graphs", "task", "num_classes", "folds", "n_nodes_total"} */
crawl_status crawl_dataset_info(const crawl_dataset* ds, char** json_out);
void crawl_dataset_free(crawl_dataset* ds);

/* ---- training ----------------------------------------------------------
 * config_json holds the model and training hyperparameters (keys: L, d,
 * d_conv, s, pooling, readout, dropout, vn, encodings, strategy, ell_train,
 * ell_eval, p_star, lr, decay, patience, lr_floor, batch_size, max_epochs,
 * r_val, r_test). Outputs (checkpoints, history CSVs, summary JSON and a
 * replay manifest) are written under out_dir.
 */
crawl_status crawl_kfold_train(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                               const char* out_dir, char** summary_json);
/* One training run with explicit validation/test folds. */
crawl_status crawl_train_single(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                                int val_fold, int test_fold, const char* out_dir,
                                char** summary_json);
/* Encoding x walk-strategy grid, each cell a full k-fold protocol. */
crawl_status crawl_ablation(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                            const char* out_dir, char** table_json);

crawl_status crawl_model_load(const char* path, crawl_model** out);
crawl_status crawl_model_save(const crawl_model* m, const char* path);
/* {"config": {...}, "parameter_count": n} */
crawl_status crawl_model_info(const crawl_model* m, char** json_out);
/* options: {"fold": int, "r": int, "seed": u64, "batch_size": int} */
crawl_status crawl_evaluate(const crawl_model* m, const crawl_dataset* ds,
                            const char* options_json, char** scores_json);
void crawl_model_free(crawl_model* m);

/* ---- expressiveness -----------------------------------------------------
 * Graph specs are JSON: {"gen": "cycle"|"cycle_pair"|"three_paths"|"csl",
 * ...params} or a literal {"n": int, "edges": [[u,v],...]}.
 * options: {"strategy": "uniform"|"nb", "s": int, "ell": int,
 *           "mode": "exact"|"sampled", "n_samples": int, "seed": u64}
 */
crawl_status crawl_distinguish(const char* graph1_json, const char* graph2_json,
                               const char* options_json, char** report_json);

/* Central-difference audit of every differentiable kernel and a composed
 * two-layer model; returns one entry per check. */
crawl_status crawl_gradcheck(char** report_json);

crawl_status crawl_count_parameters(const char* config_json, int64_t* out);

#ifdef __cplusplus
}
#endif
#endif /* CRAWL_H */
