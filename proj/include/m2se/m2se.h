#ifndef M2SE_H
#define M2SE_H

/* C interface to the m2se library. Every call returns an m2se_status; on
 * failure m2se_last_error() holds a message for the calling thread. Strings
 * returned through char** are owned by the caller and released with
 * m2se_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define M2SE_API __declspec(dllexport)
#else
#define M2SE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum m2se_status {
    M2SE_OK = 0,
    M2SE_ERR_VALIDATION = 1,
    M2SE_ERR_EMPTY_INPUT = 2,
    M2SE_ERR_CONFIG = 3,
    M2SE_ERR_IO = 4,
    M2SE_ERR_SHAPE = 5,
    M2SE_ERR_NUMERIC = 6,
    M2SE_ERR_SHORTAGE = 7,
    M2SE_ERR_UNDEFINED_METRIC = 8,
    M2SE_ERR_GENERATOR = 9,
    M2SE_ERR_FROZEN_VIOLATION = 10,
    M2SE_ERR_INVALID_ARGUMENT = 20,
    M2SE_ERR_INTERNAL = 21
} m2se_status;

/* Index order for per-task arrays. */
enum { M2SE_TASK_MSA = 0, M2SE_TASK_ER = 1, M2SE_TASK_FER = 2, M2SE_TASK_ERI = 3, M2SE_TASK_ECPE = 4, M2SE_TASK_COUNT = 5 };

/* Acc2 scheme bits for m2se_evaluate. */
enum { M2SE_SCHEME_NN = 1, M2SE_SCHEME_NP = 2 };

/* Sentiment class codes for m2se_acc2; M2SE_CLASS_NONE marks an unparsed prediction. */
enum { M2SE_CLASS_NONE = -1, M2SE_CLASS_NEGATIVE = 0, M2SE_CLASS_NEUTRAL = 1, M2SE_CLASS_POSITIVE = 2 };

typedef struct m2se_config m2se_config;

M2SE_API const char* m2se_version(void);
M2SE_API const char* m2se_last_error(void);
M2SE_API const char* m2se_status_name(m2se_status status);
M2SE_API void m2se_string_free(char* s);

/* Run configuration ------------------------------------------------------- */

M2SE_API m2se_status m2se_config_default(m2se_config** out);
/* Reads a JSON run config; M2SE_OUTPUT_ROOT overrides its output root. */
M2SE_API m2se_status m2se_config_load(const char* path, m2se_config** out);
M2SE_API void m2se_config_free(m2se_config* config);

M2SE_API m2se_status m2se_config_set_seed(m2se_config* config, uint64_t seed);
/* Comma-separated task names, e.g. "MSA,ER". */
M2SE_API m2se_status m2se_config_set_tasks(m2se_config* config, const char* tasks);
M2SE_API m2se_status m2se_config_set_output_root(m2se_config* config, const char* path);
M2SE_API m2se_status m2se_config_set_corpus_manifest(m2se_config* config, const char* path);
M2SE_API m2se_status m2se_config_validate(const m2se_config* config);
M2SE_API m2se_status m2se_config_to_json(const m2se_config* config, char** json_out);

/* Commands ---------------------------------------------------------------- */

typedef struct m2se_build_summary {
    size_t per_task[M2SE_TASK_COUNT];
    size_t distinct_samples;
    size_t records;
    size_t rejections;
    size_t skipped;
} m2se_build_summary;

M2SE_API m2se_status m2se_build_dataset(const m2se_config* config, m2se_build_summary* out);

/* Writes plan/plans.json; *text_out receives the readable dump (may be NULL). */
M2SE_API m2se_status m2se_plan(const m2se_config* config, char** text_out);

typedef struct m2se_stage_summary {
    int stage_id; /* 0 when the stage did not run */
    size_t items;
    size_t items_per_task[M2SE_TASK_COUNT];
    double first_loss;
    double last_loss;
} m2se_stage_summary;

typedef struct m2se_train_summary {
    m2se_stage_summary stages[2];
    size_t trainable_parameters;
    size_t adapter_parameters;
} m2se_train_summary;

/* stage 0 runs both stages. resume_checkpoint (may be NULL) is only valid with stage 2. */
M2SE_API m2se_status m2se_train(const m2se_config* config, int stage, const char* resume_checkpoint,
                                m2se_train_summary* out);

/* Scores `predictions` when given, else generates predictions with
 * `checkpoint` (default: the stage-2 checkpoint). NULL test_set uses the
 * config's test set or the built records. Either output may be NULL. */
M2SE_API m2se_status m2se_evaluate(const m2se_config* config, const char* checkpoint, const char* predictions,
                                   const char* test_set, unsigned scheme_mask, char** report_json_out,
                                   char** report_table_out);

M2SE_API m2se_status m2se_stats(const m2se_config* config, char** json_out);

/* Building blocks --------------------------------------------------------- */

/* Peak frame over an OpenFace-style AU table given as CSV text. */
M2SE_API m2se_status m2se_au_peak(const char* csv_text, char** character_out, int64_t* frame_out, double* score_out);

/* Binary sentiment accuracy; scheme is M2SE_SCHEME_NN or M2SE_SCHEME_NP. */
M2SE_API m2se_status m2se_acc2(const int* predicted_classes, const double* gold_scores, size_t n, unsigned scheme,
                               double* out);

#ifdef __cplusplus
}
#endif

#endif
