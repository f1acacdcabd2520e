#ifndef MEPP_MEPP_H
#define MEPP_MEPP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MEPP_API __declspec(dllexport)
#else
#define MEPP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mepp_status {
  MEPP_OK = 0,
  MEPP_E_USAGE = 1,
  MEPP_E_PARSE = 2,
  MEPP_E_SEMANTIC = 3,
  MEPP_E_DOMAIN = 4,
  MEPP_E_RANGE = 5,
  MEPP_E_STEP_REJECTED = 6,
  MEPP_E_UNSUPPORTED = 7,
  MEPP_E_IO = 8,
  MEPP_E_MEMORY = 9,
  MEPP_E_INTERNAL = 10
} mepp_status;

typedef struct mepp_model mepp_model;
typedef struct mepp_trajectory mepp_trajectory;

/* Message of the last failed call on this thread ("" after success). */
MEPP_API const char* mepp_last_error(void);
/* Line and column of the last parse diagnostic, 0 when not applicable. */
MEPP_API size_t mepp_last_error_line(void);
MEPP_API size_t mepp_last_error_column(void);
MEPP_API const char* mepp_status_name(mepp_status s);
MEPP_API const char* mepp_version(void);

/* Strings returned through char** are owned by the caller. */
MEPP_API void mepp_string_free(char* s);

MEPP_API mepp_status mepp_model_parse(const char* text, size_t len, mepp_model** out);
MEPP_API mepp_status mepp_model_load(const char* path, mepp_model** out);
MEPP_API void mepp_model_free(mepp_model* m);
MEPP_API mepp_status mepp_model_serialize(const mepp_model* m, char** out);
MEPP_API size_t mepp_model_cells(const mepp_model* m);
MEPP_API size_t mepp_model_components(const mepp_model* m);

/* dt <= 0 or steps < 0 take the model's values. */
MEPP_API mepp_status mepp_run(const mepp_model* m, double dt, int64_t steps,
                              mepp_trajectory** out);
MEPP_API void mepp_trajectory_free(mepp_trajectory* t);
MEPP_API size_t mepp_trajectory_length(const mepp_trajectory* t);
MEPP_API size_t mepp_trajectory_rejections(const mepp_trajectory* t);
/* Value of component k at cell i and record j. */
MEPP_API mepp_status mepp_trajectory_value(const mepp_trajectory* t, size_t j, size_t k,
                                           size_t i, double* out);
MEPP_API mepp_status mepp_trajectory_time(const mepp_trajectory* t, size_t j, double* out);
/* CSV "t,x,var,value". */
MEPP_API mepp_status mepp_trajectory_csv(const mepp_model* m, const mepp_trajectory* t,
                                         char** out);
/* CSV "t,S,mass,Phi,Psi,dSdt". */
MEPP_API mepp_status mepp_diagnostics_csv(const mepp_model* m, const mepp_trajectory* t,
                                          char** out);
MEPP_API mepp_status mepp_trajectory_parse_csv(const mepp_model* m, const char* text,
                                               size_t len, mepp_trajectory** out);

/* Invariant suite; *all_pass is 1 when every row passes. */
MEPP_API mepp_status mepp_verify(const mepp_model* m, uint64_t seed, char** table,
                                 int* all_pass);

/* Rate report JSON {rate_value, series, identity_residual_max}. */
MEPP_API mepp_status mepp_rate(const mepp_model* m, const mepp_trajectory* path, char** json);

typedef struct mepp_fd_options {
  double epsilon;      /* < 0: model noise epsilon, or 1 without noise section */
  double dt;           /* <= 0: model dt */
  uint64_t draws;
  uint64_t probes;
  uint64_t seed;
  int use_model_seed;  /* nonzero: seed from the model noise section */
  double n_sigma;
  int cholesky;        /* nonzero: Cholesky block roots */
} mepp_fd_options;

MEPP_API mepp_fd_options mepp_fd_defaults(void);
/* Fluctuation-dissipation probe at the initial state; JSON report. */
MEPP_API mepp_status mepp_check_fd(const mepp_model* m, const mepp_fd_options* opt,
                                   char** json, int* pass);

typedef struct mepp_sample_options {
  uint64_t trajectories;
  double epsilon;      /* < 0: model */
  double dt;           /* <= 0: model */
  int64_t steps;       /* < 0: model */
  uint64_t seed;
  int use_model_seed;
  uint64_t fd_draws;   /* 0 skips the fluctuation-dissipation probe */
  uint64_t fd_probes;
} mepp_sample_options;

MEPP_API mepp_sample_options mepp_sample_defaults(void);
/* Euler-Maruyama ensemble. Writes traj_NNNNN.csv per replica into out_dir
   when it is non-null; returns the summary JSON. */
MEPP_API mepp_status mepp_sample(const mepp_model* m, const mepp_sample_options* opt,
                                 const char* out_dir, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
