#ifndef MONORACLE_H
#define MONORACLE_H

#include <stddef.h>
#include <stdint.h>

typedef enum MonoracleStatus {
  MONORACLE_STATUS_OK = 0,
  MONORACLE_STATUS_NULL_POINTER = 1,
  MONORACLE_STATUS_INVALID_ARGUMENT = 2,
  MONORACLE_STATUS_PARSE = 3,
  MONORACLE_STATUS_PRECONDITION = 4,
  MONORACLE_STATUS_IO = 5,
  MONORACLE_STATUS_PANIC = 6,
} MonoracleStatus;

typedef struct MonoracleKernel MonoracleKernel;

typedef struct MonoracleModel MonoracleModel;

typedef struct MonoracleSample MonoracleSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated and
// truncated to `capacity` bytes, into `buffer`. Returns the full message
// length excluding the terminator; 0 when the last call succeeded.
size_t monoracle_last_error(char *buffer, size_t capacity);

// Parses a model spec such as `"gaussian:0,1"`.
enum MonoracleStatus monoracle_model_parse(const char *spec, struct MonoracleModel **model);

void monoracle_model_free(struct MonoracleModel *model);

// Squared L2 norm of the model density.
enum MonoracleStatus monoracle_model_l2_norm_sq(const struct MonoracleModel *model, double *value);

// Copies `len` observations into a new sample.
enum MonoracleStatus monoracle_sample_new(const double *values,
                                          size_t len,
                                          struct MonoracleSample **sample);

// Draws `n` observations from `model` with a seeded generator.
enum MonoracleStatus monoracle_sample_draw(const struct MonoracleModel *model,
                                           size_t n,
                                           uint64_t seed,
                                           struct MonoracleSample **sample);

size_t monoracle_sample_len(const struct MonoracleSample *sample);

void monoracle_sample_free(struct MonoracleSample *sample);

// Validated kernel from its transform values on the grid of band `band`
// and resolution `t`.
enum MonoracleStatus monoracle_kernel_new(double band,
                                          uint32_t t,
                                          const double *values,
                                          size_t len,
                                          struct MonoracleKernel **kernel);

// CV-optimal kernel, refined until the discretization gap drops below
// `eps` (or the default resolution caps are hit).
enum MonoracleStatus monoracle_fit(const struct MonoracleSample *sample,
                                   double band,
                                   double eps,
                                   struct MonoracleKernel **kernel);

// CV-optimal kernel on the fixed grid `(band, t)`.
enum MonoracleStatus monoracle_fit_fixed(const struct MonoracleSample *sample,
                                         double band,
                                         uint32_t t,
                                         struct MonoracleKernel **kernel);

// MISE-optimal monotone kernel for `n` draws from `model`.
enum MonoracleStatus monoracle_oracle(const struct MonoracleModel *model,
                                      size_t n,
                                      double band,
                                      uint32_t t,
                                      struct MonoracleKernel **kernel);

void monoracle_kernel_free(struct MonoracleKernel *kernel);

// Number of grid bins; 0 for a null handle.
size_t monoracle_kernel_len(const struct MonoracleKernel *kernel);

double monoracle_kernel_band(const struct MonoracleKernel *kernel);

uint32_t monoracle_kernel_resolution(const struct MonoracleKernel *kernel);

// Copies the transform values into `buffer`, which must hold
// `monoracle_kernel_len` entries.
enum MonoracleStatus monoracle_kernel_values(const struct MonoracleKernel *kernel,
                                             double *buffer,
                                             size_t capacity);

// Kernel value `K(x)` in the space domain.
enum MonoracleStatus monoracle_kernel_eval(const struct MonoracleKernel *kernel,
                                           double x,
                                           double *value);

// Density estimate at `len` points, written to `values`.
enum MonoracleStatus monoracle_estimate(const struct MonoracleKernel *kernel,
                                        const struct MonoracleSample *sample,
                                        const double *points,
                                        size_t len,
                                        double *values);

// Exact MISE of `kernel` for `n` draws from `model`.
enum MonoracleStatus monoracle_mise(const struct MonoracleKernel *kernel,
                                    const struct MonoracleModel *model,
                                    size_t n,
                                    double *value);

// Cross-validation criterion of `kernel` on `sample`.
enum MonoracleStatus monoracle_cv(const struct MonoracleKernel *kernel,
                                  const struct MonoracleSample *sample,
                                  double *value);

// Serializes the kernel as `{"W": .., "t": .., "v": [..]}`. Release the
// string with [`monoracle_string_free`].
enum MonoracleStatus monoracle_kernel_to_json(const struct MonoracleKernel *kernel, char **json);

// Parses and validates a kernel JSON document.
enum MonoracleStatus monoracle_kernel_from_json(const char *json, struct MonoracleKernel **kernel);

void monoracle_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MONORACLE_H */
