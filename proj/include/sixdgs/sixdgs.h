/* Copyright Contributors to the sixdgs project
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the sixdgs library. Every function returns an sgs_status;
 * on failure sgs_last_error() describes the problem on the calling thread.
 * Handles are opaque and owned by the caller once returned.
 */
#ifndef SIXDGS_H
#define SIXDGS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SGS_BUILDING_LIBRARY)
#    define SGS_API __declspec(dllexport)
#  else
#    define SGS_API __declspec(dllimport)
#  endif
#else
#  define SGS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sgs_status {
    SGS_OK               = 0,
    SGS_ERR_INTERNAL     = 1,
    SGS_ERR_VALIDATION   = 2,
    SGS_ERR_NUMERIC      = 3,
    SGS_ERR_IO           = 4
} sgs_status;

typedef struct sgs_scene sgs_scene;
typedef struct sgs_dataset sgs_dataset;

SGS_API const char *sgs_version(void);
SGS_API const char *sgs_last_error(void);

/* n <= 0 restores the runtime default. */
SGS_API sgs_status sgs_set_threads(int n);

/* ---- synthetic data ---------------------------------------------------- */

typedef struct sgs_synth_spec {
    uint64_t seed;
    int gaussians;
    int train_views;
    int test_views;
    int width;
    int height;
    double strength;
    double orbit_radius;
    double fov_x;
    double background[3];
} sgs_synth_spec;

SGS_API void sgs_synth_spec_default(sgs_synth_spec *spec);
SGS_API sgs_status sgs_synth_write(const sgs_synth_spec *spec, const char *dir);

/* ---- datasets ---------------------------------------------------------- */

SGS_API sgs_status sgs_dataset_load(const char *dir, sgs_dataset **out);
SGS_API void sgs_dataset_free(sgs_dataset *dataset);
SGS_API sgs_status sgs_dataset_views(const sgs_dataset *dataset, size_t *train, size_t *test);

/* ---- scenes ------------------------------------------------------------ */

SGS_API sgs_status sgs_scene_load(const char *path, sgs_scene **out);
SGS_API sgs_status sgs_scene_save(const sgs_scene *scene, const char *path);
SGS_API void sgs_scene_free(sgs_scene *scene);
SGS_API sgs_status sgs_scene_count(const sgs_scene *scene, size_t *count);
/* Counts, parameter statistics and invariant checks as a JSON document.
 * Release the string with sgs_string_free. */
SGS_API sgs_status sgs_scene_info_json(const sgs_scene *scene, char **out);
SGS_API void sgs_string_free(char *s);

/* ---- model options ----------------------------------------------------- */

typedef struct sgs_model_options {
    int normalize_direction_mean;
    int dilation;
} sgs_model_options;

SGS_API void sgs_model_options_default(sgs_model_options *opts);

/* ---- training ---------------------------------------------------------- */

typedef struct sgs_train_config {
    int iterations;
    int init_points;
    double lr_position_init;
    double lr_position_final;
    double lr_covariance;
    double lr_direction;
    double lr_sh_dc;
    double lr_sh_rest;
    double lr_opacity;
    double lr_lambda; /* <= 0: reuse lr_opacity */
    double lambda_ssim;
    double tau_min;
    int lambda_learnable;
    double lambda_value;
    double lambda_window_start;
    double lambda_window_end;
    double densify_start_fraction;
    double densify_stop_fraction;
    int densify_interval;
    double densify_grad_threshold;
    double percent_dense;
    int opacity_reset;
    int opacity_reset_interval;
    double big_gaussian_fraction;
    int no_sh;
    sgs_model_options model;
    uint64_t seed;
    int batch_size;
    int log_interval;
    int checkpoint_interval;
    double scene_extent; /* <= 0: derived from the cameras */
} sgs_train_config;

typedef void (*sgs_log_fn)(int iteration, double loss, double probe_psnr, size_t gaussians,
                           void *user);

SGS_API void sgs_train_config_default(sgs_train_config *config);

/* Trains from a random cube initialization over the dataset's training
 * views. On SGS_ERR_NUMERIC (divergence) *out receives the last checkpoint. */
SGS_API sgs_status sgs_train(const sgs_dataset *dataset, const sgs_train_config *config,
                             sgs_log_fn log, void *user, sgs_scene **out);

/* ---- rendering and evaluation ----------------------------------------- */

/* Renders every frame of a camera document into out_dir as PNG files.
 * width / height <= 0 take the document's size. */
SGS_API sgs_status sgs_render_cameras(const sgs_scene *scene, const char *cameras_path, int width,
                                      int height, const sgs_model_options *opts,
                                      const char *out_dir, size_t *rendered);

typedef struct sgs_eval_result {
    double psnr;
    double ssim;
    double avg_render_ms;
    size_t gaussians;
    size_t views;
} sgs_eval_result;

/* Scores the held-out views (training views when none exist). Each view is
 * rendered `repeats` times for the timing. */
SGS_API sgs_status sgs_evaluate(const sgs_scene *scene, const sgs_dataset *dataset, int repeats,
                                const sgs_model_options *opts, sgs_eval_result *out);

/* Slices every Gaussian at one direction and writes a 3DGS point file. */
SGS_API sgs_status sgs_slice_export(const sgs_scene *scene, const double direction[3],
                                    const sgs_model_options *opts, const char *path);

#ifdef __cplusplus
}
#endif

#endif /* SIXDGS_H */
