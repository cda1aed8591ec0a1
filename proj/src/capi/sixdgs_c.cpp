// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/sixdgs.h"

#include "sixdgs/io.hpp"
#include "sixdgs/metrics.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/parallel.hpp"
#include "sixdgs/slicer.hpp"
#include "sixdgs/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

struct sgs_scene {
    sixdgs::Scene scene;
};

struct sgs_dataset {
    sixdgs::Dataset data;
};

namespace {

thread_local std::string g_last_error;

sgs_status fail(sgs_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

sgs_status status_of(const sixdgs::Error &e) {
    switch (e.kind()) {
    case sixdgs::ErrorKind::Validation:
    case sixdgs::ErrorKind::ParameterDomain: return SGS_ERR_VALIDATION;
    case sixdgs::ErrorKind::Numeric: return SGS_ERR_NUMERIC;
    case sixdgs::ErrorKind::Io: return SGS_ERR_IO;
    }
    return SGS_ERR_INTERNAL;
}

template <class F>
sgs_status guarded(F &&body) {
    try {
        g_last_error.clear();
        body();
        return SGS_OK;
    } catch (const sixdgs::Error &e) {
        return fail(status_of(e), e.what());
    } catch (const std::filesystem::filesystem_error &e) {
        return fail(SGS_ERR_IO, e.what());
    } catch (const std::bad_alloc &) {
        return fail(SGS_ERR_INTERNAL, "out of memory");
    } catch (const std::exception &e) {
        return fail(SGS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SGS_ERR_INTERNAL, "unknown error");
    }
}

#define SGS_REQUIRE(cond, what)                                                                    \
    do {                                                                                           \
        if (!(cond)) return fail(SGS_ERR_VALIDATION, what);                                        \
    } while (0)

sixdgs::ModelOptions model_of(const sgs_model_options *o) {
    sixdgs::ModelOptions m;
    if (o) m.normalize_direction_mean = o->normalize_direction_mean != 0;
    return m;
}

sixdgs::RasterOptions raster_of(const sgs_model_options *o) {
    sixdgs::RasterOptions r;
    if (o) r.dilation = o->dilation != 0;
    return r;
}

sixdgs::TrainConfig train_config_of(const sgs_train_config &c) {
    sixdgs::TrainConfig t;
    t.iterations             = c.iterations;
    t.lr_position_init       = c.lr_position_init;
    t.lr_position_final      = c.lr_position_final;
    t.lr_covariance          = c.lr_covariance;
    t.lr_direction           = c.lr_direction;
    t.lr_sh_dc               = c.lr_sh_dc;
    t.lr_sh_rest             = c.lr_sh_rest;
    t.lr_opacity             = c.lr_opacity;
    if (c.lr_lambda > 0.0) t.lr_lambda = c.lr_lambda;
    t.lambda_ssim            = c.lambda_ssim;
    t.tau_min                = c.tau_min;
    t.lambda_mode            = c.lambda_learnable ? sixdgs::LambdaMode::Learnable
                                                  : sixdgs::LambdaMode::Frozen;
    t.lambda_value           = c.lambda_value;
    t.lambda_window_start    = c.lambda_window_start;
    t.lambda_window_end      = c.lambda_window_end;
    t.densify_start_fraction = c.densify_start_fraction;
    t.densify_stop_fraction  = c.densify_stop_fraction;
    t.densify_interval       = c.densify_interval;
    t.densify_grad_threshold = c.densify_grad_threshold;
    t.percent_dense          = c.percent_dense;
    t.opacity_reset          = c.opacity_reset != 0;
    t.opacity_reset_interval = c.opacity_reset_interval;
    t.big_gaussian_fraction  = c.big_gaussian_fraction;
    t.no_sh                  = c.no_sh != 0;
    t.normalize_direction_mean = c.model.normalize_direction_mean != 0;
    t.dilation               = c.model.dilation != 0;
    t.seed                   = c.seed;
    t.batch_size             = c.batch_size;
    t.log_interval           = c.log_interval;
    t.checkpoint_interval    = c.checkpoint_interval;
    if (c.scene_extent > 0.0) t.scene_extent = c.scene_extent;
    return t;
}

struct Stats {
    double min  = std::numeric_limits<double>::infinity();
    double max  = -std::numeric_limits<double>::infinity();
    double sum  = 0.0;
    std::size_t n = 0;

    void add(double v) {
        if (!std::isfinite(v)) return;
        min = std::min(min, v);
        max = std::max(max, v);
        sum += v;
        ++n;
    }
    nlohmann::json to_json() const {
        if (n == 0) return nullptr;
        return {{"min", min}, {"max", max}, {"mean", sum / static_cast<double>(n)}};
    }
};

nlohmann::json scene_report(const sixdgs::Scene &scene) {
    using namespace sixdgs;
    Stats alpha, lambda, pos_scale, dir_scale, coupling, dc;
    std::size_t non_finite = 0, not_pd = 0, outside = 0, view_independent = 0;
    for (const auto &g : scene.gaussians) {
        const PackedParams p = pack(g);
        bool finite          = true;
        for (int k = 0; k < kParamCount; ++k) {
            if (k == param::kAlpha || k == param::kLambda) continue;
            if (!std::isfinite(p[k])) finite = false;
        }
        if (!finite || std::isnan(g.raw_alpha) || std::isnan(g.raw_lambda_opa)) {
            ++non_finite;
            continue;
        }
        alpha.add(activated_alpha(g));
        const double lam = activated_lambda(g);
        lambda.add(lam);
        if (lam == 0.0) ++view_independent;
        const Mat6 sigma = gaussian_covariance(g);
        Eigen::LLT<Mat6> llt(sigma);
        if (llt.info() != Eigen::Success) ++not_pd;
        const CovarianceBlocks b = partition(sigma);
        pos_scale.add(std::sqrt(b.p.diagonal().maxCoeff()));
        dir_scale.add(std::sqrt(b.d.diagonal().maxCoeff()));
        coupling.add(b.pd.cwiseAbs().maxCoeff());
        for (int c = 0; c < 3; ++c) dc.add(g.sh[c * kShBasisCount]);
        if (!scene.bbox.expanded(2.0).contains(g.raw_mu_p)) ++outside;
    }
    nlohmann::json j;
    j["gaussians"]  = scene.gaussians.size();
    j["background"] = {scene.background[0], scene.background[1], scene.background[2]};
    j["bbox"]       = {{"min", {scene.bbox.min[0], scene.bbox.min[1], scene.bbox.min[2]}},
                       {"max", {scene.bbox.max[0], scene.bbox.max[1], scene.bbox.max[2]}}};
    j["parameters"] = {{"alpha", alpha.to_json()},
                       {"lambda_opa", lambda.to_json()},
                       {"position_sigma_max", pos_scale.to_json()},
                       {"direction_sigma_max", dir_scale.to_json()},
                       {"position_direction_coupling_max", coupling.to_json()},
                       {"sh_dc", dc.to_json()}};
    j["view_independent"] = view_independent;
    j["checks"] = {{"non_finite_parameters", non_finite},
                   {"covariance_not_positive_definite", not_pd},
                   {"outside_keep_box", outside},
                   {"ok", non_finite == 0 && not_pd == 0}};
    return j;
}

} // namespace

extern "C" {

const char *sgs_version(void) { return "0.1.0"; }

const char *sgs_last_error(void) { return g_last_error.c_str(); }

sgs_status sgs_set_threads(int n) {
    return guarded([&] { sixdgs::set_num_threads(n); });
}

void sgs_synth_spec_default(sgs_synth_spec *spec) {
    if (!spec) return;
    const sixdgs::SynthSpec d;
    spec->seed         = d.seed;
    spec->gaussians    = d.gaussians;
    spec->train_views  = d.train_views;
    spec->test_views   = d.test_views;
    spec->width        = d.width;
    spec->height       = d.height;
    spec->strength     = d.strength;
    spec->orbit_radius = d.orbit_radius;
    spec->fov_x        = d.fov_x;
    for (int c = 0; c < 3; ++c) spec->background[c] = d.background[c];
}

sgs_status sgs_synth_write(const sgs_synth_spec *spec, const char *dir) {
    SGS_REQUIRE(spec && dir, "sgs_synth_write: null argument");
    return guarded([&] {
        sixdgs::SynthSpec s;
        s.seed         = spec->seed;
        s.gaussians    = spec->gaussians;
        s.train_views  = spec->train_views;
        s.test_views   = spec->test_views;
        s.width        = spec->width;
        s.height       = spec->height;
        s.strength     = spec->strength;
        s.orbit_radius = spec->orbit_radius;
        s.fov_x        = spec->fov_x;
        s.background   = sixdgs::Vec3(spec->background[0], spec->background[1], spec->background[2]);
        sixdgs::write_dataset(dir, sixdgs::generate_synthetic(s), s);
    });
}

sgs_status sgs_dataset_load(const char *dir, sgs_dataset **out) {
    SGS_REQUIRE(dir && out, "sgs_dataset_load: null argument");
    *out = nullptr;
    return guarded([&] { *out = new sgs_dataset{sixdgs::load_dataset(dir)}; });
}

void sgs_dataset_free(sgs_dataset *dataset) { delete dataset; }

sgs_status sgs_dataset_views(const sgs_dataset *dataset, size_t *train, size_t *test) {
    SGS_REQUIRE(dataset, "sgs_dataset_views: null dataset");
    if (train) *train = dataset->data.train.cameras.size();
    if (test) *test = dataset->data.test.cameras.size();
    return SGS_OK;
}

sgs_status sgs_scene_load(const char *path, sgs_scene **out) {
    SGS_REQUIRE(path && out, "sgs_scene_load: null argument");
    *out = nullptr;
    return guarded([&] { *out = new sgs_scene{sixdgs::load_scene(path)}; });
}

sgs_status sgs_scene_save(const sgs_scene *scene, const char *path) {
    SGS_REQUIRE(scene && path, "sgs_scene_save: null argument");
    return guarded([&] { sixdgs::save_scene(path, scene->scene); });
}

void sgs_scene_free(sgs_scene *scene) { delete scene; }

sgs_status sgs_scene_count(const sgs_scene *scene, size_t *count) {
    SGS_REQUIRE(scene && count, "sgs_scene_count: null argument");
    *count = scene->scene.gaussians.size();
    return SGS_OK;
}

sgs_status sgs_scene_info_json(const sgs_scene *scene, char **out) {
    SGS_REQUIRE(scene && out, "sgs_scene_info_json: null argument");
    *out = nullptr;
    return guarded([&] {
        const std::string text = scene_report(scene->scene).dump(2);
        char *buf              = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out = buf;
    });
}

void sgs_string_free(char *s) { delete[] s; }

void sgs_model_options_default(sgs_model_options *opts) {
    if (!opts) return;
    opts->normalize_direction_mean = 0;
    opts->dilation                 = 1;
}

void sgs_train_config_default(sgs_train_config *c) {
    if (!c) return;
    const sixdgs::TrainConfig d;
    c->iterations             = d.iterations;
    c->init_points            = 100000;
    c->lr_position_init       = d.lr_position_init;
    c->lr_position_final      = d.lr_position_final;
    c->lr_covariance          = d.lr_covariance;
    c->lr_direction           = d.lr_direction;
    c->lr_sh_dc               = d.lr_sh_dc;
    c->lr_sh_rest             = d.lr_sh_rest;
    c->lr_opacity             = d.lr_opacity;
    c->lr_lambda              = 0.0;
    c->lambda_ssim            = d.lambda_ssim;
    c->tau_min                = d.tau_min;
    c->lambda_learnable       = d.lambda_mode == sixdgs::LambdaMode::Learnable;
    c->lambda_value           = d.lambda_value;
    c->lambda_window_start    = d.lambda_window_start;
    c->lambda_window_end      = d.lambda_window_end;
    c->densify_start_fraction = d.densify_start_fraction;
    c->densify_stop_fraction  = d.densify_stop_fraction;
    c->densify_interval       = d.densify_interval;
    c->densify_grad_threshold = d.densify_grad_threshold;
    c->percent_dense          = d.percent_dense;
    c->opacity_reset          = d.opacity_reset;
    c->opacity_reset_interval = d.opacity_reset_interval;
    c->big_gaussian_fraction  = d.big_gaussian_fraction;
    c->no_sh                  = d.no_sh;
    sgs_model_options_default(&c->model);
    c->seed                   = d.seed;
    c->batch_size             = d.batch_size;
    c->log_interval           = d.log_interval;
    c->checkpoint_interval    = d.checkpoint_interval;
    c->scene_extent           = 0.0;
}

sgs_status sgs_train(const sgs_dataset *dataset, const sgs_train_config *config, sgs_log_fn log,
                     void *user, sgs_scene **out) {
    SGS_REQUIRE(dataset && config && out, "sgs_train: null argument");
    SGS_REQUIRE(config->init_points >= 1, "sgs_train: init_points must be >= 1");
    *out = nullptr;
    return guarded([&] {
        const sixdgs::TrainConfig tc = train_config_of(*config);
        tc.validate();
        sixdgs::Bbox box;
        if (dataset->data.bbox) {
            box = *dataset->data.bbox;
        } else {
            box.min = sixdgs::Vec3::Constant(-1.3);
            box.max = sixdgs::Vec3::Constant(1.3);
        }
        sixdgs::Scene init = sixdgs::random_cube_init(box, config->init_points, tc);
        init.background    = dataset->data.background;
        sixdgs::LogSink sink;
        if (log) {
            sink = [&](const sixdgs::LogRecord &r) {
                log(r.iteration, r.loss, r.probe_psnr, r.gaussian_count, user);
            };
        }
        try {
            sixdgs::TrainResult res = sixdgs::train(init, dataset->data.train, tc, sink);
            *out = new sgs_scene{std::move(res.scene)};
        } catch (const sixdgs::TrainingDiverged &e) {
            *out = new sgs_scene{e.checkpoint()};
            throw;
        }
    });
}

sgs_status sgs_render_cameras(const sgs_scene *scene, const char *cameras_path, int width,
                              int height, const sgs_model_options *opts, const char *out_dir,
                              size_t *rendered) {
    SGS_REQUIRE(scene && cameras_path && out_dir, "sgs_render_cameras: null argument");
    return guarded([&] {
        const sixdgs::CameraSet set = sixdgs::load_cameras(cameras_path);
        std::filesystem::create_directories(out_dir);
        std::optional<int> w, h;
        if (width > 0) w = width;
        if (height > 0) h = height;
        const auto model  = model_of(opts);
        const auto raster = raster_of(opts);
        for (std::size_t i = 0; i < set.frames.size(); ++i) {
            const sixdgs::Camera cam = set.camera(i, w, h);
            const sixdgs::Image img  = sixdgs::render(scene->scene, cam, model, raster);
            const std::string stem =
                std::filesystem::path(set.frames[i].file_path).filename().string();
            sixdgs::write_image(std::filesystem::path(out_dir) / (stem + ".png"), img);
        }
        if (rendered) *rendered = set.frames.size();
    });
}

sgs_status sgs_evaluate(const sgs_scene *scene, const sgs_dataset *dataset, int repeats,
                        const sgs_model_options *opts, sgs_eval_result *out) {
    SGS_REQUIRE(scene && dataset && out, "sgs_evaluate: null argument");
    SGS_REQUIRE(repeats >= 1, "sgs_evaluate: repeats must be >= 1");
    return guarded([&] {
        const sixdgs::TrainingData &views =
            dataset->data.test.cameras.empty() ? dataset->data.train : dataset->data.test;
        const auto model  = model_of(opts);
        const auto raster = raster_of(opts);
        double psnr_sum = 0.0, ssim_sum = 0.0, ms_sum = 0.0;
        for (std::size_t v = 0; v < views.cameras.size(); ++v) {
            sixdgs::Image img;
            const auto t0 = std::chrono::steady_clock::now();
            for (int r = 0; r < repeats; ++r) {
                img = sixdgs::render(scene->scene, views.cameras[v], model, raster);
            }
            const auto t1 = std::chrono::steady_clock::now();
            ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
            // Targets on disk are 8-bit, so renders are scored after the same quantization.
            const sixdgs::Image q = sixdgs::quantize8(img);
            psnr_sum += sixdgs::psnr(q, views.images[v]);
            ssim_sum += sixdgs::ssim(q, views.images[v]);
        }
        const double n     = static_cast<double>(views.cameras.size());
        out->psnr          = psnr_sum / n;
        out->ssim          = ssim_sum / n;
        out->avg_render_ms = ms_sum / n;
        out->gaussians     = scene->scene.gaussians.size();
        out->views         = views.cameras.size();
    });
}

sgs_status sgs_slice_export(const sgs_scene *scene, const double direction[3],
                            const sgs_model_options *opts, const char *path) {
    SGS_REQUIRE(scene && direction && path, "sgs_slice_export: null argument");
    const sixdgs::Vec3 dir(direction[0], direction[1], direction[2]);
    SGS_REQUIRE(dir.allFinite() && dir.norm() > 0.0,
                "sgs_slice_export: direction must be finite and non-zero");
    return guarded([&] {
        const sixdgs::Vec3 d  = dir.normalized();
        const auto model      = model_of(opts);
        const auto &gaussians = scene->scene.gaussians;
        std::vector<sixdgs::ConditionalGaussian3D> slices(gaussians.size());
        for (std::size_t i = 0; i < gaussians.size(); ++i) {
            slices[i] = sixdgs::slice(gaussians[i], d, true, model, i);
        }
        sixdgs::export_slice(path, slices);
    });
}

} // extern "C"
