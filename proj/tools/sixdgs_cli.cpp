// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/sixdgs.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitIo         = 4;

struct CliError {
    int code;
    std::string message;
};

struct RunConfig {
    sgs_train_config train{};
    sgs_synth_spec synth{};
    std::string dataset;
    std::string scene;
    std::string cameras;
    std::string out;
    std::string log_file;
    int threads      = 0;
    int repeats      = 20;
    int width        = 0;
    int height       = 0;
    double direction[3] = {0.0, 0.0, 1.0};

    RunConfig() {
        sgs_train_config_default(&train);
        sgs_synth_spec_default(&synth);
        train.log_interval = 100;
    }
};

// One entry per configurable field. The JSON key and the flag share a name.
struct Field {
    std::string key;
    std::string help;
    std::function<void(const json &)> set;
};

template <class T>
std::function<void(const json &)> setter(T *target) {
    return [target](const json &j) { *target = j.get<T>(); };
}

template <>
std::function<void(const json &)> setter(std::string *target) {
    return [target](const json &j) { *target = j.is_string() ? j.get<std::string>() : j.dump(); };
}

std::function<void(const json &)> bool_setter(int *target) {
    return [target](const json &j) {
        if (j.is_number_integer() && (j.get<int>() == 0 || j.get<int>() == 1)) {
            *target = j.get<int>();
            return;
        }
        *target = j.get<bool>() ? 1 : 0;
    };
}

std::function<void(const json &)> vec3_setter(double *target) {
    return [target](const json &j) {
        const auto v = j.get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("expected 3 numbers");
        for (int i = 0; i < 3; ++i) target[i] = v[i];
    };
}

std::vector<Field> fields(RunConfig &c) {
    auto &t = c.train;
    auto &s = c.synth;
    return {
        {"dataset", "dataset directory", setter(&c.dataset)},
        {"scene", "scene file", setter(&c.scene)},
        {"cameras", "camera document", setter(&c.cameras)},
        {"out", "output path", setter(&c.out)},
        {"log_file", "training log file", setter(&c.log_file)},
        {"threads", "worker threads (0: default)", setter(&c.threads)},
        {"repeats", "renders per view for timing", setter(&c.repeats)},
        {"width", "render width (0: from cameras)", setter(&c.width)},
        {"height", "render height (0: from cameras)", setter(&c.height)},
        {"direction", "slice direction [x, y, z]", vec3_setter(c.direction)},
        {"iterations", "training iterations", setter(&t.iterations)},
        {"init_points", "random cube points", setter(&t.init_points)},
        {"lr_position_init", "initial position learning rate", setter(&t.lr_position_init)},
        {"lr_position_final", "final position learning rate", setter(&t.lr_position_final)},
        {"lr_covariance", "covariance factor learning rate", setter(&t.lr_covariance)},
        {"lr_direction", "direction mean learning rate", setter(&t.lr_direction)},
        {"lr_sh_dc", "SH band 0 learning rate", setter(&t.lr_sh_dc)},
        {"lr_sh_rest", "SH bands 1-3 learning rate", setter(&t.lr_sh_rest)},
        {"lr_opacity", "opacity learning rate", setter(&t.lr_opacity)},
        {"lr_lambda", "lambda_opa learning rate (0: opacity rate)", setter(&t.lr_lambda)},
        {"lambda_ssim", "SSIM weight in the loss", setter(&t.lambda_ssim)},
        {"tau_min", "opacity pruning threshold", setter(&t.tau_min)},
        {"lambda_learnable", "train lambda_opa", bool_setter(&t.lambda_learnable)},
        {"lambda_value", "frozen or initial lambda_opa", setter(&t.lambda_value)},
        {"lambda_window_start", "fraction where lambda training starts", setter(&t.lambda_window_start)},
        {"lambda_window_end", "fraction where lambda training ends", setter(&t.lambda_window_end)},
        {"densify_start_fraction", "fraction where densification starts", setter(&t.densify_start_fraction)},
        {"densify_stop_fraction", "fraction where densification stops", setter(&t.densify_stop_fraction)},
        {"densify_interval", "iterations between densifications", setter(&t.densify_interval)},
        {"densify_grad_threshold", "view-space gradient threshold", setter(&t.densify_grad_threshold)},
        {"percent_dense", "clone/split size bound (fraction of extent)", setter(&t.percent_dense)},
        {"opacity_reset", "periodic opacity reset", bool_setter(&t.opacity_reset)},
        {"opacity_reset_interval", "iterations between opacity resets", setter(&t.opacity_reset_interval)},
        {"big_gaussian_fraction", "prune bound on slice scale (fraction of extent)", setter(&t.big_gaussian_fraction)},
        {"no_sh", "band-0 color only", bool_setter(&t.no_sh)},
        {"normalize_direction_mean", "project mu_d onto the unit sphere", bool_setter(&t.model.normalize_direction_mean)},
        {"dilation", "0.3 px screen-space dilation", bool_setter(&t.model.dilation)},
        {"seed", "random seed", [&](const json &j) {
             t.seed = j.get<std::uint64_t>();
             s.seed = t.seed;
         }},
        {"batch_size", "views per iteration", setter(&t.batch_size)},
        {"log_interval", "iterations between log lines", setter(&t.log_interval)},
        {"checkpoint_interval", "iterations between checkpoints", setter(&t.checkpoint_interval)},
        {"scene_extent", "scene extent (0: from cameras)", setter(&t.scene_extent)},
        {"gaussians", "synthetic ground-truth Gaussians", setter(&s.gaussians)},
        {"train_views", "synthetic training views", setter(&s.train_views)},
        {"test_views", "synthetic test views", setter(&s.test_views)},
        {"image_width", "synthetic image width", setter(&s.width)},
        {"image_height", "synthetic image height", setter(&s.height)},
        {"strength", "synthetic view-dependency strength", setter(&s.strength)},
        {"orbit_radius", "synthetic camera orbit radius", setter(&s.orbit_radius)},
        {"fov_x", "synthetic horizontal field of view (radians)", setter(&s.fov_x)},
        {"background", "background color [r, g, b]", vec3_setter(s.background)},
    };
}

void apply(std::vector<Field> &table, const std::string &key, const json &value,
           const std::string &where) {
    for (auto &f : table) {
        if (f.key == key) {
            try {
                f.set(value);
            } catch (const std::exception &e) {
                throw CliError{kExitValidation, where + ": bad value for '" + key + "': " + e.what()};
            }
            return;
        }
    }
    throw CliError{kExitValidation, where + ": unknown key '" + key + "'"};
}

void load_config_file(std::vector<Field> &table, const std::string &path) {
    std::ifstream in(path);
    if (!in) throw CliError{kExitIo, "cannot open config " + path};
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception &e) {
        throw CliError{kExitValidation, "config " + path + ": " + e.what()};
    }
    if (!doc.is_object()) throw CliError{kExitValidation, "config " + path + ": expected an object"};
    for (auto it = doc.begin(); it != doc.end(); ++it) apply(table, it.key(), it.value(), path);
}

// Flag text -> JSON value: numbers, true/false, [a,b,c] lists, else a string.
json parse_flag_value(const std::string &text) {
    if (text == "true" || text == "false") return text == "true";
    json j = json::parse(text, nullptr, false);
    if (!j.is_discarded() && (j.is_number() || j.is_array())) return j;
    if (text.find(',') != std::string::npos) {
        json arr = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            json v = json::parse(item, nullptr, false);
            if (v.is_discarded() || !v.is_number()) return text;
            arr.push_back(v);
        }
        return arr;
    }
    return text;
}

std::string flag_name(const std::string &key) {
    std::string s = key;
    for (char &ch : s) {
        if (ch == '_') ch = '-';
    }
    return "--" + s;
}

int check(sgs_status status) {
    if (status == SGS_OK) return 0;
    throw CliError{static_cast<int>(status), sgs_last_error()};
}

void require(const std::string &value, const char *what) {
    if (value.empty()) {
        throw CliError{kExitValidation, std::string("missing required ") + what};
    }
}

template <class T, void (*Free)(T *)>
struct Handle {
    T *ptr = nullptr;
    ~Handle() {
        if (ptr) Free(ptr);
    }
};

int cmd_synth(RunConfig &c) {
    require(c.out, "--out directory");
    check(sgs_synth_write(&c.synth, c.out.c_str()));
    std::cout << "wrote synthetic dataset to " << c.out << "\n";
    return 0;
}

void log_line(int iteration, double loss, double psnr, size_t gaussians, void *user) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "iter=%d loss=%.9g psnr=%.6f gaussians=%zu\n", iteration, loss,
                  psnr, gaussians);
    std::cout << buf << std::flush;
    if (user) *static_cast<std::ofstream *>(user) << buf << std::flush;
}

int cmd_train(RunConfig &c) {
    require(c.dataset, "dataset directory");
    require(c.out, "--out scene path");
    Handle<sgs_dataset, sgs_dataset_free> ds;
    check(sgs_dataset_load(c.dataset.c_str(), &ds.ptr));
    std::ofstream log;
    if (!c.log_file.empty()) {
        log.open(c.log_file);
        if (!log) throw CliError{kExitIo, "cannot open log file " + c.log_file};
    }
    Handle<sgs_scene, sgs_scene_free> scene;
    const sgs_status st =
        sgs_train(ds.ptr, &c.train, log_line, log.is_open() ? &log : nullptr, &scene.ptr);
    if (st == SGS_ERR_NUMERIC && scene.ptr) {
        const std::string message = sgs_last_error();
        const std::string ckpt    = c.out + ".checkpoint.ply";
        if (sgs_scene_save(scene.ptr, ckpt.c_str()) == SGS_OK) {
            std::cerr << "last checkpoint written to " << ckpt << "\n";
        }
        throw CliError{SGS_ERR_NUMERIC, message};
    }
    check(st);
    check(sgs_scene_save(scene.ptr, c.out.c_str()));
    size_t n = 0;
    check(sgs_scene_count(scene.ptr, &n));
    std::cout << "wrote " << n << " gaussians to " << c.out << "\n";
    return 0;
}

int cmd_render(RunConfig &c) {
    require(c.scene, "scene path");
    require(c.cameras, "camera document");
    require(c.out, "--out directory");
    Handle<sgs_scene, sgs_scene_free> scene;
    check(sgs_scene_load(c.scene.c_str(), &scene.ptr));
    size_t n = 0;
    check(sgs_render_cameras(scene.ptr, c.cameras.c_str(), c.width, c.height, &c.train.model,
                             c.out.c_str(), &n));
    std::cout << "rendered " << n << " views to " << c.out << "\n";
    return 0;
}

int cmd_eval(RunConfig &c) {
    require(c.scene, "scene path");
    require(c.dataset, "dataset directory");
    Handle<sgs_scene, sgs_scene_free> scene;
    Handle<sgs_dataset, sgs_dataset_free> ds;
    check(sgs_scene_load(c.scene.c_str(), &scene.ptr));
    check(sgs_dataset_load(c.dataset.c_str(), &ds.ptr));
    sgs_eval_result r{};
    check(sgs_evaluate(scene.ptr, ds.ptr, c.repeats, &c.train.model, &r));
    std::printf("%-12s %-10s %-10s %-10s %-10s %s\n", "views", "psnr_db", "ssim", "gaussians",
                "render_ms", "fps");
    std::printf("%-12zu %-10.4f %-10.6f %-10zu %-10.3f %.1f\n", r.views, r.psnr, r.ssim,
                r.gaussians, r.avg_render_ms, r.avg_render_ms > 0 ? 1000.0 / r.avg_render_ms : 0.0);
    return 0;
}

int cmd_slice(RunConfig &c) {
    require(c.scene, "scene path");
    require(c.out, "--out point file");
    Handle<sgs_scene, sgs_scene_free> scene;
    check(sgs_scene_load(c.scene.c_str(), &scene.ptr));
    check(sgs_slice_export(scene.ptr, c.direction, &c.train.model, c.out.c_str()));
    std::cout << "wrote slice to " << c.out << "\n";
    return 0;
}

int cmd_info(RunConfig &c) {
    require(c.scene, "scene path");
    Handle<sgs_scene, sgs_scene_free> scene;
    check(sgs_scene_load(c.scene.c_str(), &scene.ptr));
    char *text = nullptr;
    check(sgs_scene_info_json(scene.ptr, &text));
    std::cout << text << "\n";
    sgs_string_free(text);
    return 0;
}

int run(int argc, char **argv) {
    RunConfig config;
    std::vector<Field> table = fields(config);

    CLI::App app{"6D Gaussian splatting on the CPU"};
    app.require_subcommand(1);
    app.set_version_flag("--version", sgs_version());

    std::string config_path;
    std::map<std::string, std::string> flag_values;
    std::string lambda_opa;
    bool no_sh = false;

    struct Sub {
        const char *name;
        const char *help;
        std::vector<std::string> positionals;
        std::function<int(RunConfig &)> cmd;
    };
    const std::vector<Sub> subs = {
        {"synth", "write a synthetic view-dependent dataset", {}, cmd_synth},
        {"train", "train a scene from a dataset", {"dataset"}, cmd_train},
        {"render", "render a scene from a camera document", {"scene", "cameras"}, cmd_render},
        {"eval", "PSNR / SSIM / count / render time against a dataset", {"scene", "dataset"}, cmd_eval},
        {"slice", "export the 3D slice at one direction", {"scene"}, cmd_slice},
        {"info", "counts, parameter statistics and invariant checks", {"scene"}, cmd_info},
    };
    std::map<std::string, std::string> positionals;
    std::vector<CLI::App *> apps;
    for (const auto &s : subs) {
        CLI::App *sub = app.add_subcommand(s.name, s.help);
        apps.push_back(sub);
        for (const auto &p : s.positionals) sub->add_option(p, positionals[p], p)->required();
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--lambda-opa", lambda_opa, "frozen lambda_opa value or 'learnable'");
        sub->add_flag("--no-sh", no_sh, "band-0 color only");
        if (std::string(s.name) == "slice") {
            sub->add_option("--dx", flag_values["dx"], "slice direction x");
            sub->add_option("--dy", flag_values["dy"], "slice direction y");
            sub->add_option("--dz", flag_values["dz"], "slice direction z");
        }
        for (const auto &f : table) {
            if (f.key == "no_sh") continue;
            if (std::find(s.positionals.begin(), s.positionals.end(), f.key) != s.positionals.end()) {
                continue;
            }
            sub->add_option(flag_name(f.key), flag_values[f.key], f.help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    if (!config_path.empty()) load_config_file(table, config_path);
    for (const auto &[key, value] : positionals) {
        if (!value.empty()) apply(table, key, json(value), "argument");
    }
    for (const auto &f : table) {
        const auto it = flag_values.find(f.key);
        if (it != flag_values.end() && !it->second.empty()) {
            apply(table, f.key, parse_flag_value(it->second), flag_name(f.key));
        }
    }
    for (int a = 0; a < 3; ++a) {
        const std::string &v = flag_values[std::string("d") + "xyz"[a]];
        if (v.empty()) continue;
        try {
            config.direction[a] = std::stod(v);
        } catch (const std::exception &) {
            throw CliError{kExitValidation, "--d" + std::string(1, "xyz"[a]) + ": not a number"};
        }
    }
    if (no_sh) config.train.no_sh = 1;
    if (!lambda_opa.empty()) {
        if (lambda_opa == "learnable") {
            config.train.lambda_learnable = 1;
        } else {
            apply(table, "lambda_value", parse_flag_value(lambda_opa), "--lambda-opa");
            config.train.lambda_learnable = 0;
        }
    }
    check(sgs_set_threads(config.threads));

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (apps[i]->parsed()) return subs[i].cmd(config);
    }
    return kExitValidation;
}

} // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const CliError &e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
