// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance criteria. Each criterion prints one line:
//   PRIMARY <n> <name>: PASS|FAIL|WARN (<details>)
// Usage: sixdgs_acceptance [n ...]   (no arguments runs all)

#include "../unit/test_util.hpp"

#include "sixdgs/density.hpp"
#include "sixdgs/metrics.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/parallel.hpp"
#include "sixdgs/rasterizer.hpp"
#include "sixdgs/slicer.hpp"
#include "sixdgs/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <string>

using namespace sixdgs;

namespace {

// Pinned tolerances and budgets.
constexpr int kSliceCases            = 1000;
constexpr double kSchurTol           = 1e-10;
constexpr int kMcSamples             = 1000000;
constexpr int kMcFreshCases          = 20;
constexpr double kMcTol              = 1e-2;
constexpr double kSliceBudgetS       = 120.0;
constexpr int kDirectionsPerGaussian = 10;
constexpr double kSvdTol             = 1e-8;
constexpr double kDetTol             = 1e-12;
constexpr int kRasterScenes          = 50;
constexpr int kRasterMaxSplats       = 500;
constexpr double kRasterTol          = 1e-5;
constexpr double kRasterBudgetS      = 300.0;
constexpr int kGradProbes            = 200;
constexpr double kGradTol            = 1e-4;
constexpr double kGradFloor          = 1e-6;
constexpr double kGradBudgetS        = 600.0;
constexpr double kGateMargin         = 12.0;
constexpr double kGateFloor          = 28.0;
constexpr double kFitBudgetS         = 1800.0;
constexpr int kPerfSplats            = 10000;
constexpr int kPerfSize              = 256;
constexpr double kPerfBudgetMs       = 250.0;

enum class Verdict { Pass, Fail, Warn };

struct Outcome {
    Verdict verdict;
    std::string details;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// Monte-Carlo conditional moments from the sufficient statistics of a
// shared standard-normal sample: x = mu + L z has sample mean mu + L m and
// sample covariance L C L^T, the same estimator as regressing on x directly.
struct NormalMoments {
    Eigen::Matrix<double, 6, 1> mean;
    Mat6 cov;
};

NormalMoments standard_normal_moments(int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Matrix<double, 6, 1> sum = Eigen::Matrix<double, 6, 1>::Zero();
    Mat6 second                     = Mat6::Zero();
    for (int s = 0; s < samples; ++s) {
        Eigen::Matrix<double, 6, 1> z;
        for (int i = 0; i < 6; ++i) z[i] = n(rng);
        sum += z;
        second.noalias() += z * z.transpose();
    }
    NormalMoments m;
    m.mean = sum / samples;
    m.cov  = second / samples - m.mean * m.mean.transpose();
    return m;
}

test::Moments regress(const NormalMoments &z, const Mat6 &L, const Vec3 &mu_p, const Vec3 &mu_d,
                      const Vec3 &d) {
    Eigen::Matrix<double, 6, 1> mu;
    mu << mu_p, mu_d;
    const Eigen::Matrix<double, 6, 1> mean = mu + L * z.mean;
    const Mat6 cov                         = L * z.cov * L.transpose();
    const Mat3 B = cov.topRightCorner<3, 3>() * cov.bottomRightCorner<3, 3>().inverse();
    return {mean.head<3>() + B * (d - mean.tail<3>()),
            cov.topLeftCorner<3, 3>() - B * cov.topRightCorner<3, 3>().transpose()};
}

Outcome slicing_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    const NormalMoments shared = standard_normal_moments(kMcSamples, 1002);
    double schur = 0.0, mc_shared = 0.0, mc_fresh = 0.0;
    for (int i = 0; i < kSliceCases; ++i) {
        const Gaussian6D g = test::random_gaussian(rng);
        const Vec3 d       = test::random_unit(rng);
        const Mat6 L       = activate_cholesky(g.raw_L);
        const ConditionalGaussian3D s = slice(g, d, false);
        const test::Moments ref = test::precision_route(covariance(L), g.raw_mu_p, g.raw_mu_d, d);
        schur = std::max({schur, (s.mu_cond - ref.mean).cwiseAbs().maxCoeff(),
                          (s.sigma_cond - ref.cov).cwiseAbs().maxCoeff()});
        const test::Moments mc = regress(shared, L, g.raw_mu_p, g.raw_mu_d, d);
        mc_shared = std::max({mc_shared, (s.mu_cond - mc.mean).cwiseAbs().maxCoeff(),
                              (s.sigma_cond - mc.cov).cwiseAbs().maxCoeff()});
        if (i % (kSliceCases / kMcFreshCases) == 0) {
            const test::Moments f = test::monte_carlo_conditional(L, g.raw_mu_p, g.raw_mu_d, d, kMcSamples, 2000 + i);
            mc_fresh = std::max({mc_fresh, (s.mu_cond - f.mean).cwiseAbs().maxCoeff(),
                                 (s.sigma_cond - f.cov).cwiseAbs().maxCoeff()});
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = schur <= kSchurTol && mc_shared <= kMcTol && mc_fresh <= kMcTol && secs < kSliceBudgetS;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("%d cases; Schur max err %.3g (tol %.0e); MC 1e6 samples max err %.3g over all cases, %.3g "
                "over %d fresh-sample cases (tol %.0e); %.1f s (budget %.0f s)",
                kSliceCases, schur, kSchurTol, mc_shared, mc_fresh, kMcFreshCases, kMcTol, secs, kSliceBudgetS)};
}

Outcome direction_independence() {
    std::mt19937_64 rng(1003);
    int mismatches = 0;
    for (int i = 0; i < kSliceCases; ++i) {
        const Gaussian6D g = test::random_gaussian(rng);
        const Mat3 first   = slice(g, test::random_unit(rng), false).sigma_cond;
        for (int k = 1; k < kDirectionsPerGaussian; ++k) {
            if (slice(g, test::random_unit(rng), false).sigma_cond != first) ++mismatches;
        }
    }
    return {mismatches == 0 ? Verdict::Pass : Verdict::Fail,
            fmt("%d Gaussians x %d directions; %d bitwise mismatches", kSliceCases, kDirectionsPerGaussian,
                mismatches)};
}

Outcome svd_contract() {
    std::mt19937_64 rng(1004);
    double worst = 0.0, det_err = 0.0;
    for (int i = 0; i < kSliceCases; ++i) {
        const Gaussian6D g = test::random_gaussian(rng);
        const ConditionalGaussian3D s = slice(g, test::random_unit(rng), true);
        const Mat3 R = *s.rotation;
        const Vec3 S = *s.scale;
        const Mat3 rebuilt = R * S.cwiseAbs2().asDiagonal() * R.transpose();
        worst   = std::max(worst, (rebuilt - s.sigma_cond).cwiseAbs().maxCoeff());
        det_err = std::max(det_err, std::abs(R.determinant() - 1.0));
    }
    const bool ok = worst <= kSvdTol && det_err <= kDetTol;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("%d cases; max reconstruction err %.3g (tol %.0e); max |det R - 1| %.3g", kSliceCases, worst,
                kSvdTol, det_err)};
}

Outcome fcond_family() {
    bool ok = f_cond(0.0, 1.0) == 1.0 && f_cond(0.0, 0.35) == 1.0 && f_cond(0.0, 0.0) == 1.0;
    int violations = 0;
    const int steps = 10000;
    for (int i = 0; i <= steps; ++i) {
        const double D = 10.0 * i / steps;
        const double f1 = f_cond(D, 1.0), f35 = f_cond(D, 0.35), f0 = f_cond(D, 0.0);
        if (!(f1 <= f35 && f35 <= f0)) ++violations;
        if (f0 != 1.0) ++violations;
        if (i > 0) {
            const double Dp = 10.0 * (i - 1) / steps;
            if (!(f_cond(D, 1.0) < f_cond(Dp, 1.0)) || !(f_cond(D, 0.35) < f_cond(Dp, 0.35))) ++violations;
        }
    }
    ok = ok && violations == 0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("f(0)=1 for all lambda; %d grid points on D in [0, 10]; %d violations of monotonicity, ordering "
                "or lambda=0 identity",
                steps + 1, violations)};
}

Outcome rasterizer_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1005);
    double worst = 0.0;
    for (int s = 0; s < kRasterScenes; ++s) {
        Scene scene;
        scene.background = Vec3(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
        const int n = std::uniform_int_distribution<int>(1, kRasterMaxSplats)(rng);
        for (int i = 0; i < n; ++i) scene.gaussians.push_back(test::random_splat(rng, 0.8));
        const Vec3 eye = 3.0 * test::random_unit(rng);
        const Camera cam = Camera::look_at(eye, Vec3::Zero(), std::abs(eye.z()) > 2.9 ? Vec3(1, 0, 0) : Vec3(0, 0, 1),
                                           0.9, 64, 64);
        const Image tile = render(scene, cam, {}, {}, Renderer::Tile);
        const Image ref  = render(scene, cam, {}, {}, Renderer::Reference);
        for (std::size_t k = 0; k < tile.rgb.size(); ++k) worst = std::max(worst, std::abs(tile.rgb[k] - ref.rgb[k]));
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= kRasterTol && secs < kRasterBudgetS;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("%d scenes of <= %d splats at 64x64; max per-channel diff %.3g (tol %.0e); %.1f s (budget %.0f s)",
                kRasterScenes, kRasterMaxSplats, worst, kRasterTol, secs, kRasterBudgetS)};
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1006);
    int checked = 0, skipped = 0, failed = 0;
    double worst = 0.0;
    auto run = [&](int w, double lambda_ssim, int views, int probes) {
        GradientOptions opts;
        opts.lambda_ssim  = lambda_ssim;
        opts.train_lambda = true;
        const Scene scene = test::probe_scene(rng, 5, 0.1, 0.4);
        std::vector<Camera> cams;
        std::vector<Image> targets;
        for (int v = 0; v < views; ++v) {
            const Vec3 eye = Vec3(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), -3.0);
            cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3(0.0, -1.0, 0.0), 0.9, w, w));
            Image t(w, w);
            for (double &x : t.rgb) x = test::uniform(rng, 0.0, 1.0);
            targets.push_back(t);
        }
        const BackwardResult br = backward(scene, cams, targets, opts);
        int done = 0, attempts = 0;
        while (done < probes && attempts < 20 * probes) {
            ++attempts;
            const std::size_t gi = std::uniform_int_distribution<std::size_t>(0, scene.gaussians.size() - 1)(rng);
            const int pi         = std::uniform_int_distribution<int>(0, kParamCount - 1)(rng);
            const double a       = br.grads.params[gi][pi];
            if (std::abs(a) <= kGradFloor) continue;
            const auto fd = test::central_difference(scene, gi, pi, cams, targets, opts);
            if (!fd) {
                ++skipped;
                continue;
            }
            const double rel = test::relative_error(a, *fd);
            worst = std::max(worst, rel);
            if (rel > kGradTol) ++failed;
            ++done;
        }
        checked += done;
    };
    for (int s = 0; s < 5; ++s) run(8, 0.0, 1, 25);
    for (int s = 0; s < 5; ++s) run(16, 0.2, 2, 25);
    const double secs = seconds_since(t0);
    const bool ok = checked >= kGradProbes && failed == 0 && secs < kGradBudgetS;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("%d probes (%d at cutoff discontinuities redrawn); %d above tol; worst rel err %.3g (tol %.0e, "
                "|g| > %.0e); %.1f s (budget %.0f s)",
                checked, skipped, failed, worst, kGradTol, kGradFloor, secs, kGradBudgetS)};
}

// ---- toy fits ---------------------------------------------------------------

SynthSpec toy_spec() {
    SynthSpec s;
    s.seed        = 7;
    s.gaussians   = 10;
    s.train_views = 32;
    s.test_views  = 8;
    s.width       = 64;
    s.height      = 64;
    s.strength    = 1.0;
    return s;
}

struct FitResult {
    double psnr = 0.0;
    std::size_t count = 0;
    Scene scene;
    double seconds = 0.0;
};

FitResult toy_fit(const SynthResult &data, TrainConfig config) {
    const auto t0 = Clock::now();
    config.iterations   = 2000;
    config.log_interval = 2000;
    Bbox box;
    box.min = Vec3::Constant(-0.5);
    box.max = Vec3::Constant(0.5);
    Scene init      = random_cube_init(box, 500, config);
    init.bbox       = box;
    init.background = data.scene.background;
    TrainResult r = train(init, data.train, config);
    FitResult f;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.test.cameras.size(); ++i) {
        sum += psnr(render(r.scene, data.test.cameras[i], config.model_options(), config.raster_options()),
                    data.test.images[i]);
    }
    f.psnr    = sum / data.test.cameras.size();
    f.count   = r.scene.gaussians.size();
    f.scene   = std::move(r.scene);
    f.seconds = seconds_since(t0);
    return f;
}

std::map<std::string, FitResult> &fit_cache() {
    static std::map<std::string, FitResult> cache;
    return cache;
}

const FitResult &cached_fit(const std::string &key, const SynthResult &data, const TrainConfig &config) {
    auto &cache = fit_cache();
    auto it     = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, toy_fit(data, config)).first;
    return it->second;
}

TrainConfig base_config() {
    TrainConfig c;
    c.seed = 1;
    return c;
}

Outcome toy_fit_gate() {
    const SynthResult data = generate_synthetic(toy_spec());
    double gt = 0.0;
    for (std::size_t i = 0; i < data.test.cameras.size(); ++i) {
        gt += psnr(render(data.scene, data.test.cameras[i]), data.test.images[i]);
    }
    gt /= data.test.cameras.size();
    const double gate = std::max(gt - kGateMargin, kGateFloor);
    const FitResult &a = cached_fit("base", data, base_config());
    const FitResult b  = toy_fit(data, base_config());
    const bool deterministic = a.scene.gaussians == b.scene.gaussians && a.psnr == b.psnr;
    const bool ok = a.psnr > gate && a.psnr >= kGateFloor && deterministic && a.seconds < kFitBudgetS;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("test PSNR %.2f dB vs gate %.2f dB (ground truth tile render %.2f dB - %.0f, floor %.0f); "
                "%zu Gaussians; deterministic %s; %.1f s per run (budget %.0f s)",
                a.psnr, gate, gt, kGateMargin, kGateFloor, a.count, deterministic ? "yes" : "no", a.seconds,
                kFitBudgetS)};
}

Outcome ablation_trends() {
    const SynthResult data = generate_synthetic(toy_spec());
    const FitResult &base = cached_fit("base", data, base_config());
    TrainConfig no_f      = base_config();
    no_f.lambda_value     = 0.0;
    const FitResult &zero = cached_fit("lambda0", data, no_f);
    TrainConfig low_tau   = base_config();
    low_tau.tau_min       = 0.005;
    const FitResult &tau  = cached_fit("tau0005", data, low_tau);
    const bool psnr_ok  = base.psnr >= zero.psnr;
    const bool count_ok = base.count <= zero.count;
    const bool tau_ok   = tau.count >= base.count;
    const bool ok       = psnr_ok && count_ok && tau_ok;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("PSNR lambda=0.35 %.2f >= lambda=0 %.2f: %s; count lambda=0.35 %zu <= lambda=0 %zu: %s; "
                "count tau=0.005 %zu >= tau=0.01 %zu: %s",
                base.psnr, zero.psnr, psnr_ok ? "yes" : "no", base.count, zero.count, count_ok ? "yes" : "no",
                tau.count, base.count, tau_ok ? "yes" : "no")};
}

Outcome compatibility_degeneracy() {
    std::mt19937_64 rng(1009);
    int mismatches = 0;
    const int scenes = 10;
    for (int s = 0; s < scenes; ++s) {
        std::vector<Gaussian6D> gs;
        for (int i = 0; i < 200; ++i) {
            Gaussian6D g = test::random_splat(rng, 0.8);
            for (int k = 3; k < 15; ++k) {
                const auto [row, col] = offdiag_index(k);
                if (row >= 3 && col < 3) g.raw_L[6 + k] = 0.0;
            }
            for (int c = 0; c < 3; ++c) {
                for (int b = 1; b < kShBasisCount; ++b) g.sh[c * kShBasisCount + b] = 0.0;
            }
            g.raw_lambda_opa = -std::numeric_limits<double>::infinity();
            gs.push_back(g);
        }
        const Camera cam = Camera::look_at(3.0 * test::random_unit(rng), Vec3::Zero(), Vec3(0.3, 0.2, 1.0), 0.9, 64, 64);
        std::vector<ConditionalGaussian3D> a, b;
        for (const auto &g : gs) {
            const Vec3 d = view_direction(g.raw_mu_p, cam.center());
            a.push_back(slice(g, d, false));
            b.push_back(slice(g, (d + 0.5 * test::random_unit(rng)).normalized(), false));
        }
        if (rasterize(a, cam, Vec3::Zero()).rgb != rasterize(b, cam, Vec3::Zero()).rgb) ++mismatches;
    }
    return {mismatches == 0 ? Verdict::Pass : Verdict::Fail,
            fmt("%d scenes with zero position-direction covariance, lambda=0 and band-0 color; %d renders "
                "differ bitwise under direction perturbation",
                scenes, mismatches)};
}

Outcome performance() {
    std::mt19937_64 rng(1010);
    std::vector<Gaussian6D> gs;
    for (int i = 0; i < kPerfSplats; ++i) gs.push_back(test::random_splat(rng, 1.0));
    const Camera cam = Camera::look_at(Vec3(0.0, -3.5, 0.5), Vec3::Zero(), Vec3(0.0, 0.0, 1.0), 0.9, kPerfSize,
                                       kPerfSize);
    const std::vector<InferenceCache> caches = precompute_scene(gs);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 5; ++rep) {
        const auto t0 = Clock::now();
        const auto splats = slice_scene_cached(caches, cam.center());
        const Image img   = rasterize(splats, cam, Vec3::Zero());
        best = std::min(best, 1000.0 * seconds_since(t0));
        if (img.rgb.empty()) return {Verdict::Fail, "empty image"};
    }
    return {best < kPerfBudgetMs ? Verdict::Pass : Verdict::Warn,
            fmt("%d splats at %dx%d, cached slicing + tile render: best of 5 %.1f ms on %d thread(s) "
                "(soft budget %.0f ms on 8 threads)",
                kPerfSplats, kPerfSize, kPerfSize, best, num_threads(), kPerfBudgetMs)};
}

struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
};

const std::vector<Criterion> &criteria() {
    static const std::vector<Criterion> all = {
        {1, "slicing correctness", slicing_correctness},
        {2, "direction independence of conditional covariance", direction_independence},
        {3, "scale/rotation contract", svd_contract},
        {4, "conditional opacity family", fcond_family},
        {5, "rasterizer equivalence", rasterizer_equivalence},
        {6, "gradient check", gradient_check},
        {7, "toy fit", toy_fit_gate},
        {8, "ablation trends", ablation_trends},
        {9, "compatibility degeneracy", compatibility_degeneracy},
        {10, "performance sanity", performance},
    };
    return all;
}

} // namespace

int main(int argc, char **argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    int failures = 0;
    for (const auto &c : criteria()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const char *v = o.verdict == Verdict::Pass ? "PASS" : (o.verdict == Verdict::Warn ? "WARN" : "FAIL");
        std::printf("PRIMARY %d %s: %s (%s)\n", c.id, c.name, v, o.details.c_str());
        std::fflush(stdout);
        failures += o.verdict == Verdict::Fail;
    }
    return failures == 0 ? 0 : 1;
}
