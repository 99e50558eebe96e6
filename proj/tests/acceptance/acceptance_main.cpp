// Acceptance suite: each criterion prints one [PASS]/[FAIL] line; the exit
// code is the number of failed criteria.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "deadwood/losses.hpp"
#include "deadwood/metrics.hpp"
#include "deadwood/postprocess.hpp"
#include "deadwood/reference.hpp"
#include "deadwood/splitter.hpp"
#include "deadwood/synth.hpp"
#include "../support.hpp"

using namespace deadwood;
using namespace deadwood::testsupport;

namespace {

int g_failures = 0;

class Criterion {
  public:
    explicit Criterion(std::string name) : name_(std::move(name)) {
        t0_ = std::chrono::steady_clock::now();
    }
    void finish(bool pass, const std::string& detail) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        std::printf("[%s] %s: %s (%.2f s)\n", pass ? "PASS" : "FAIL", name_.c_str(),
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++g_failures;
    }
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

  private:
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// --- criterion 1: watershed oracle equivalence ------------------------------

void criterion_watershed_oracle() {
    Criterion crit("1. watershed oracle equivalence");
    std::mt19937_64 rng(101);
    int agree = 0;
    const int total = 200;
    for (int iter = 0; iter < total; ++iter) {
        const int w = 6 + static_cast<int>(rng() % 11);
        const int h = 6 + static_cast<int>(rng() % 11);
        ByteGrid mask(w, h);
        for (auto& v : mask.v) v = uniform01(rng) < 0.55 ? 1 : 0;
        FloatGrid elev(w, h);
        for (float& v : elev.v) v = static_cast<float>(uniform_in(rng, -1.0, 0.0));
        MarkerSet markers;
        const int nm = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < nm; ++k) {
            markers.push_back({static_cast<int>(rng() % static_cast<uint64_t>(h)),
                               static_cast<int>(rng() % static_cast<uint64_t>(w)), 1.0f});
        }
        const InstanceMap fast = watershed_segment(mask, markers, elev, 8);
        const InstanceMap slow = ref::watershed(mask, markers, elev, 8);
        if (fast.labels == slow.labels) ++agree;
    }
    const bool time_ok = crit.elapsed() < 5.0;
    crit.finish(agree == total && time_ok,
                fmt("%d/%d scenes agree label-for-label, runtime %s 5 s", agree, total,
                    time_ok ? "<" : ">="));
}

// --- criterion 2: loss gradient checks ---------------------------------------

void criterion_loss_gradients() {
    Criterion crit("2. loss gradient finite-difference checks");
    std::mt19937_64 rng(202);
    LossWeights w;
    w.bce_pos_weight = 2.0;
    w.lambda_boundary = 10.0;

    auto rand_grid = [&rng](int gw, int gh, double lo, double hi) {
        FloatGrid g(gw, gh);
        for (float& v : g.v) v = static_cast<float>(uniform_in(rng, lo, hi));
        return g;
    };
    auto rand_binary = [&rng](int gw, int gh) {
        FloatGrid g(gw, gh);
        for (float& v : g.v) v = (rng() & 1) ? 1.0f : 0.0f;
        return g;
    };
    auto rand_hybrid = [&rng](int gw, int gh, FloatGrid& pred, FloatGrid& target) {
        pred = FloatGrid(gw, gh);
        target = FloatGrid(gw, gh);
        for (size_t i = 0; i < target.size(); ++i) {
            if (rng() % 5 == 0) {
                target.v[i] = -1.0f;
                pred.v[i] = static_cast<float>(uniform_in(rng, -0.7, 0.7));
            } else {
                target.v[i] = static_cast<float>(uniform_in(rng, -0.9, 0.9));
                pred.v[i] = static_cast<float>(target.v[i] + uniform_in(rng, -0.8, 0.8));
            }
        }
    };

    double worst = 0.0;
    const int cases = 50;
    for (int iter = 0; iter < cases; ++iter) {
        const int gw = 4 + static_cast<int>(rng() % 13);
        const int gh = 4 + static_cast<int>(rng() % 13);
        {
            const FloatGrid logits = rand_grid(gw, gh, -3.0, 3.0);
            const FloatGrid target = rand_binary(gw, gh);
            const LossValue loss = seg_loss(logits, target, w);
            const FloatGrid fd = ref::finite_difference_gradient(
                logits, [&](const FloatGrid& g) { return seg_loss(g, target, w).total; }, 1e-4);
            worst = std::max(worst, ref::max_rel_error(loss.gradient[0], fd));
        }
        {
            const FloatGrid pred = rand_grid(gw, gh, 0.0, 1.0);
            const FloatGrid target = rand_grid(gw, gh, 0.0, 1.0);
            const LossValue loss = centroid_loss(pred, target);
            const FloatGrid fd = ref::finite_difference_gradient(
                pred, [&](const FloatGrid& g) { return centroid_loss(g, target).total; }, 1e-4);
            worst = std::max(worst, ref::max_rel_error(loss.gradient[0], fd));
        }
        {
            FloatGrid pred, target;
            rand_hybrid(gw, gh, pred, target);
            const LossValue loss = hybrid_loss(pred, target, w);
            const FloatGrid fd = ref::finite_difference_gradient(
                pred, [&](const FloatGrid& g) { return hybrid_loss(g, target, w).total; }, 1e-4);
            worst = std::max(worst, ref::max_rel_error(loss.gradient[0], fd));
        }
        {
            MultiChannelRaster pred(gw, gh, 3);
            TargetStack target;
            target.stack = MultiChannelRaster(gw, gh, 3);
            FloatGrid ph, th;
            rand_hybrid(gw, gh, ph, th);
            pred.set_channel(0, rand_grid(gw, gh, -3.0, 3.0));
            pred.set_channel(1, rand_grid(gw, gh, 0.0, 1.0));
            pred.set_channel(2, ph);
            target.stack.set_channel(0, rand_binary(gw, gh));
            target.stack.set_channel(1, rand_grid(gw, gh, 0.0, 1.0));
            target.stack.set_channel(2, th);
            const LossValue loss = total_loss(pred, target, w);
            for (int ch = 0; ch < 3; ++ch) {
                const FloatGrid at = pred.extract_channel(ch);
                const FloatGrid fd = ref::finite_difference_gradient(
                    at,
                    [&](const FloatGrid& g) {
                        MultiChannelRaster probe = pred;
                        probe.set_channel(ch, g);
                        return total_loss(probe, target, w).total;
                    },
                    1e-4);
                worst = std::max(worst, ref::max_rel_error(loss.gradient[static_cast<size_t>(ch)], fd));
            }
        }
    }
    const bool time_ok = crit.elapsed() < 30.0;
    crit.finish(worst <= 1e-4 && time_ok,
                fmt("max relative error %.3e over %d cases x 4 ops (tolerance 1e-4)", worst, cases));
}

// --- criterion 3: SDT-boundary invariants ------------------------------------

void criterion_sdt_invariants() {
    Criterion crit("3. SDT-boundary invariants on synthetic scenes");
    int violations = 0;
    std::string why;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SceneSpec spec;
        spec.height = 192;
        spec.width = 192;
        spec.pixel_size = 0.25;
        spec.density = 15.0 + static_cast<double>(seed % 4) * 10.0;
        spec.crown_radius_min = 2.0 + static_cast<double>(seed % 3);
        spec.crown_radius_max = 8.0 + static_cast<double>(seed % 5);
        spec.overlap_probability = (seed % 2) ? 0.3 : 0.0;
        spec.seed = 7000 + seed;
        const Scene scene = generate_scene(spec);
        violations += count_sdt_violations(scene.target.instances,
                                           scene.target.stack.extract_channel(2),
                                           violations == 0 ? &why : nullptr);
    }
    crit.finish(violations == 0,
                violations == 0 ? "0 violations across 100 scenes"
                                : fmt("%d violations (first: %s)", violations, why.c_str()));
}

// --- criterion 4: metric unit values -----------------------------------------

void criterion_metric_units() {
    Criterion crit("4. metric unit values");
    bool ok = true;
    std::string detail = "all exact";

    ByteGrid p(4, 1), g(4, 1);
    p.at(0, 0) = 1;
    p.at(0, 1) = 1;  // {a, b}
    g.at(0, 1) = 1;
    g.at(0, 2) = 1;  // {b, c}
    if (pixel_iou(p, g) != 1.0 / 3.0) {
        ok = false;
        detail = "pixel_iou({a,b},{b,c}) != 1/3";
    }

    MatchResult one;
    one.pairs = {{1, 1, 1.0}};
    const std::vector<Point2d> pc = {{0, 0}, {3, 4}};
    const std::vector<Point2d> gc = {{0, 0}, {0, 0}};
    if (*centroid_rmse(one, pc, gc) != 5.0) {
        ok = false;
        detail = "centroid_rmse (3,4) != 5.0";
    }

    const Prf prf = instance_prf(2, 1, 3);
    if (prf.precision != 2.0 / 3.0 || prf.recall != 2.0 / 5.0 || prf.f1 != 0.5) {
        ok = false;
        detail = "instance_prf(2,1,3) != (2/3, 2/5, 1/2)";
    }

    const Ring square = close_ring({{0, 0}, {3, 0}, {3, 3}, {0, 3}});
    if (std::abs(compactness(square) - M_PI / 4.0) > 1e-12) {
        ok = false;
        detail = "square compactness not pi/4 within 1e-12";
    }
    crit.finish(ok, detail);
}

// --- criterion 5: directional ablation reproduction --------------------------

std::pair<double, double> bootstrap_mean_halfwidth(const std::vector<double>& diffs,
                                                   uint64_t seed) {
    std::mt19937_64 rng(seed);
    const size_t n = diffs.size();
    std::vector<double> means(4000);
    for (double& m : means) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += diffs[rng() % n];
        m = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double lo = means[static_cast<size_t>(0.025 * (means.size() - 1))];
    const double hi = means[static_cast<size_t>(0.975 * (means.size() - 1))];
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(n);
    return {mean, (hi - lo) / 2.0};
}

void criterion_ablation() {
    Criterion crit("5. directional ablation reproduction");
    std::vector<double> tiou_raw, tiou_final, rmse_raw, rmse_final;
    PipelineConfig raw_cfg;
    raw_cfg.stages = PipelineConfig::stages_from_name("raw");
    PipelineConfig final_cfg;
    final_cfg.stages = PipelineConfig::stages_from_name("final");

    for (uint64_t i = 0; i < 50; ++i) {
        SceneSpec spec;
        spec.height = 256;
        spec.width = 256;
        spec.pixel_size = 0.25;
        spec.density = 25.0;
        spec.crown_radius_min = 5.0;
        spec.crown_radius_max = 11.0;
        spec.overlap_probability = 0.3;
        spec.noise_sigma = {0.1, 0.1, 0.1};
        spec.blur_sigma = 1.5;
        spec.seed = 9000 + i;
        const Scene scene = generate_scene(spec);
        const int gt_count = static_cast<int>(scene.annotations.size());
        if (gt_count == 0) continue;

        const PipelineResult raw = run_pipeline(scene.pred, raw_cfg);
        const PipelineResult fin = run_pipeline(scene.pred, final_cfg);

        const MatchResult m_raw = match_instances(raw.labels, scene.target.instances, 0.5);
        const MatchResult m_fin = match_instances(fin.labels, scene.target.instances, 0.5);
        tiou_raw.push_back(tree_iou(m_raw, gt_count).value_or(0.0));
        tiou_final.push_back(tree_iou(m_fin, gt_count).value_or(0.0));

        const auto rmse_r = centroid_rmse(m_raw, instance_centroids_px(raw.labels),
                                          instance_centroids_px(scene.target.instances));
        const auto rmse_f = centroid_rmse(m_fin, instance_centroids_px(fin.labels),
                                          instance_centroids_px(scene.target.instances));
        if (rmse_r && rmse_f) {
            rmse_raw.push_back(*rmse_r);
            rmse_final.push_back(*rmse_f);
        }
    }

    std::vector<double> d_tiou(tiou_final.size());
    for (size_t i = 0; i < d_tiou.size(); ++i) d_tiou[i] = tiou_final[i] - tiou_raw[i];
    std::vector<double> d_rmse(rmse_final.size());
    for (size_t i = 0; i < d_rmse.size(); ++i) d_rmse[i] = rmse_raw[i] - rmse_final[i];

    const auto [tiou_gain, tiou_hw] = bootstrap_mean_halfwidth(d_tiou, 777);
    const auto [rmse_gain, rmse_hw] = bootstrap_mean_halfwidth(d_rmse, 778);
    const double p_tiou = paired_significance(tiou_final, tiou_raw, 10000, 42).p_value;
    const double p_rmse = paired_significance(rmse_final, rmse_raw, 10000, 43).p_value;

    const bool ok = tiou_gain > tiou_hw && rmse_gain > rmse_hw && p_tiou < 0.05 && p_rmse < 0.05 &&
                    crit.elapsed() < 180.0;
    crit.finish(ok, fmt("tree IoU gain %.4f (CI half-width %.4f), centroid error drop %.3f px "
                        "(half-width %.3f), p=%.2e / %.2e",
                        tiou_gain, tiou_hw, rmse_gain, rmse_hw, p_tiou, p_rmse));
}

// --- criterion 6: noiseless end-to-end recovery ------------------------------

void criterion_noiseless_recovery() {
    Criterion crit("6. noiseless end-to-end recovery");
    int tp = 0, fp = 0, fn = 0;
    double sq_sum = 0.0;
    int64_t matched = 0;
    for (uint64_t i = 0; i < 20; ++i) {
        SceneSpec spec;
        spec.height = 256;
        spec.width = 256;
        spec.pixel_size = 0.25;
        spec.density = 20.0;
        spec.crown_radius_min = 5.0;
        spec.crown_radius_max = 10.0;
        spec.overlap_probability = 0.0;
        spec.seed = 11000 + i;
        const Scene scene = generate_scene(spec);
        const PipelineResult res = run_pipeline(scene.pred, PipelineConfig{});
        const MatchResult match = match_instances(res.labels, scene.target.instances, 0.5);
        tp += static_cast<int>(match.pairs.size());
        fp += static_cast<int>(match.unmatched_pred.size());
        fn += static_cast<int>(match.unmatched_gt.size());
        const std::vector<Point2d> pc = instance_centroids_px(res.labels);
        const std::vector<Point2d> gc = instance_centroids_px(scene.target.instances);
        for (const MatchPair& p : match.pairs) {
            const double dx = pc[static_cast<size_t>(p.pred_id)].x - gc[static_cast<size_t>(p.gt_id)].x;
            const double dy = pc[static_cast<size_t>(p.pred_id)].y - gc[static_cast<size_t>(p.gt_id)].y;
            sq_sum += dx * dx + dy * dy;
        }
        matched += static_cast<int64_t>(match.pairs.size());
    }
    const Prf prf = instance_prf(tp, fp, fn);
    const double rmse = matched > 0 ? std::sqrt(sq_sum / static_cast<double>(matched)) : 1e9;
    const bool ok = prf.recall >= 0.99 && prf.precision >= 0.99 && rmse <= 1.0;
    crit.finish(ok, fmt("recall %.4f, precision %.4f, centroid RMSE %.3f px (TP %d FP %d FN %d)",
                        prf.recall, prf.precision, rmse, tp, fp, fn));
}

// --- criterion 7: splitter guarantees ----------------------------------------

void criterion_splitter() {
    Criterion crit("7. splitter guarantees");
    std::mt19937_64 rng(707);
    int split_violations = 0;
    int within_tolerance = 0;
    const int layouts = 500;
    for (int iter = 0; iter < layouts; ++iter) {
        const int n = 20 + static_cast<int>(rng() % 26);
        std::vector<RegionCluster> clusters;
        for (int k = 0; k < n; ++k) {
            RegionCluster c;
            c.cluster_id = k + 1;
            c.members = {k};
            const double z = std::sqrt(-2.0 * std::log(uniform01(rng))) *
                             std::cos(2.0 * M_PI * uniform01(rng));
            c.segment_count = std::max<int64_t>(
                1, static_cast<int64_t>(std::lround(std::exp(2.7 + 0.6 * z))));
            clusters.push_back(std::move(c));
        }
        const SplitAssignment a = assign_partitions(clusters, {0.7, 0.2, 0.1}, rng());
        if (a.cluster_partition.size() != clusters.size()) ++split_violations;
        bool ok = true;
        for (int p = 0; p < 3; ++p) {
            if (std::abs(a.achieved_fractions[static_cast<size_t>(p)] -
                         a.target_ratios[static_cast<size_t>(p)]) > 0.05) {
                ok = false;
            }
        }
        if (ok) ++within_tolerance;
    }
    const double frac_ok = static_cast<double>(within_tolerance) / layouts;
    crit.finish(split_violations == 0 && frac_ok >= 0.95,
                fmt("%d cluster-split violations, %.1f%% of layouts within +-5 points",
                    split_violations, 100.0 * frac_ok));
}

// --- criterion 8: patch arithmetic --------------------------------------------

void criterion_patches() {
    Criterion crit("8. patch arithmetic");
    bool ok = true;
    std::string detail;

    MultiChannelRaster img(512, 512, 1);
    const size_t nine = extract_patches(img, 256, 0.5).size();
    if (nine != 9) {
        ok = false;
        detail = fmt("512x512 gave %zu patches, expected 9", nine);
    }

    std::mt19937_64 rng(808);
    int covered_ok = 0;
    for (int iter = 0; iter < 50; ++iter) {
        const int w = 256 + static_cast<int>(rng() % 700);
        const int h = 256 + static_cast<int>(rng() % 700);
        std::vector<int> cover_x(static_cast<size_t>(w), 0), cover_y(static_cast<size_t>(h), 0);
        bool bounds_ok = true;
        for (int o : patch_origins(w, 256, 128)) {
            if (o < 0 || o + 256 > w) bounds_ok = false;
            for (int i = o; i < o + 256; ++i) cover_x[static_cast<size_t>(i)]++;
        }
        for (int o : patch_origins(h, 256, 128)) {
            if (o < 0 || o + 256 > h) bounds_ok = false;
            for (int i = o; i < o + 256; ++i) cover_y[static_cast<size_t>(i)]++;
        }
        const bool full =
            bounds_ok &&
            std::all_of(cover_x.begin(), cover_x.end(), [](int c) { return c >= 1; }) &&
            std::all_of(cover_y.begin(), cover_y.end(), [](int c) { return c >= 1; });
        if (full) ++covered_ok;
    }
    if (covered_ok != 50) {
        ok = false;
        detail = fmt("full in-bounds coverage on %d/50 sizes", covered_ok);
    }
    if (detail.empty()) detail = "9 patches at 512/256/0.5; full coverage on 50/50 random sizes";
    crit.finish(ok, detail);
}

// --- criterion 9: determinism and scaling budget ------------------------------

void criterion_determinism_scaling() {
    Criterion crit("9. determinism and 4096x4096 scaling budget");
    SceneSpec spec;
    spec.height = 4096;
    spec.width = 4096;
    spec.pixel_size = 0.25;
    spec.density = 2.0;
    spec.crown_radius_min = 6.0;
    spec.crown_radius_max = 14.0;
    spec.overlap_probability = 0.2;
    spec.noise_sigma = {0.05, 0.05, 0.05};
    spec.blur_sigma = 1.0;
    spec.seed = 123;
    const Scene scene = generate_scene(spec);

#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    const auto t0 = std::chrono::steady_clock::now();
    const PipelineResult serial = run_pipeline(scene.pred, PipelineConfig{});
    const double serial_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

#ifdef _OPENMP
    omp_set_num_threads(std::max(4, saved));
#endif
    const PipelineResult parallel = run_pipeline(scene.pred, PipelineConfig{});
#ifdef _OPENMP
    omp_set_num_threads(saved);
#endif

    const bool identical = serial.labels.labels == parallel.labels.labels;
    const bool ok = serial_secs < 30.0 && identical;
    crit.finish(ok, fmt("single-threaded %.2f s (< 30 s), %d instances, multi-threaded output %s",
                        serial_secs, serial.labels.max_label(),
                        identical ? "bitwise identical" : "DIFFERS"));
}

// --- criterion 10: matching optimality ----------------------------------------

void criterion_matching_optimality() {
    Criterion crit("10. matching optimality vs exhaustive permutation");
    std::mt19937_64 rng(1010);
    int agree = 0;
    const int total = 200;
    for (int iter = 0; iter < total; ++iter) {
        auto stamp = [&rng](InstanceMap& m, int labels) {
            for (int k = 1; k <= labels; ++k) {
                const int r0 = static_cast<int>(rng() % 12);
                const int c0 = static_cast<int>(rng() % 12);
                const int hh = 2 + static_cast<int>(rng() % 5);
                const int ww = 2 + static_cast<int>(rng() % 5);
                for (int r = r0; r < std::min(16, r0 + hh); ++r) {
                    for (int c = c0; c < std::min(16, c0 + ww); ++c) m.at(r, c) = k;
                }
            }
        };
        InstanceMap pred(16, 16), gt(16, 16);
        stamp(pred, 1 + static_cast<int>(rng() % 6));
        stamp(gt, 1 + static_cast<int>(rng() % 6));
        const double thr = 0.25;
        const MatchResult res = match_instances(pred, gt, thr);
        double total_iou = 0.0;
        for (const MatchPair& p : res.pairs) total_iou += p.iou;
        const double best = ref::best_matching_total_iou(pred, gt, thr);
        if (std::abs(total_iou - best) <= 1e-12 * std::max(1.0, best)) ++agree;
    }
    crit.finish(agree == total, fmt("%d/%d scenes match the exhaustive optimum", agree, total));
}

}  // namespace

int main() {
    std::printf("deadwood acceptance suite (%s)\n", kVersion);
    criterion_watershed_oracle();
    criterion_loss_gradients();
    criterion_sdt_invariants();
    criterion_metric_units();
    criterion_ablation();
    criterion_noiseless_recovery();
    criterion_splitter();
    criterion_patches();
    criterion_determinism_scaling();
    criterion_matching_optimality();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures;
}
