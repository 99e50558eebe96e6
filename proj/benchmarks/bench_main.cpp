// Compares the OpenMP kernels against the serial reference implementations
// on identical inputs. Run with --quick for the small sizes used by ctest.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#include "deadwood/losses.hpp"
#include "deadwood/postprocess.hpp"
#include "deadwood/reference.hpp"
#include "deadwood/synth.hpp"
#include "deadwood/targets.hpp"

using namespace deadwood;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class F>
double time_ms(F&& f, int reps) {
    // One warmup, then best of reps.
    f();
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

void print_row(const char* kernel, const std::string& size, double par_ms, double ref_ms,
               double max_diff) {
    std::printf("%-22s %-12s %10.2f %10.2f %8.1fx %12.3e\n", kernel, size.c_str(), par_ms,
                ref_ms, ref_ms / std::max(par_ms, 1e-9), max_diff);
}

double max_abs_diff(const FloatGrid& a, const FloatGrid& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.v[i]) - b.v[i]));
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;
    }
    const int dim = quick ? 256 : 1024;
    const int reps = quick ? 1 : 3;

#ifdef _OPENMP
    std::printf("threads: %d%s\n", omp_get_max_threads(), quick ? " (quick mode)" : "");
#endif
    std::printf("%-22s %-12s %10s %10s %9s %12s\n", "kernel", "size", "omp ms", "ref ms",
                "speedup", "max |diff|");

    std::mt19937_64 rng(1);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };

    // A synthetic scene provides realistic labels, masks and heatmaps.
    SceneSpec spec;
    spec.height = dim;
    spec.width = dim;
    spec.pixel_size = 0.25;
    spec.density = 25.0;
    spec.crown_radius_min = 5.0;
    spec.crown_radius_max = 11.0;
    spec.overlap_probability = 0.2;
    spec.seed = 5;
    const Scene scene = generate_scene(spec);
    const std::string size_str = std::to_string(dim) + "x" + std::to_string(dim);

    {
        FloatGrid noisy(dim, dim);
        for (float& v : noisy.v) v = static_cast<float>(uniform(0.0, 1.0));
        FloatGrid out_par, out_ref;
        const double par = time_ms([&] { out_par = gaussian_blur(noisy, 2.0); }, reps);
        const double ser = time_ms([&] { out_ref = ref::gaussian_blur(noisy, 2.0); }, 1);
        print_row("gaussian_blur", size_str, par, ser, max_abs_diff(out_par, out_ref));
    }

    {
        FloatGrid out_par, out_ref;
        const double par =
            time_ms([&] { out_par = compute_sdt_boundary(scene.target.instances); }, reps);
        const double ser = time_ms([&] { out_ref = ref::sdt_boundary(scene.target.instances); }, 1);
        print_row("sdt_boundary", size_str, par, ser, max_abs_diff(out_par, out_ref));
    }

    {
        ByteGrid mask(dim, dim);
        for (auto& v : mask.v) v = uniform(0.0, 1.0) < 0.45 ? 1 : 0;
        InstanceMap out_par, out_ref;
        const double par = time_ms([&] { out_par = label_components(mask, 8); }, reps);
        const double ser = time_ms([&] { out_ref = ref::label_components(mask, 8); }, 1);
        print_row("label_components", size_str, par, ser,
                  out_par.labels == out_ref.labels ? 0.0 : 1.0);
    }

    {
        std::vector<Point2d> centroids;
        const int n_cent = quick ? 80 : 300;
        for (int i = 0; i < n_cent; ++i) {
            centroids.push_back({uniform(0, dim), uniform(0, dim)});
        }
        FloatGrid out_par, out_ref;
        const double par =
            time_ms([&] { out_par = render_centroid_heatmap(centroids, 3.0, dim, dim); }, reps);
        const double ser =
            time_ms([&] { out_ref = ref::centroid_heatmap(centroids, 3.0, dim, dim); }, 1);
        // The production kernel truncates at 4 sigma; exp(-8) is the floor.
        print_row("centroid_heatmap", size_str, par, ser, max_abs_diff(out_par, out_ref));
    }

    {
        const FloatGrid seg = scene.pred.extract_channel(0);
        ByteGrid mask = threshold_only(seg, 0.5);
        const FloatGrid smoothed = gaussian_blur(scene.pred.extract_channel(1), 2.0);
        FloatGrid elev(dim, dim);
        for (size_t i = 0; i < elev.size(); ++i) elev.v[i] = -smoothed.v[i];
        PipelineConfig cfg;
        const MarkerSet markers = extract_markers(scene.pred.extract_channel(1), mask, cfg);
        InstanceMap out_par, out_ref;
        const double par =
            time_ms([&] { out_par = watershed_segment(mask, markers, elev, 8); }, reps);
        const double ser = time_ms([&] { out_ref = ref::watershed(mask, markers, elev, 8); }, 1);
        print_row("watershed", size_str, par, ser, out_par.labels == out_ref.labels ? 0.0 : 1.0);
    }

    {
        FloatGrid logits(dim, dim), target(dim, dim);
        for (float& v : logits.v) v = static_cast<float>(uniform(-3.0, 3.0));
        for (float& v : target.v) v = (rng() & 1) ? 1.0f : 0.0f;
        LossWeights w;
        double total_par = 0.0, total_ref = 0.0;
        const double par = time_ms([&] { total_par = seg_loss(logits, target, w).total; }, reps);
        const double ser =
            time_ms([&] { total_ref = ref::seg_loss_value(logits, target, w); }, 1);
        print_row("seg_loss", size_str, par, ser, std::abs(total_par - total_ref));
    }

    {
        PipelineConfig cfg;
        PipelineResult res;
        const double par = time_ms([&] { res = run_pipeline(scene.pred, cfg); }, reps);
        std::printf("%-22s %-12s %10.2f %10s %9s %12s\n", "run_pipeline (full)", size_str.c_str(),
                    par, "-", "-", "-");
    }

    return 0;
}
