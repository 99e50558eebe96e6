#pragma once

// Shared helpers for the unit and acceptance suites. No doctest dependency:
// the acceptance binary reports pass/fail lines itself.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "deadwood/geometry.hpp"
#include "deadwood/raster.hpp"
#include "deadwood/targets.hpp"

namespace deadwood::testsupport {

inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Star-shaped blob polygon in map units around a corner-space pixel center.
inline Polygon random_blob(std::mt19937_64& rng, const GeoTransform& geo, double cx_px,
                           double cy_px, double radius_px, int verts = 32) {
    const double ecc = uniform_in(rng, 0.0, 0.25);
    const double phi = uniform_in(rng, 0.0, M_PI);
    const double a2 = uniform_in(rng, 0.0, 0.12);
    const double p2 = uniform_in(rng, 0.0, 2.0 * M_PI);
    Ring ring;
    for (int k = 0; k < verts; ++k) {
        const double t = 2.0 * M_PI * k / verts;
        const double rho = 1.0 + a2 * std::cos(2.0 * t + p2);
        const double ex = rho * radius_px * (1.0 + ecc) * std::cos(t);
        const double ey = rho * radius_px * (1.0 - ecc) * std::sin(t);
        const double px = cx_px + ex * std::cos(phi) - ey * std::sin(phi);
        const double py = cy_px + ex * std::sin(phi) + ey * std::cos(phi);
        ring.push_back({geo.origin_x + px * geo.pixel_size_x,
                        geo.origin_y - py * geo.pixel_size_y});
    }
    ring.push_back(ring.front());
    return Polygon{{ring}};
}

// Violations of the hybrid-map contract: range, exact -1 on boundary pixels,
// exact +1 at each non-degenerate instance's deepest pixel, -1 minimum.
inline int count_sdt_violations(const InstanceMap& m, const FloatGrid& hybrid,
                                std::string* first_reason = nullptr) {
    int violations = 0;
    auto report = [&](const std::string& why) {
        if (violations == 0 && first_reason) *first_reason = why;
        ++violations;
    };

    const int W = m.width, H = m.height;
    const int32_t K = m.max_label();
    std::vector<float> inst_min(static_cast<size_t>(K) + 1, 2.0f);
    std::vector<float> inst_max(static_cast<size_t>(K) + 1, -2.0f);
    std::vector<char> has_interior(static_cast<size_t>(K) + 1, 0);

    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const float v = hybrid.at(r, c);
            if (v < -1.0f || v > 1.0f || !std::isfinite(v)) report("value outside [-1,1]");
            const int32_t lab = m.at(r, c);
            if (lab == 0) {
                if (v != 0.0f) report("background hybrid value not 0");
                continue;
            }
            const bool boundary = (r == 0 || m.at(r - 1, c) != lab) ||
                                  (r == H - 1 || m.at(r + 1, c) != lab) ||
                                  (c == 0 || m.at(r, c - 1) != lab) ||
                                  (c == W - 1 || m.at(r, c + 1) != lab);
            if (boundary) {
                if (v != -1.0f) report("boundary pixel not exactly -1");
            } else {
                has_interior[static_cast<size_t>(lab)] = 1;
            }
            inst_min[static_cast<size_t>(lab)] = std::min(inst_min[static_cast<size_t>(lab)], v);
            inst_max[static_cast<size_t>(lab)] = std::max(inst_max[static_cast<size_t>(lab)], v);
        }
    }
    for (int32_t lab = 1; lab <= K; ++lab) {
        if (inst_max[static_cast<size_t>(lab)] < -1.5f) continue;  // label absent
        if (inst_min[static_cast<size_t>(lab)] != -1.0f) report("instance minimum not -1");
        if (has_interior[static_cast<size_t>(lab)]) {
            if (inst_max[static_cast<size_t>(lab)] != 1.0f) report("instance maximum not +1");
        } else {
            if (inst_max[static_cast<size_t>(lab)] != -1.0f) {
                report("all-boundary instance has a value above -1");
            }
        }
    }
    return violations;
}

// Full target stack contract, returning the number of violations.
inline int count_target_stack_violations(const TargetStack& ts, std::string* why = nullptr) {
    int violations = 0;
    const FloatGrid mask = ts.stack.extract_channel(0);
    const FloatGrid heat = ts.stack.extract_channel(1);
    const FloatGrid hybrid = ts.stack.extract_channel(2);
    for (size_t i = 0; i < mask.size(); ++i) {
        const bool fg = ts.instances.labels[i] > 0;
        if ((mask.v[i] == 1.0f) != fg) {
            if (violations++ == 0 && why) *why = "mask does not mirror instance map";
        }
        if (mask.v[i] != 0.0f && mask.v[i] != 1.0f) {
            if (violations++ == 0 && why) *why = "mask not binary";
        }
        if (heat.v[i] < 0.0f || heat.v[i] > 1.0f) {
            if (violations++ == 0 && why) *why = "heatmap outside [0,1]";
        }
    }
    violations += count_sdt_violations(ts.instances, hybrid, violations == 0 ? why : nullptr);
    return violations;
}

}  // namespace deadwood::testsupport
