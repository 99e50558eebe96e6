#include "deadwood/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>

#include <json.hpp>

#include "deadwood/metrics.hpp"

namespace deadwood {

using nlohmann::json;

void PipelineConfig::validate() const {
    if (!(seg_threshold > 0.0 && seg_threshold < 1.0)) {
        throw ValidationError("seg_threshold must be in (0, 1)");
    }
    if (min_area < 1) throw ValidationError("min_area must be >= 1");
    if (!(boundary_threshold > -1.0 && boundary_threshold < 0.0)) {
        throw ValidationError("boundary_threshold must be in (-1, 0)");
    }
    if (!(boundary_presence_fraction >= 0.0 && boundary_presence_fraction <= 1.0)) {
        throw ValidationError("boundary_presence_fraction must be in [0, 1]");
    }
    if (!(smooth_sigma > 0.0)) throw ValidationError("smooth_sigma must be > 0");
    if (!(peak_min_distance >= 1.0)) throw ValidationError("peak_min_distance must be >= 1");
    if (!(peak_min_intensity > 0.0 && peak_min_intensity < 1.0)) {
        throw ValidationError("peak_min_intensity must be in (0, 1)");
    }
    if (connectivity != 4 && connectivity != 8) {
        throw ValidationError("connectivity must be 4 or 8");
    }
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed config JSON in " + path + ": " + e.what());
    }
    PipelineConfig cfg;
    cfg.seg_threshold = doc.value("seg_threshold", cfg.seg_threshold);
    cfg.min_area = doc.value("min_area", cfg.min_area);
    cfg.boundary_threshold = doc.value("boundary_threshold", cfg.boundary_threshold);
    cfg.boundary_presence_fraction =
        doc.value("boundary_presence_fraction", cfg.boundary_presence_fraction);
    cfg.smooth_sigma = doc.value("smooth_sigma", cfg.smooth_sigma);
    cfg.peak_min_distance = doc.value("peak_min_distance", cfg.peak_min_distance);
    cfg.peak_min_intensity = doc.value("peak_min_intensity", cfg.peak_min_intensity);
    cfg.connectivity = doc.value("connectivity", cfg.connectivity);
    if (doc.contains("peak_metric")) {
        const std::string m = doc["peak_metric"].get<std::string>();
        if (m == "euclidean") {
            cfg.peak_metric = PeakMetric::Euclidean;
        } else if (m == "chebyshev") {
            cfg.peak_metric = PeakMetric::Chebyshev;
        } else {
            throw FormatError("peak_metric must be 'euclidean' or 'chebyshev'");
        }
    }
    if (doc.contains("stages")) {
        const auto& st = doc["stages"];
        cfg.stages.filtering = st.value("filtering", cfg.stages.filtering);
        cfg.stages.hybrid_filtering = st.value("hybrid_filtering", cfg.stages.hybrid_filtering);
        cfg.stages.watershed = st.value("watershed", cfg.stages.watershed);
    }
    cfg.validate();
    return cfg;
}

std::string PipelineConfig::to_json() const {
    json doc;
    doc["seg_threshold"] = seg_threshold;
    doc["min_area"] = min_area;
    doc["boundary_threshold"] = boundary_threshold;
    doc["boundary_presence_fraction"] = boundary_presence_fraction;
    doc["smooth_sigma"] = smooth_sigma;
    doc["peak_min_distance"] = peak_min_distance;
    doc["peak_min_intensity"] = peak_min_intensity;
    doc["connectivity"] = connectivity;
    doc["peak_metric"] = peak_metric == PeakMetric::Euclidean ? "euclidean" : "chebyshev";
    doc["stages"] = {{"filtering", stages.filtering},
                     {"hybrid_filtering", stages.hybrid_filtering},
                     {"watershed", stages.watershed}};
    return doc.dump();
}

StageFlags PipelineConfig::stages_from_name(const std::string& name) {
    if (name == "raw") return {false, false, false};
    if (name == "filter") return {true, true, false};
    if (name == "watershed") return {false, false, true};
    if (name == "final") return {true, true, true};
    throw ValidationError("unknown stage preset: " + name +
                          " (expected raw|filter|watershed|final)");
}

ByteGrid threshold_only(const FloatGrid& seg_prob, double seg_threshold) {
    ByteGrid mask(seg_prob.width, seg_prob.height);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(seg_prob.size()); ++i) {
        mask.v[static_cast<size_t>(i)] =
            seg_prob.v[static_cast<size_t>(i)] >= static_cast<float>(seg_threshold) ? 1 : 0;
    }
    return mask;
}

ByteGrid threshold_and_filter(const FloatGrid& seg_prob, const PipelineConfig& cfg) {
    cfg.validate();
    ByteGrid mask = threshold_only(seg_prob, cfg.seg_threshold);
    const InstanceMap cc = label_components(mask, cfg.connectivity);
    const std::vector<int64_t> areas = label_areas(cc);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(mask.size()); ++i) {
        const int32_t lab = cc.labels[static_cast<size_t>(i)];
        mask.v[static_cast<size_t>(i)] =
            (lab > 0 && areas[static_cast<size_t>(lab)] >= cfg.min_area) ? 1 : 0;
    }
    return mask;
}

ByteGrid hybrid_filter(const ByteGrid& mask, const FloatGrid& hybrid_map,
                       const PipelineConfig& cfg) {
    cfg.validate();
    if (mask.width != hybrid_map.width || mask.height != hybrid_map.height) {
        throw DimensionError("mask and hybrid map shapes differ");
    }
    const int W = mask.width, H = mask.height;

    ByteGrid strong(W, H);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(strong.size()); ++i) {
        strong.v[static_cast<size_t>(i)] =
            hybrid_map.v[static_cast<size_t>(i)] <= static_cast<float>(cfg.boundary_threshold) ? 1 : 0;
    }
    const ByteGrid near_strong = dilate8(strong);

    const InstanceMap regions = label_components(mask, cfg.connectivity);
    const int32_t K = regions.max_label();
    if (K == 0) return mask;

    // Presence is measured on each region's boundary ring: the hybrid head
    // marks instance outlines, so interior pixels of a large region can never
    // be near the cue and a pixel-fraction test would suppress everything big.
    std::vector<int64_t> ring_total(static_cast<size_t>(K) + 1, 0);
    std::vector<int64_t> ring_hits(static_cast<size_t>(K) + 1, 0);
#pragma omp parallel
    {
        std::vector<int64_t> local_total(ring_total.size(), 0);
        std::vector<int64_t> local_hits(ring_hits.size(), 0);
#pragma omp for schedule(static) nowait
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const int32_t lab = regions.at(r, c);
                if (lab == 0) continue;
                const bool ring = (r == 0 || regions.at(r - 1, c) != lab) ||
                                  (r == H - 1 || regions.at(r + 1, c) != lab) ||
                                  (c == 0 || regions.at(r, c - 1) != lab) ||
                                  (c == W - 1 || regions.at(r, c + 1) != lab);
                if (!ring) continue;
                local_total[static_cast<size_t>(lab)]++;
                if (near_strong.at(r, c)) local_hits[static_cast<size_t>(lab)]++;
            }
        }
#pragma omp critical
        for (size_t k = 0; k < ring_total.size(); ++k) {
            ring_total[k] += local_total[k];
            ring_hits[k] += local_hits[k];
        }
    }

    std::vector<uint8_t> keep(static_cast<size_t>(K) + 1, 0);
    for (int32_t lab = 1; lab <= K; ++lab) {
        const double total = static_cast<double>(ring_total[static_cast<size_t>(lab)]);
        const double hits = static_cast<double>(ring_hits[static_cast<size_t>(lab)]);
        keep[static_cast<size_t>(lab)] =
            (hits > 0.0 && hits + 1e-9 >= cfg.boundary_presence_fraction * total) ? 1 : 0;
    }

    ByteGrid out(W, H);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(out.size()); ++i) {
        const int32_t lab = regions.labels[static_cast<size_t>(i)];
        out.v[static_cast<size_t>(i)] = (lab > 0 && keep[static_cast<size_t>(lab)]) ? 1 : 0;
    }
    return out;
}

namespace {

MarkerSet markers_from_smoothed(const FloatGrid& sm, const ByteGrid& mask,
                                const PipelineConfig& cfg) {
    const int W = sm.width, H = sm.height;
    std::vector<Marker> candidates;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!mask.at(r, c)) continue;
            const float v = sm.at(r, c);
            if (v < static_cast<float>(cfg.peak_min_intensity)) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                    if (sm.at(rr, cc) > v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) candidates.push_back({r, c, v});
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Marker& a, const Marker& b) {
        if (a.intensity != b.intensity) return a.intensity > b.intensity;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });

    // Greedy NMS with a bucket grid so dense candidate sets stay O(n).
    const double d = cfg.peak_min_distance;
    const int cell = std::max(1, static_cast<int>(std::ceil(d)));
    const int gw = (W + cell - 1) / cell, gh = (H + cell - 1) / cell;
    std::vector<std::vector<int>> buckets(static_cast<size_t>(gw) * gh);

    MarkerSet accepted;
    for (const Marker& cand : candidates) {
        const int br = cand.row / cell, bc = cand.col / cell;
        bool ok = true;
        for (int dr = -1; dr <= 1 && ok; ++dr) {
            const int rr = br + dr;
            if (rr < 0 || rr >= gh) continue;
            for (int dc = -1; dc <= 1 && ok; ++dc) {
                const int cc = bc + dc;
                if (cc < 0 || cc >= gw) continue;
                for (int idx : buckets[static_cast<size_t>(rr) * gw + cc]) {
                    const Marker& m = accepted[static_cast<size_t>(idx)];
                    const double ddr = m.row - cand.row, ddc = m.col - cand.col;
                    const double dist = cfg.peak_metric == PeakMetric::Euclidean
                                            ? std::sqrt(ddr * ddr + ddc * ddc)
                                            : std::max(std::abs(ddr), std::abs(ddc));
                    if (dist < d) {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if (ok) {
            buckets[static_cast<size_t>(br) * gw + bc].push_back(static_cast<int>(accepted.size()));
            accepted.push_back(cand);
        }
    }
    return accepted;
}

}  // namespace

MarkerSet extract_markers(const FloatGrid& centroid_map, const ByteGrid& mask,
                          const PipelineConfig& cfg) {
    cfg.validate();
    if (centroid_map.width != mask.width || centroid_map.height != mask.height) {
        throw DimensionError("centroid map and mask shapes differ");
    }
    for (float v : centroid_map.v) {
        if (!std::isfinite(v)) throw ValidationError("centroid map contains a non-finite value");
    }
    return markers_from_smoothed(gaussian_blur(centroid_map, cfg.smooth_sigma), mask, cfg);
}

namespace {

struct FloodItem {
    float elev;
    uint64_t seq;
    int32_t pix;
    int32_t label;
};

struct FloodItemGreater {
    bool operator()(const FloodItem& a, const FloodItem& b) const {
        if (a.elev != b.elev) return a.elev > b.elev;
        return a.seq > b.seq;
    }
};

}  // namespace

InstanceMap watershed_segment(const ByteGrid& mask, const MarkerSet& markers,
                              const FloatGrid& elevation, int connectivity,
                              int* discarded) {
    if (connectivity != 4 && connectivity != 8) {
        throw ValidationError("connectivity must be 4 or 8");
    }
    if (mask.width != elevation.width || mask.height != elevation.height) {
        throw DimensionError("mask and elevation shapes differ");
    }
    const int W = mask.width, H = mask.height;
    InstanceMap out(W, H);

    static constexpr int dr8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static constexpr int dc8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int dr4[4] = {-1, 0, 0, 1};
    static constexpr int dc4[4] = {0, -1, 1, 0};
    const int* drs = connectivity == 8 ? dr8 : dr4;
    const int* dcs = connectivity == 8 ? dc8 : dc4;
    const int nn = connectivity;

    std::priority_queue<FloodItem, std::vector<FloodItem>, FloodItemGreater> pq;
    uint64_t seq = 0;
    int drop = 0;
    int32_t next_label = 0;
    for (const Marker& m : markers) {
        if (m.row < 0 || m.row >= H || m.col < 0 || m.col >= W || !mask.at(m.row, m.col)) {
            ++drop;
            continue;
        }
        const int32_t pix = static_cast<int32_t>(static_cast<size_t>(m.row) * W + m.col);
        pq.push({elevation.v[static_cast<size_t>(pix)], seq++, pix, ++next_label});
    }
    if (discarded) *discarded = drop;

    while (!pq.empty()) {
        const FloodItem it = pq.top();
        pq.pop();
        if (out.labels[static_cast<size_t>(it.pix)] != 0) continue;
        out.labels[static_cast<size_t>(it.pix)] = it.label;
        const int r = it.pix / W, c = it.pix % W;
        for (int k = 0; k < nn; ++k) {
            const int rr = r + drs[k], cc = c + dcs[k];
            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
            const size_t ni = static_cast<size_t>(rr) * W + cc;
            if (!mask.v[ni] || out.labels[ni] != 0) continue;
            pq.push({elevation.v[ni], seq++, static_cast<int32_t>(ni), it.label});
        }
    }
    return out;
}

namespace {

// Crack-boundary tracer. Directions run clockwise on screen (row-down)
// coordinates: 0 = east, 1 = south, 2 = west, 3 = north.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

// Outgoing crack edge with the instance on the right of travel.
bool edge_exists(const InstanceMap& m, int32_t lab, int x, int y, int dir) {
    auto is_lab = [&](int r, int c) {
        return r >= 0 && r < m.height && c >= 0 && c < m.width && m.at(r, c) == lab;
    };
    switch (dir) {
        case 0: return is_lab(y, x) && !is_lab(y - 1, x);
        case 1: return is_lab(y, x - 1) && !is_lab(y, x);
        case 2: return is_lab(y - 1, x - 1) && !is_lab(y, x - 1);
        case 3: return is_lab(y - 1, x) && !is_lab(y - 1, x - 1);
    }
    return false;
}

// Outer boundary ring in corner coordinates, starting at the instance's
// topmost-leftmost pixel. Leftmost-turn preference keeps diagonal necks on
// one ring (the ring may touch itself at a pinch corner, never cross).
std::vector<Point2d> trace_outer_ring(const InstanceMap& m, int32_t lab, int r0, int c0) {
    const int start_x = c0, start_y = r0;
    std::vector<Point2d> ring;
    ring.push_back({static_cast<double>(start_x), static_cast<double>(start_y)});

    int x = start_x, y = start_y, dir = 0;  // north side of the start pixel, eastbound
    while (true) {
        x += kDx[dir];
        y += kDy[dir];
        if (x == start_x && y == start_y) break;
        // left, straight, right, back
        const int order[4] = {(dir + 3) % 4, dir, (dir + 1) % 4, (dir + 2) % 4};
        int next_dir = -1;
        for (int cand : order) {
            if (edge_exists(m, lab, x, y, cand)) {
                next_dir = cand;
                break;
            }
        }
        if (next_dir < 0) break;  // cannot happen on a well-formed boundary
        if (next_dir != dir) ring.push_back({static_cast<double>(x), static_cast<double>(y)});
        dir = next_dir;
    }
    ring.push_back(ring.front());
    return ring;
}

}  // namespace

InstanceSet vectorize(const InstanceMap& instances, const GeoTransform& geo,
                      VectorizeMode mode) {
    const int32_t K = instances.max_label();
    InstanceSet out;
    if (K == 0) return out;

    struct Accum {
        int64_t n = 0;
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        int first_r = -1, first_c = -1;
    };
    std::vector<Accum> acc(static_cast<size_t>(K) + 1);
    for (int r = 0; r < instances.height; ++r) {
        for (int c = 0; c < instances.width; ++c) {
            const int32_t lab = instances.at(r, c);
            if (lab == 0) continue;
            Accum& a = acc[static_cast<size_t>(lab)];
            if (a.n == 0) {
                a.first_r = r;
                a.first_c = c;
            }
            a.n++;
            a.sx += c;
            a.sy += r;
            a.sxx += static_cast<double>(c) * c;
            a.syy += static_cast<double>(r) * r;
            a.sxy += static_cast<double>(c) * r;
        }
    }

    out.resize(static_cast<size_t>(K));
#pragma omp parallel for schedule(dynamic)
    for (int32_t lab = 1; lab <= K; ++lab) {
        const Accum& a = acc[static_cast<size_t>(lab)];
        InstanceFeature& feat = out[static_cast<size_t>(lab - 1)];
        feat.id = lab;
        if (a.n == 0) continue;

        const double cx = a.sx / static_cast<double>(a.n);
        const double cy = a.sy / static_cast<double>(a.n);
        feat.centroid_px = {cx, cy};
        feat.centroid_map = geo.pixel_to_map(cx, cy);
        feat.area_px = static_cast<double>(a.n);
        feat.area_map = static_cast<double>(a.n) * geo.pixel_size_x * geo.pixel_size_y;

        std::vector<Point2d> ring_px;  // corner coordinates
        if (mode == VectorizeMode::Contour) {
            ring_px = trace_outer_ring(instances, lab, a.first_r, a.first_c);
        } else {
            const double mu20 = a.sxx / a.n - cx * cx;
            const double mu02 = a.syy / a.n - cy * cy;
            const double mu11 = a.sxy / a.n - cx * cy;
            const double common = std::sqrt((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11);
            const double l1 = std::max(0.0, (mu20 + mu02 + common) / 2.0);
            const double l2 = std::max(0.0, (mu20 + mu02 - common) / 2.0);
            const double semi_a = std::max(0.5, 2.0 * std::sqrt(l1));
            const double semi_b = std::max(0.5, 2.0 * std::sqrt(l2));
            const double theta = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02);
            const double ct = std::cos(theta), st = std::sin(theta);
            constexpr int kSamples = 64;
            for (int i = 0; i < kSamples; ++i) {
                const double t = 2.0 * M_PI * i / kSamples;
                const double ex = semi_a * std::cos(t), ey = semi_b * std::sin(t);
                // center-based pixel coords -> corner coords
                ring_px.push_back({cx + 0.5 + ex * ct - ey * st, cy + 0.5 + ex * st + ey * ct});
            }
            ring_px.push_back(ring_px.front());
        }

        Ring ring_map;
        ring_map.reserve(ring_px.size());
        for (const Point2d& v : ring_px) {
            ring_map.push_back({geo.origin_x + v.x * geo.pixel_size_x,
                                geo.origin_y - v.y * geo.pixel_size_y});
        }
        if (ring_signed_area(ring_map) < 0.0) {
            std::reverse(ring_map.begin(), ring_map.end());
        }
        feat.polygon = std::move(ring_map);
        feat.compactness = compactness(feat.polygon);
    }
    return out;
}

PipelineResult run_pipeline(const MultiChannelRaster& pred_stack, const PipelineConfig& cfg,
                            VectorizeMode mode) {
    cfg.validate();
    if (pred_stack.channels != 3) {
        throw DimensionError("prediction stack must have 3 channels, got " +
                             std::to_string(pred_stack.channels));
    }

    const FloatGrid seg = pred_stack.extract_channel(0);
    const FloatGrid centroid = pred_stack.extract_channel(1);
    const FloatGrid hybrid = pred_stack.extract_channel(2);

    ByteGrid mask = cfg.stages.filtering ? threshold_and_filter(seg, cfg)
                                         : threshold_only(seg, cfg.seg_threshold);
    if (cfg.stages.hybrid_filtering) mask = hybrid_filter(mask, hybrid, cfg);

    PipelineResult res;
    if (cfg.stages.watershed) {
        const FloatGrid smoothed = gaussian_blur(centroid, cfg.smooth_sigma);
        const MarkerSet markers = markers_from_smoothed(smoothed, mask, cfg);
        FloatGrid elevation(smoothed.width, smoothed.height);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(smoothed.size()); ++i) {
            elevation.v[static_cast<size_t>(i)] = -smoothed.v[static_cast<size_t>(i)];
        }
        res.labels = watershed_segment(mask, markers, elevation, cfg.connectivity,
                                       &res.discarded_markers);
    } else {
        res.labels = label_components(mask, cfg.connectivity);
    }
    res.labels.geo = pred_stack.geo;
    res.labels.compact();
    res.instances = vectorize(res.labels, pred_stack.geo, mode);
    return res;
}

}  // namespace deadwood
