#include "deadwood/targets.hpp"

#include <algorithm>
#include <cmath>

namespace deadwood {

namespace {

// Continuous corner-space pixel coordinates: pixel (r,c) spans
// [c, c+1] x [r, r+1] and has its center at (c + 0.5, r + 0.5).
Point2d map_to_corner_px(const GeoTransform& geo, const Point2d& p) {
    return {(p.x - geo.origin_x) / geo.pixel_size_x,
            (geo.origin_y - p.y) / geo.pixel_size_y};
}

void scanline_fill(const std::vector<Ring>& rings_px, int32_t label, int height,
                   int width, InstanceMap& out) {
    double min_y = 1e300, max_y = -1e300;
    for (const Ring& ring : rings_px) {
        for (const Point2d& v : ring) {
            min_y = std::min(min_y, v.y);
            max_y = std::max(max_y, v.y);
        }
    }
    const int r0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)));

    std::vector<double> xs;
    for (int r = r0; r <= r1; ++r) {
        const double y = r + 0.5;
        xs.clear();
        for (const Ring& ring : rings_px) {
            for (size_t i = 0; i + 1 < ring.size(); ++i) {
                const double y0 = ring[i].y, y1 = ring[i + 1].y;
                // Half-open span in y so shared vertices count once.
                if ((y0 <= y && y < y1) || (y1 <= y && y < y0)) {
                    const double t = (y - y0) / (y1 - y0);
                    xs.push_back(ring[i].x + t * (ring[i + 1].x - ring[i].x));
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        for (size_t k = 0; k + 1 < xs.size(); k += 2) {
            // Pixel centers c + 0.5 in [xs[k], xs[k+1]).
            int c_start = static_cast<int>(std::ceil(xs[k] - 0.5));
            int c_end = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1;
            c_start = std::max(c_start, 0);
            c_end = std::min(c_end, width - 1);
            for (int c = c_start; c <= c_end; ++c) out.at(r, c) = label;
        }
    }
}

}  // namespace

InstanceMap rasterize_polygons(const std::vector<Polygon>& polys,
                               const GeoTransform& geo, int height, int width,
                               int* dropped) {
    if (height <= 0 || width <= 0) throw ValidationError("raster shape must be positive");
    geo.validate();
    InstanceMap out(width, height, geo);
    int dropped_count = 0;

    for (size_t k = 0; k < polys.size(); ++k) {
        if (polys[k].empty()) throw ValidationError("empty polygon in rasterize input");
        std::vector<Ring> rings_px;
        rings_px.reserve(polys[k].rings.size());
        for (const Ring& ring : polys[k].rings) {
            Ring rp;
            rp.reserve(ring.size());
            for (const Point2d& v : ring) rp.push_back(map_to_corner_px(geo, v));
            rings_px.push_back(std::move(rp));
        }

        double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
        for (const Point2d& v : rings_px[0]) {
            min_x = std::min(min_x, v.x);
            max_x = std::max(max_x, v.x);
            min_y = std::min(min_y, v.y);
            max_y = std::max(max_y, v.y);
        }
        if (max_x <= 0.0 || min_x >= width || max_y <= 0.0 || min_y >= height) {
            ++dropped_count;
            continue;
        }
        scanline_fill(rings_px, static_cast<int32_t>(k + 1), height, width, out);
    }
    if (dropped) *dropped = dropped_count;
    return out;
}

FloatGrid render_centroid_heatmap(const std::vector<Point2d>& centroids_px,
                                  double sigma, int height, int width) {
    if (!(sigma > 0.0)) throw ValidationError("heatmap sigma must be > 0");
    FloatGrid out(width, height, 0.0f);
    const double radius = 4.0 * sigma;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

#pragma omp parallel for schedule(static)
    for (int r = 0; r < height; ++r) {
        float* row = &out.v[static_cast<size_t>(r) * width];
        for (const Point2d& c : centroids_px) {
            const double dy = r - c.y;
            if (std::abs(dy) > radius) continue;
            const int c_lo = std::max(0, static_cast<int>(std::ceil(c.x - radius)));
            const int c_hi = std::min(width - 1, static_cast<int>(std::floor(c.x + radius)));
            for (int col = c_lo; col <= c_hi; ++col) {
                const double dx = col - c.x;
                const double d2 = dx * dx + dy * dy;
                if (d2 > radius * radius) continue;
                const float val = static_cast<float>(std::exp(-d2 * inv2s2));
                if (val > row[col]) row[col] = val;
            }
        }
    }
    return out;
}

namespace {

struct InstanceBox {
    int min_r = 1 << 30, min_c = 1 << 30, max_r = -1, max_c = -1;
    bool empty() const { return max_r < 0; }
};

}  // namespace

FloatGrid compute_sdt_boundary(const InstanceMap& m) {
    const int W = m.width, H = m.height;
    FloatGrid out(W, H, 0.0f);
    const int32_t K = m.max_label();
    if (K == 0) return out;

    // Boundary = foreground pixel with a 4-neighbor of different label,
    // background, or the image edge.
    ByteGrid boundary(W, H);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const int32_t lab = m.at(r, c);
            if (lab == 0) continue;
            const bool b = (r == 0 || m.at(r - 1, c) != lab) ||
                           (r == H - 1 || m.at(r + 1, c) != lab) ||
                           (c == 0 || m.at(r, c - 1) != lab) ||
                           (c == W - 1 || m.at(r, c + 1) != lab);
            boundary.at(r, c) = b ? 1 : 0;
        }
    }

    std::vector<InstanceBox> boxes(static_cast<size_t>(K) + 1);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const int32_t lab = m.at(r, c);
            if (lab == 0) continue;
            InstanceBox& b = boxes[static_cast<size_t>(lab)];
            b.min_r = std::min(b.min_r, r);
            b.max_r = std::max(b.max_r, r);
            b.min_c = std::min(b.min_c, c);
            b.max_c = std::max(b.max_c, c);
        }
    }

    // Instances are disjoint pixel sets, so writes never collide.
#pragma omp parallel for schedule(dynamic)
    for (int32_t lab = 1; lab <= K; ++lab) {
        const InstanceBox& b = boxes[static_cast<size_t>(lab)];
        if (b.empty()) continue;
        const int bw = b.max_c - b.min_c + 1;
        const int bh = b.max_r - b.min_r + 1;

        ByteGrid sources(bw, bh);
        bool any_interior = false;
        for (int r = 0; r < bh; ++r) {
            for (int c = 0; c < bw; ++c) {
                const int gr = r + b.min_r, gc = c + b.min_c;
                if (m.at(gr, gc) != lab) continue;
                if (boundary.at(gr, gc)) {
                    sources.at(r, c) = 1;
                } else {
                    any_interior = true;
                }
            }
        }

        if (!any_interior) {
            // Single pixels, 1-px-thin shapes: everything is boundary.
            for (int r = 0; r < bh; ++r) {
                for (int c = 0; c < bw; ++c) {
                    if (m.at(r + b.min_r, c + b.min_c) == lab) out.at(r + b.min_r, c + b.min_c) = -1.0f;
                }
            }
            continue;
        }

        const std::vector<double> d2 = exact_edt_squared(sources);
        double d2_max = 0.0;
        for (int r = 0; r < bh; ++r) {
            for (int c = 0; c < bw; ++c) {
                if (m.at(r + b.min_r, c + b.min_c) == lab) {
                    d2_max = std::max(d2_max, d2[static_cast<size_t>(r) * bw + c]);
                }
            }
        }
        const double d_max = std::sqrt(d2_max);
        for (int r = 0; r < bh; ++r) {
            for (int c = 0; c < bw; ++c) {
                const int gr = r + b.min_r, gc = c + b.min_c;
                if (m.at(gr, gc) != lab) continue;
                if (boundary.at(gr, gc)) {
                    out.at(gr, gc) = -1.0f;
                } else {
                    out.at(gr, gc) =
                        static_cast<float>(std::sqrt(d2[static_cast<size_t>(r) * bw + c]) / d_max);
                }
            }
        }
    }
    return out;
}

TargetStack build_target_stack(const std::vector<Annotation>& annotations,
                               const GeoTransform& geo, int height, int width,
                               double sigma) {
    std::vector<Polygon> polys;
    polys.reserve(annotations.size());
    for (const Annotation& a : annotations) polys.push_back(a.polygon);

    TargetStack ts;
    ts.instances = rasterize_polygons(polys, geo, height, width, &ts.dropped_outside);

    // Heatmap takes every annotation whose polygon could touch the raster;
    // a crown hidden by a later overlap still marks its center.
    std::vector<Point2d> centroids_px;
    for (const Annotation& a : annotations) {
        const Box2d bb = polygon_bounds(a.polygon);
        const Point2d lo = map_to_corner_px(geo, {bb.min_x, bb.max_y});
        const Point2d hi = map_to_corner_px(geo, {bb.max_x, bb.min_y});
        if (hi.x <= 0.0 || lo.x >= width || hi.y <= 0.0 || lo.y >= height) continue;
        centroids_px.push_back(geo.map_to_pixel(a.centroid.x, a.centroid.y));
    }

    ts.stack = MultiChannelRaster(width, height, 3, geo);
    ts.stack.channel_roles = {ChannelRole::Segmentation, ChannelRole::Centroid,
                              ChannelRole::Hybrid};

    FloatGrid mask(width, height);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(ts.instances.labels.size()); ++i) {
        mask.v[static_cast<size_t>(i)] = ts.instances.labels[static_cast<size_t>(i)] > 0 ? 1.0f : 0.0f;
    }
    ts.stack.set_channel(0, mask);
    ts.stack.set_channel(1, render_centroid_heatmap(centroids_px, sigma, height, width));
    ts.stack.set_channel(2, compute_sdt_boundary(ts.instances));
    return ts;
}

}  // namespace deadwood
