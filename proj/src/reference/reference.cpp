#include "deadwood/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deadwood/image_ops.hpp"

namespace deadwood::ref {

InstanceMap label_components(const ByteGrid& mask, int connectivity) {
    const int W = mask.width, H = mask.height;
    InstanceMap out(W, H);
    int32_t next = 0;
    std::vector<std::pair<int, int>> stack;

    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!mask.at(r, c) || out.at(r, c) != 0) continue;
            ++next;
            stack.push_back({r, c});
            out.at(r, c) = next;
            while (!stack.empty()) {
                const auto [cr, cc] = stack.back();
                stack.pop_back();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (connectivity == 4 && dr != 0 && dc != 0) continue;
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
                        if (!mask.at(nr, nc) || out.at(nr, nc) != 0) continue;
                        out.at(nr, nc) = next;
                        stack.push_back({nr, nc});
                    }
                }
            }
        }
    }
    return out;
}

bool point_in_polygon(const Polygon& poly, double x, double y) {
    bool inside = false;
    for (const Ring& ring : poly.rings) {
        for (size_t i = 0; i + 1 < ring.size(); ++i) {
            const double x0 = ring[i].x, y0 = ring[i].y;
            const double x1 = ring[i + 1].x, y1 = ring[i + 1].y;
            if ((y0 > y) != (y1 > y)) {
                const double x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
                if (x < x_cross) inside = !inside;
            }
        }
    }
    return inside;
}

InstanceMap rasterize_polygons(const std::vector<Polygon>& polys,
                               const GeoTransform& geo, int height, int width) {
    InstanceMap out(width, height, geo);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const Point2d center = geo.pixel_to_map(c, r);
            for (size_t k = 0; k < polys.size(); ++k) {
                if (point_in_polygon(polys[k], center.x, center.y)) {
                    out.at(r, c) = static_cast<int32_t>(k + 1);  // later polygon wins
                }
            }
        }
    }
    return out;
}

FloatGrid sdt_boundary(const InstanceMap& m) {
    const int W = m.width, H = m.height;
    FloatGrid out(W, H, 0.0f);
    const int32_t K = m.max_label();

    for (int32_t lab = 1; lab <= K; ++lab) {
        std::vector<std::pair<int, int>> pixels, boundary;
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                if (m.at(r, c) != lab) continue;
                pixels.push_back({r, c});
                const bool b = (r == 0 || m.at(r - 1, c) != lab) ||
                               (r == H - 1 || m.at(r + 1, c) != lab) ||
                               (c == 0 || m.at(r, c - 1) != lab) ||
                               (c == W - 1 || m.at(r, c + 1) != lab);
                if (b) boundary.push_back({r, c});
            }
        }
        if (pixels.empty()) continue;

        std::vector<double> d2(pixels.size(), std::numeric_limits<double>::infinity());
        double d2_max = 0.0;
        for (size_t i = 0; i < pixels.size(); ++i) {
            for (const auto& [br, bc] : boundary) {
                const double dr = pixels[i].first - br, dc = pixels[i].second - bc;
                d2[i] = std::min(d2[i], dr * dr + dc * dc);
            }
            d2_max = std::max(d2_max, d2[i]);
        }
        for (size_t i = 0; i < pixels.size(); ++i) {
            if (d2[i] == 0.0) {
                out.at(pixels[i].first, pixels[i].second) = -1.0f;
            } else {
                out.at(pixels[i].first, pixels[i].second) =
                    static_cast<float>(std::sqrt(d2[i]) / std::sqrt(d2_max));
            }
        }
    }
    return out;
}

FloatGrid centroid_heatmap(const std::vector<Point2d>& centroids_px, double sigma,
                           int height, int width) {
    FloatGrid out(width, height, 0.0f);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double best = 0.0;
            for (const Point2d& p : centroids_px) {
                const double dx = c - p.x, dy = r - p.y;
                best = std::max(best, std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
            }
            out.at(r, c) = static_cast<float>(best);
        }
    }
    return out;
}

FloatGrid gaussian_blur(const FloatGrid& in, double sigma) {
    if (sigma == 0.0) return in;
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> w(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        w[static_cast<size_t>(k + radius)] = std::exp(-(static_cast<double>(k) * k) /
                                                      (2.0 * sigma * sigma));
        sum += w[static_cast<size_t>(k + radius)];
    }
    for (double& x : w) x /= sum;

    FloatGrid out(in.width, in.height);
    for (int r = 0; r < in.height; ++r) {
        for (int c = 0; c < in.width; ++c) {
            double acc = 0.0;
            for (int kr = -radius; kr <= radius; ++kr) {
                for (int kc = -radius; kc <= radius; ++kc) {
                    const int rr = r + kr, cc = c + kc;
                    if (rr < 0 || rr >= in.height || cc < 0 || cc >= in.width) continue;
                    acc += w[static_cast<size_t>(kr + radius)] * w[static_cast<size_t>(kc + radius)] *
                           in.at(rr, cc);
                }
            }
            out.at(r, c) = static_cast<float>(acc);
        }
    }
    return out;
}

InstanceMap watershed(const ByteGrid& mask, const MarkerSet& markers,
                      const FloatGrid& elevation, int connectivity) {
    const int W = mask.width, H = mask.height;
    InstanceMap out(W, H);

    struct Item {
        float elev;
        uint64_t seq;
        int pix;
        int32_t label;
    };
    std::vector<Item> frontier;
    uint64_t seq = 0;
    int32_t next_label = 0;

    static constexpr int dr8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static constexpr int dc8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int dr4[4] = {-1, 0, 0, 1};
    static constexpr int dc4[4] = {0, -1, 1, 0};
    const int* drs = connectivity == 8 ? dr8 : dr4;
    const int* dcs = connectivity == 8 ? dc8 : dc4;

    for (const Marker& m : markers) {
        if (m.row < 0 || m.row >= H || m.col < 0 || m.col >= W || !mask.at(m.row, m.col)) continue;
        const int pix = m.row * W + m.col;
        frontier.push_back({elevation.v[static_cast<size_t>(pix)], seq++, pix, ++next_label});
    }

    while (!frontier.empty()) {
        size_t best = 0;
        for (size_t i = 1; i < frontier.size(); ++i) {
            if (frontier[i].elev < frontier[best].elev ||
                (frontier[i].elev == frontier[best].elev && frontier[i].seq < frontier[best].seq)) {
                best = i;
            }
        }
        const Item it = frontier[best];
        frontier.erase(frontier.begin() + static_cast<long>(best));
        if (out.labels[static_cast<size_t>(it.pix)] != 0) continue;
        out.labels[static_cast<size_t>(it.pix)] = it.label;
        const int r = it.pix / W, c = it.pix % W;
        for (int k = 0; k < connectivity; ++k) {
            const int rr = r + drs[k], cc = c + dcs[k];
            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
            const size_t ni = static_cast<size_t>(rr) * W + cc;
            if (!mask.v[ni] || out.labels[ni] != 0) continue;
            frontier.push_back({elevation.v[ni], seq++, static_cast<int>(ni), it.label});
        }
    }
    return out;
}

MarkerSet extract_markers(const FloatGrid& centroid_map, const ByteGrid& mask,
                          const PipelineConfig& cfg) {
    // Smoothing reuses the production blur (it has its own oracle); the
    // candidate enumeration and greedy selection below are independent.
    const FloatGrid sm = deadwood::gaussian_blur(centroid_map, cfg.smooth_sigma);
    const int W = sm.width, H = sm.height;

    std::vector<Marker> cands;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!mask.at(r, c)) continue;
            if (sm.at(r, c) < static_cast<float>(cfg.peak_min_intensity)) continue;
            bool ok = true;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                    if (sm.at(rr, cc) > sm.at(r, c)) ok = false;
                }
            }
            if (ok) cands.push_back({r, c, sm.at(r, c)});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Marker& a, const Marker& b) {
        if (a.intensity != b.intensity) return a.intensity > b.intensity;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });

    MarkerSet accepted;
    for (const Marker& cand : cands) {
        bool ok = true;
        for (const Marker& m : accepted) {
            const double dr = m.row - cand.row, dc = m.col - cand.col;
            const double dist = cfg.peak_metric == PeakMetric::Euclidean
                                    ? std::sqrt(dr * dr + dc * dc)
                                    : std::max(std::abs(dr), std::abs(dc));
            if (dist < cfg.peak_min_distance) {
                ok = false;
                break;
            }
        }
        if (ok) accepted.push_back(cand);
    }
    return accepted;
}

double seg_loss_value(const FloatGrid& logits, const FloatGrid& target, const LossWeights& w) {
    const size_t n = logits.size();
    double ce = 0.0, inter = 0.0, psum = 0.0, tsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double z = logits.v[i];
        const double y = target.v[i];
        const double p = 1.0 / (1.0 + std::exp(-z));
        if (w.focal_gamma > 0.0) {
            const double pt = y > 0.5 ? p : 1.0 - p;
            const double at = y > 0.5 ? w.focal_alpha : 1.0 - w.focal_alpha;
            ce += at * std::pow(1.0 - pt, w.focal_gamma) * (-std::log(pt));
        } else {
            ce += y > 0.5 ? -w.bce_pos_weight * std::log(p) : -std::log(1.0 - p);
        }
        inter += p * y;
        psum += p;
        tsum += y;
    }
    const double dice = (2.0 * inter + 1.0) / (psum + tsum + 1.0);
    return ce / static_cast<double>(n) + w.lambda_dice * (1.0 - dice);
}

double centroid_loss_value(const FloatGrid& pred, const FloatGrid& target) {
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]);
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double hybrid_loss_value(const FloatGrid& pred, const FloatGrid& target, const LossWeights& w) {
    double sdt = 0.0, bnd = 0.0;
    int64_t n_sdt = 0, n_bnd = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (target.v[i] == -1.0f) {
            bnd += std::abs(static_cast<double>(pred.v[i]) + 1.0);
            ++n_bnd;
        } else {
            const double r = static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]);
            sdt += std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5;
            ++n_sdt;
        }
    }
    double total = 0.0;
    if (n_sdt > 0) total += w.lambda_sdt * sdt / static_cast<double>(n_sdt);
    if (n_bnd > 0) total += w.lambda_boundary * bnd / static_cast<double>(n_bnd);
    return total;
}

FloatGrid finite_difference_gradient(const FloatGrid& at,
                                     const std::function<double(const FloatGrid&)>& f,
                                     double h) {
    FloatGrid grad(at.width, at.height);
    FloatGrid probe = at;
    for (size_t i = 0; i < at.size(); ++i) {
        const double x = at.v[i];
        const float xp = static_cast<float>(x + h);
        const float xm = static_cast<float>(x - h);
        probe.v[i] = xp;
        const double fp = f(probe);
        probe.v[i] = xm;
        const double fm = f(probe);
        probe.v[i] = at.v[i];
        // Divide by the step the float lattice actually realized.
        grad.v[i] = static_cast<float>((fp - fm) /
                                       (static_cast<double>(xp) - static_cast<double>(xm)));
    }
    return grad;
}

double max_rel_error(const FloatGrid& a, const FloatGrid& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double x = a.v[i], y = b.v[i];
        const double denom = std::max({std::abs(x), std::abs(y), 1e-8});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

namespace {

double matching_search(const std::vector<std::vector<double>>& iou, size_t pred_idx,
                       std::vector<char>& gt_used, double iou_threshold) {
    if (pred_idx == iou.size()) return 0.0;
    // Leave this prediction unmatched.
    double best = matching_search(iou, pred_idx + 1, gt_used, iou_threshold);
    for (size_t g = 0; g < gt_used.size(); ++g) {
        if (gt_used[g] || iou[pred_idx][g] < iou_threshold) continue;
        gt_used[g] = 1;
        best = std::max(best, iou[pred_idx][g] +
                                  matching_search(iou, pred_idx + 1, gt_used, iou_threshold));
        gt_used[g] = 0;
    }
    return best;
}

}  // namespace

double best_matching_total_iou(const InstanceMap& pred, const InstanceMap& gt,
                               double iou_threshold) {
    const int32_t P = pred.max_label(), G = gt.max_label();
    std::vector<std::vector<double>> iou(static_cast<size_t>(P),
                                         std::vector<double>(static_cast<size_t>(G), 0.0));
    for (int32_t p = 1; p <= P; ++p) {
        for (int32_t g = 1; g <= G; ++g) {
            int64_t inter = 0, area_p = 0, area_g = 0;
            for (size_t i = 0; i < pred.labels.size(); ++i) {
                const bool ip = pred.labels[i] == p, ig = gt.labels[i] == g;
                inter += (ip && ig) ? 1 : 0;
                area_p += ip ? 1 : 0;
                area_g += ig ? 1 : 0;
            }
            if (area_p + area_g > inter && inter > 0) {
                iou[static_cast<size_t>(p - 1)][static_cast<size_t>(g - 1)] =
                    static_cast<double>(inter) / static_cast<double>(area_p + area_g - inter);
            }
        }
    }
    std::vector<char> gt_used(static_cast<size_t>(G), 0);
    return matching_search(iou, 0, gt_used, iou_threshold);
}

double exact_signflip_p_value(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    if (n != b.size() || n == 0 || n > 20) {
        throw ValidationError("exact_signflip_p_value needs 1..20 pairs");
    }
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double t_obs = 0.0;
    for (double x : d) t_obs += x;
    t_obs = std::abs(t_obs / static_cast<double>(n));
    const double eps = 1e-12 * (1.0 + t_obs);

    uint64_t count = 0;
    const uint64_t total = 1ull << n;
    for (uint64_t s = 0; s < total; ++s) {
        double m = 0.0;
        for (size_t i = 0; i < n; ++i) m += (s >> i) & 1 ? -d[i] : d[i];
        if (std::abs(m / static_cast<double>(n)) >= t_obs - eps) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace deadwood::ref
