#include "deadwood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "deadwood/image_ops.hpp"

namespace deadwood {

double pixel_iou(const ByteGrid& pred, const ByteGrid& gt) {
    if (!pred.same_shape(gt)) throw DimensionError("pixel_iou shapes differ");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 1.0;  // both empty: vacuous agreement
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double pixel_iou(const InstanceMap& pred, const InstanceMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw DimensionError("pixel_iou shapes differ");
    }
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] > 0, g = gt.labels[i] > 0;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Min-cost perfect assignment on a square matrix (Jonker-Volgenant style
// potentials with shortest augmenting paths). cost is row-major n x n.
std::vector<int> hungarian_min_cost(const std::vector<double>& cost, int n) {
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> match_col(static_cast<size_t>(n) + 1, 0);  // col -> row (1-based)
    std::vector<int> way(static_cast<size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match_col[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = match_col[static_cast<size_t>(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(match_col[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            match_col[static_cast<size_t>(j0)] = match_col[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (match_col[static_cast<size_t>(j)] >= 1) {
            row_to_col[static_cast<size_t>(match_col[static_cast<size_t>(j)] - 1)] = j - 1;
        }
    }
    return row_to_col;
}

}  // namespace

MatchResult match_instances(const InstanceMap& pred, const InstanceMap& gt,
                            double iou_threshold) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw DimensionError("match_instances shapes differ");
    }
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw ValidationError("iou_threshold must be in (0, 1)");
    }

    MatchResult res;
    res.iou_threshold = iou_threshold;

    const std::vector<int64_t> pred_area = label_areas(pred);
    const std::vector<int64_t> gt_area = label_areas(gt);

    std::unordered_map<uint64_t, int64_t> inter;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const int32_t p = pred.labels[i], g = gt.labels[i];
        if (p > 0 && g > 0) {
            inter[(static_cast<uint64_t>(p) << 32) | static_cast<uint32_t>(g)]++;
        }
    }

    // Candidate pairs and the ids that participate in any of them.
    struct Cand {
        int p, g;
        double iou;
    };
    std::vector<Cand> cands;
    for (const auto& [key, cnt] : inter) {
        const int p = static_cast<int>(key >> 32);
        const int g = static_cast<int>(key & 0xffffffffu);
        const double iou = static_cast<double>(cnt) /
                           static_cast<double>(pred_area[static_cast<size_t>(p)] +
                                               gt_area[static_cast<size_t>(g)] - cnt);
        if (iou >= iou_threshold) cands.push_back({p, g, iou});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.p != b.p) return a.p < b.p;
        return a.g < b.g;
    });

    std::vector<int> pred_ids, gt_ids;
    {
        std::vector<char> pin(pred_area.size(), 0), gin(gt_area.size(), 0);
        for (const Cand& c : cands) {
            pin[static_cast<size_t>(c.p)] = 1;
            gin[static_cast<size_t>(c.g)] = 1;
        }
        for (size_t k = 1; k < pin.size(); ++k) {
            if (pin[k]) pred_ids.push_back(static_cast<int>(k));
        }
        for (size_t k = 1; k < gin.size(); ++k) {
            if (gin[k]) gt_ids.push_back(static_cast<int>(k));
        }
    }

    if (!cands.empty()) {
        const int n = static_cast<int>(std::max(pred_ids.size(), gt_ids.size()));
        std::unordered_map<int, int> prow, gcol;
        for (size_t k = 0; k < pred_ids.size(); ++k) prow[pred_ids[k]] = static_cast<int>(k);
        for (size_t k = 0; k < gt_ids.size(); ++k) gcol[gt_ids[k]] = static_cast<int>(k);

        // Non-candidate cells cost 1 (same as IoU 0): matching through them
        // is equivalent to leaving both sides unmatched.
        std::vector<double> cost(static_cast<size_t>(n) * n, 1.0);
        std::vector<double> iou_mat(static_cast<size_t>(n) * n, 0.0);
        for (const Cand& c : cands) {
            const size_t at = static_cast<size_t>(prow[c.p]) * n + gcol[c.g];
            cost[at] = 1.0 - c.iou;
            iou_mat[at] = c.iou;
        }

        const std::vector<int> row_to_col = hungarian_min_cost(cost, n);
        for (size_t r = 0; r < pred_ids.size(); ++r) {
            const int cidx = row_to_col[r];
            if (cidx < 0 || cidx >= static_cast<int>(gt_ids.size())) continue;
            const double iou = iou_mat[r * static_cast<size_t>(n) + static_cast<size_t>(cidx)];
            if (iou >= iou_threshold) {
                res.pairs.push_back({pred_ids[r], gt_ids[static_cast<size_t>(cidx)], iou});
            }
        }
        std::sort(res.pairs.begin(), res.pairs.end(),
                  [](const MatchPair& a, const MatchPair& b) { return a.pred_id < b.pred_id; });
    }

    std::vector<char> matched_p(pred_area.size(), 0), matched_g(gt_area.size(), 0);
    for (const MatchPair& pr : res.pairs) {
        matched_p[static_cast<size_t>(pr.pred_id)] = 1;
        matched_g[static_cast<size_t>(pr.gt_id)] = 1;
    }
    for (size_t k = 1; k < pred_area.size(); ++k) {
        if (pred_area[k] > 0 && !matched_p[k]) res.unmatched_pred.push_back(static_cast<int>(k));
    }
    for (size_t k = 1; k < gt_area.size(); ++k) {
        if (gt_area[k] > 0 && !matched_g[k]) res.unmatched_gt.push_back(static_cast<int>(k));
    }
    return res;
}

std::optional<double> tree_iou(const MatchResult& match, int gt_count) {
    if (gt_count == 0) return std::nullopt;
    double sum = 0.0;
    for (const MatchPair& p : match.pairs) sum += p.iou;
    return sum / static_cast<double>(gt_count);
}

std::optional<double> centroid_rmse(const MatchResult& match,
                                    const std::vector<Point2d>& pred_centroids_px,
                                    const std::vector<Point2d>& gt_centroids_px) {
    if (match.pairs.empty()) return std::nullopt;
    double sum = 0.0;
    for (const MatchPair& p : match.pairs) {
        const Point2d& a = pred_centroids_px.at(static_cast<size_t>(p.pred_id));
        const Point2d& b = gt_centroids_px.at(static_cast<size_t>(p.gt_id));
        const double dx = a.x - b.x, dy = a.y - b.y;
        sum += dx * dx + dy * dy;
    }
    return std::sqrt(sum / static_cast<double>(match.pairs.size()));
}

Prf instance_prf(int tp, int fp, int fn) {
    Prf out;
    out.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    out.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
    // Algebraically 2PR/(P+R); this form stays exact in floating point.
    out.f1 = (tp + fp + fn) == 0 ? 1.0
                                 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    return out;
}

Prf instance_prf(const MatchResult& match) {
    return instance_prf(static_cast<int>(match.pairs.size()),
                        static_cast<int>(match.unmatched_pred.size()),
                        static_cast<int>(match.unmatched_gt.size()));
}

double compactness(const Ring& polygon) {
    if (polygon.size() < 4) throw ValidationError("degenerate polygon");
    const double perimeter = ring_perimeter(polygon);
    if (!(perimeter > 0.0)) throw ValidationError("degenerate polygon: zero perimeter");
    const double area = std::abs(ring_signed_area(polygon));
    const double c = 4.0 * M_PI * area / (perimeter * perimeter);
    return std::min(1.0, std::max(c, std::numeric_limits<double>::min()));
}

std::vector<Point2d> instance_centroids_px(const InstanceMap& m) {
    const int32_t K = m.max_label();
    std::vector<double> sx(static_cast<size_t>(K) + 1, 0.0), sy(sx.size(), 0.0);
    std::vector<int64_t> n(sx.size(), 0);
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            const int32_t lab = m.at(r, c);
            if (lab == 0) continue;
            sx[static_cast<size_t>(lab)] += c;
            sy[static_cast<size_t>(lab)] += r;
            n[static_cast<size_t>(lab)]++;
        }
    }
    std::vector<Point2d> out(sx.size());
    for (size_t k = 1; k < out.size(); ++k) {
        if (n[k] > 0) out[k] = {sx[k] / static_cast<double>(n[k]), sy[k] / static_cast<double>(n[k])};
    }
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& sample, int n_boot,
                                       std::mt19937_64& rng) {
    const size_t n = sample.size();
    std::vector<double> means(static_cast<size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            s += sample[rng() % n];
        }
        means[static_cast<size_t>(b)] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    return {quantile_sorted(means, 0.025), quantile_sorted(means, 0.975)};
}

}  // namespace

SignificanceResult paired_significance(const std::vector<double>& scores_a,
                                       const std::vector<double>& scores_b,
                                       int n_boot, uint64_t seed) {
    if (scores_a.size() != scores_b.size()) {
        throw ValidationError("paired samples must have equal length");
    }
    const size_t n = scores_a.size();
    if (n < 2) throw ValidationError("paired samples need at least 2 entries");
    if (n_boot < 1) throw ValidationError("n_boot must be >= 1");

    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = scores_a[i] - scores_b[i];
    double t_obs = 0.0;
    for (double x : d) t_obs += x;
    t_obs = std::abs(t_obs / static_cast<double>(n));
    const double eps = 1e-12 * (1.0 + t_obs);

    SignificanceResult res;
    std::mt19937_64 rng(seed);

    if (n <= 12) {
        const uint64_t total = 1ull << n;
        uint64_t count = 0;
        for (uint64_t s = 0; s < total; ++s) {
            double m = 0.0;
            for (size_t i = 0; i < n; ++i) {
                m += (s >> i) & 1 ? -d[i] : d[i];
            }
            if (std::abs(m / static_cast<double>(n)) >= t_obs - eps) ++count;
        }
        res.p_value = static_cast<double>(count) / static_cast<double>(total);
    } else {
        int64_t count = 0;
        for (int b = 0; b < n_boot; ++b) {
            double m = 0.0;
            for (size_t i = 0; i < n; ++i) {
                m += (rng() & 1) ? -d[i] : d[i];
            }
            if (std::abs(m / static_cast<double>(n)) >= t_obs - eps) ++count;
        }
        res.p_value = static_cast<double>(count + 1) / static_cast<double>(n_boot + 1);
    }

    std::tie(res.ci_a_lo, res.ci_a_hi) = bootstrap_ci(scores_a, n_boot, rng);
    std::tie(res.ci_b_lo, res.ci_b_hi) = bootstrap_ci(scores_b, n_boot, rng);
    return res;
}

EvalReport evaluate_images(const std::vector<const InstanceMap*>& preds,
                           const std::vector<const InstanceMap*>& gts,
                           double iou_threshold,
                           const std::vector<std::string>& names) {
    if (preds.size() != gts.size()) throw ValidationError("pred/gt list lengths differ");
    if (preds.empty()) throw ValidationError("no images to evaluate");

    EvalReport rep;
    rep.iou_threshold = iou_threshold;

    int64_t inter_px = 0, union_px = 0;
    double iou_sum = 0.0;
    int64_t gt_total = 0;
    double sq_err_sum = 0.0;
    int64_t matched_total = 0;
    double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;

    for (size_t k = 0; k < preds.size(); ++k) {
        const InstanceMap& pred = *preds[k];
        const InstanceMap& gt = *gts[k];
        const MatchResult match = match_instances(pred, gt, iou_threshold);

        ImageEval img;
        img.name = k < names.size() ? names[k] : ("image_" + std::to_string(k));
        img.tp = static_cast<int>(match.pairs.size());
        img.fp = static_cast<int>(match.unmatched_pred.size());
        img.fn = static_cast<int>(match.unmatched_gt.size());

        for (size_t i = 0; i < pred.labels.size(); ++i) {
            const bool p = pred.labels[i] > 0, g = gt.labels[i] > 0;
            inter_px += (p && g) ? 1 : 0;
            union_px += (p || g) ? 1 : 0;
        }
        img.pixel_iou = pixel_iou(pred, gt);

        const int gt_count = img.tp + img.fn;
        img.tree_iou = tree_iou(match, gt_count);
        gt_total += gt_count;
        for (const MatchPair& p : match.pairs) iou_sum += p.iou;

        const std::vector<Point2d> pc = instance_centroids_px(pred);
        const std::vector<Point2d> gc = instance_centroids_px(gt);
        img.centroid_rmse_px = centroid_rmse(match, pc, gc);
        for (const MatchPair& p : match.pairs) {
            const double dx = pc[static_cast<size_t>(p.pred_id)].x - gc[static_cast<size_t>(p.gt_id)].x;
            const double dy = pc[static_cast<size_t>(p.pred_id)].y - gc[static_cast<size_t>(p.gt_id)].y;
            sq_err_sum += dx * dx + dy * dy;
        }
        matched_total += img.tp;

        const Prf prf = instance_prf(match);
        macro_p += prf.precision;
        macro_r += prf.recall;
        macro_f += prf.f1;

        rep.tp += img.tp;
        rep.fp += img.fp;
        rep.fn += img.fn;
        rep.per_image.push_back(std::move(img));
    }

    rep.pixel_iou = union_px == 0 ? 1.0
                                  : static_cast<double>(inter_px) / static_cast<double>(union_px);
    if (gt_total > 0) rep.tree_iou = iou_sum / static_cast<double>(gt_total);
    if (matched_total > 0) {
        rep.centroid_rmse_px = std::sqrt(sq_err_sum / static_cast<double>(matched_total));
    }
    rep.pooled = instance_prf(rep.tp, rep.fp, rep.fn);
    const double ni = static_cast<double>(preds.size());
    rep.macro = {macro_p / ni, macro_r / ni, macro_f / ni};
    return rep;
}

}  // namespace deadwood
