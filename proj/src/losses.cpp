#include "deadwood/losses.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace deadwood {

using nlohmann::json;

namespace {

constexpr double kDiceEps = 1.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^-|z|), the stable tail of BCE.
double softplus_neg_abs(double z) { return std::log1p(std::exp(-std::abs(z))); }

// -log sigmoid(z) and -log(1 - sigmoid(z)) without overflow.
double neg_log_sigmoid(double z) { return std::max(-z, 0.0) + softplus_neg_abs(z); }
double neg_log_one_minus_sigmoid(double z) { return std::max(z, 0.0) + softplus_neg_abs(z); }

void require_same_shape(const FloatGrid& a, const FloatGrid& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("prediction and target shapes differ: " +
                             std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                             std::to_string(b.width) + "x" + std::to_string(b.height));
    }
}

}  // namespace

void LossWeights::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string("loss weight must be finite and >= 0: ") + name);
        }
    };
    nonneg(lambda_dice, "lambda_dice");
    nonneg(lambda_centroid, "lambda_centroid");
    nonneg(lambda_hybrid, "lambda_hybrid");
    nonneg(lambda_sdt, "lambda_sdt");
    nonneg(lambda_boundary, "lambda_boundary");
    nonneg(focal_gamma, "focal_gamma");
    if (!(bce_pos_weight > 0.0)) throw ValidationError("bce_pos_weight must be > 0");
    if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) {
        throw ValidationError("focal_alpha must be in [0, 1]");
    }
}

LossWeights LossWeights::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed weights JSON in " + path + ": " + e.what());
    }
    LossWeights w;
    w.lambda_dice = doc.value("lambda_dice", w.lambda_dice);
    w.lambda_centroid = doc.value("lambda_centroid", w.lambda_centroid);
    w.lambda_hybrid = doc.value("lambda_hybrid", w.lambda_hybrid);
    w.lambda_sdt = doc.value("lambda_sdt", w.lambda_sdt);
    w.lambda_boundary = doc.value("lambda_boundary", w.lambda_boundary);
    w.bce_pos_weight = doc.value("bce_pos_weight", w.bce_pos_weight);
    w.focal_gamma = doc.value("focal_gamma", w.focal_gamma);
    w.focal_alpha = doc.value("focal_alpha", w.focal_alpha);
    w.validate();
    return w;
}

LossValue seg_loss(const FloatGrid& pred_logits, const FloatGrid& target_mask,
                   const LossWeights& w) {
    w.validate();
    require_same_shape(pred_logits, target_mask);
    const int64_t n = static_cast<int64_t>(pred_logits.size());
    if (n == 0) throw ValidationError("seg_loss on an empty raster");
    for (float t : target_mask.v) {
        if (t != 0.0f && t != 1.0f) throw ValidationError("segmentation target must be binary");
    }

    const bool focal = w.focal_gamma > 0.0;

    const double ce_sum = parallel_block_sum(n, [&](int64_t i) {
        const double z = pred_logits.v[static_cast<size_t>(i)];
        const double y = target_mask.v[static_cast<size_t>(i)];
        if (!focal) {
            return y > 0.5 ? w.bce_pos_weight * neg_log_sigmoid(z)
                           : neg_log_one_minus_sigmoid(z);
        }
        // alpha_t (1 - p_t)^gamma * CE, CE unweighted.
        if (y > 0.5) {
            const double one_minus_p = sigmoid(-z);
            return w.focal_alpha * std::pow(one_minus_p, w.focal_gamma) * neg_log_sigmoid(z);
        }
        const double p = sigmoid(z);
        return (1.0 - w.focal_alpha) * std::pow(p, w.focal_gamma) * neg_log_one_minus_sigmoid(z);
    });

    const double inter = parallel_block_sum(n, [&](int64_t i) {
        return sigmoid(pred_logits.v[static_cast<size_t>(i)]) *
               static_cast<double>(target_mask.v[static_cast<size_t>(i)]);
    });
    const double psum = parallel_block_sum(n, [&](int64_t i) {
        return sigmoid(pred_logits.v[static_cast<size_t>(i)]);
    });
    const double tsum = parallel_block_sum(n, [&](int64_t i) {
        return static_cast<double>(target_mask.v[static_cast<size_t>(i)]);
    });

    const double dice = (2.0 * inter + kDiceEps) / (psum + tsum + kDiceEps);
    const double dice_loss = 1.0 - dice;
    const double ce_mean = ce_sum / static_cast<double>(n);

    LossValue out;
    if (focal) {
        out.components.focal = ce_mean;
    } else {
        out.components.bce = ce_mean;
    }
    out.components.dice = dice_loss;
    out.total = ce_mean + w.lambda_dice * dice_loss;

    out.gradient.emplace_back(pred_logits.width, pred_logits.height);
    FloatGrid& grad = out.gradient[0];
    const double denom = psum + tsum + kDiceEps;
    const double numer = 2.0 * inter + kDiceEps;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const double z = pred_logits.v[static_cast<size_t>(i)];
        const double y = target_mask.v[static_cast<size_t>(i)];
        const double p = sigmoid(z);

        double dce_dz;
        if (!focal) {
            dce_dz = y > 0.5 ? w.bce_pos_weight * (p - 1.0) : p;
        } else if (y > 0.5) {
            const double q = 1.0 - p;  // (1-p_t)
            const double ce = neg_log_sigmoid(z);
            // d/dp [alpha q^g ce] = alpha (-g q^(g-1) ce - q^g / p); dp/dz = p q
            const double df_dp =
                w.focal_alpha * (-w.focal_gamma * std::pow(q, w.focal_gamma - 1.0) * ce -
                                 std::pow(q, w.focal_gamma) / p);
            dce_dz = df_dp * p * q;
        } else {
            const double ce = neg_log_one_minus_sigmoid(z);
            const double df_dp =
                (1.0 - w.focal_alpha) * (w.focal_gamma * std::pow(p, w.focal_gamma - 1.0) * ce +
                                         std::pow(p, w.focal_gamma) / (1.0 - p));
            dce_dz = df_dp * p * (1.0 - p);
        }

        // d(1 - Dice)/dp_i through the quotient, then dp/dz = p (1 - p).
        const double ddice_dp = -(2.0 * y * denom - numer) / (denom * denom);
        const double dz = dce_dz / static_cast<double>(n) +
                          w.lambda_dice * ddice_dp * p * (1.0 - p);
        grad.v[static_cast<size_t>(i)] = static_cast<float>(dz);
    }
    return out;
}

LossValue centroid_loss(const FloatGrid& pred_heatmap, const FloatGrid& target_heatmap) {
    require_same_shape(pred_heatmap, target_heatmap);
    const int64_t n = static_cast<int64_t>(pred_heatmap.size());
    if (n == 0) throw ValidationError("centroid_loss on an empty raster");

    const double sum = parallel_block_sum(n, [&](int64_t i) {
        const double d = static_cast<double>(pred_heatmap.v[static_cast<size_t>(i)]) -
                         static_cast<double>(target_heatmap.v[static_cast<size_t>(i)]);
        return d * d;
    });

    LossValue out;
    out.components.centroid = sum / static_cast<double>(n);
    out.total = out.components.centroid;
    out.gradient.emplace_back(pred_heatmap.width, pred_heatmap.height);
    FloatGrid& grad = out.gradient[0];
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pred_heatmap.v[static_cast<size_t>(i)]) -
                         static_cast<double>(target_heatmap.v[static_cast<size_t>(i)]);
        grad.v[static_cast<size_t>(i)] = static_cast<float>(2.0 * d / static_cast<double>(n));
    }
    return out;
}

LossValue hybrid_loss(const FloatGrid& pred_hybrid, const FloatGrid& target_hybrid,
                      const LossWeights& w) {
    w.validate();
    require_same_shape(pred_hybrid, target_hybrid);
    const int64_t n = static_cast<int64_t>(pred_hybrid.size());
    if (n == 0) throw ValidationError("hybrid_loss on an empty raster");
    for (float t : target_hybrid.v) {
        if (t < -1.0f || t > 1.0f) throw ValidationError("hybrid target outside [-1, 1]");
    }

    // Boundary pixels carry target == -1 exactly; the targets module
    // guarantees exactness.
    const int64_t n_boundary = static_cast<int64_t>(parallel_block_sum(
        n, [&](int64_t i) { return target_hybrid.v[static_cast<size_t>(i)] == -1.0f ? 1.0 : 0.0; }));
    const int64_t n_sdt = n - n_boundary;

    const double sdt_sum = parallel_block_sum(n, [&](int64_t i) {
        if (target_hybrid.v[static_cast<size_t>(i)] == -1.0f) return 0.0;
        const double r = static_cast<double>(pred_hybrid.v[static_cast<size_t>(i)]) -
                         static_cast<double>(target_hybrid.v[static_cast<size_t>(i)]);
        const double a = std::abs(r);
        return a < 1.0 ? 0.5 * r * r : a - 0.5;
    });
    const double boundary_sum = parallel_block_sum(n, [&](int64_t i) {
        if (target_hybrid.v[static_cast<size_t>(i)] != -1.0f) return 0.0;
        return std::abs(static_cast<double>(pred_hybrid.v[static_cast<size_t>(i)]) + 1.0);
    });

    LossValue out;
    out.components.sdt = n_sdt > 0 ? sdt_sum / static_cast<double>(n_sdt) : 0.0;
    out.components.boundary = n_boundary > 0 ? boundary_sum / static_cast<double>(n_boundary) : 0.0;
    out.total = w.lambda_sdt * out.components.sdt + w.lambda_boundary * out.components.boundary;

    out.gradient.emplace_back(pred_hybrid.width, pred_hybrid.height);
    FloatGrid& grad = out.gradient[0];
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const double p = pred_hybrid.v[static_cast<size_t>(i)];
        const double t = target_hybrid.v[static_cast<size_t>(i)];
        double g = 0.0;
        if (target_hybrid.v[static_cast<size_t>(i)] == -1.0f) {
            if (n_boundary > 0) {
                const double s = p + 1.0;
                g = w.lambda_boundary * (s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0)) /
                    static_cast<double>(n_boundary);
            }
        } else if (n_sdt > 0) {
            const double r = p - t;
            const double d = std::abs(r) < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0);
            g = w.lambda_sdt * d / static_cast<double>(n_sdt);
        }
        grad.v[static_cast<size_t>(i)] = static_cast<float>(g);
    }
    return out;
}

LossValue total_loss(const MultiChannelRaster& pred_stack, const TargetStack& target,
                     const LossWeights& w) {
    if (pred_stack.channels != 3) {
        throw DimensionError("total_loss expects a 3-channel prediction stack, got " +
                             std::to_string(pred_stack.channels));
    }
    if (target.stack.channels != 3) throw DimensionError("target stack must have 3 channels");
    if (pred_stack.width != target.stack.width || pred_stack.height != target.stack.height) {
        throw DimensionError("prediction and target stack shapes differ");
    }

    const FloatGrid pred_logits = pred_stack.extract_channel(0);
    const FloatGrid pred_centroid = pred_stack.extract_channel(1);
    const FloatGrid pred_hybrid = pred_stack.extract_channel(2);

    LossValue seg = seg_loss(pred_logits, target.stack.extract_channel(0), w);
    LossValue cen = centroid_loss(pred_centroid, target.stack.extract_channel(1));
    LossValue hyb = hybrid_loss(pred_hybrid, target.stack.extract_channel(2), w);

    LossValue out;
    out.components = seg.components;
    out.components.centroid = cen.components.centroid;
    out.components.sdt = hyb.components.sdt;
    out.components.boundary = hyb.components.boundary;
    out.total = seg.total + w.lambda_centroid * cen.total + w.lambda_hybrid * hyb.total;

    out.gradient.resize(3);
    out.gradient[0] = std::move(seg.gradient[0]);
    out.gradient[1] = std::move(cen.gradient[0]);
    out.gradient[2] = std::move(hyb.gradient[0]);
    const int64_t n = static_cast<int64_t>(out.gradient[1].size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        out.gradient[1].v[static_cast<size_t>(i)] =
            static_cast<float>(w.lambda_centroid * out.gradient[1].v[static_cast<size_t>(i)]);
        out.gradient[2].v[static_cast<size_t>(i)] =
            static_cast<float>(w.lambda_hybrid * out.gradient[2].v[static_cast<size_t>(i)]);
    }
    return out;
}

}  // namespace deadwood
