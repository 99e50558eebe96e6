#pragma once

#include <string>
#include <vector>

#include "deadwood/common.hpp"
#include "deadwood/raster.hpp"
#include "deadwood/targets.hpp"

namespace deadwood {

struct LossWeights {
    double lambda_dice = 1.0;
    double lambda_centroid = 1.0;
    double lambda_hybrid = 1.0;
    double lambda_sdt = 1.0;
    double lambda_boundary = 10.0;  // boundary pixels are rare; up-weighted
    double bce_pos_weight = 1.0;
    double focal_gamma = 0.0;       // 0 disables focal modulation
    double focal_alpha = 0.25;

    void validate() const;
    static LossWeights from_json_file(const std::string& path);
};

struct LossComponents {
    double bce = 0.0;
    double dice = 0.0;
    double focal = 0.0;
    double centroid = 0.0;
    double sdt = 0.0;
    double boundary = 0.0;
};

struct LossValue {
    double total = 0.0;
    LossComponents components;
    // d total / d prediction, one grid per prediction channel passed in.
    std::vector<FloatGrid> gradient;
};

// L_seg = BCE + lambda_dice * (1 - Dice), BCE from logits in the stable
// log-sum form, Dice on sigmoid probabilities with smoothing eps = 1.
// focal_gamma > 0 swaps the BCE term for alpha_t * (1 - p_t)^gamma * CE.
LossValue seg_loss(const FloatGrid& pred_logits, const FloatGrid& target_mask,
                   const LossWeights& w);

// Mean squared error over all pixels.
LossValue centroid_loss(const FloatGrid& pred_heatmap, const FloatGrid& target_heatmap);

// lambda_sdt * mean SmoothL1 over non-boundary pixels (delta = 1)
// + lambda_boundary * mean |pred + 1| over boundary pixels (target == -1).
LossValue hybrid_loss(const FloatGrid& pred_hybrid, const FloatGrid& target_hybrid,
                      const LossWeights& w);

// L_total = L_seg + lambda_centroid * L_centroid + lambda_hybrid * L_hybrid,
// prediction channels ordered (segmentation logits, centroid, hybrid).
LossValue total_loss(const MultiChannelRaster& pred_stack, const TargetStack& target,
                     const LossWeights& w);

}  // namespace deadwood
