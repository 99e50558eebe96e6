#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deadwood/geometry.hpp"
#include "deadwood/raster.hpp"

namespace deadwood {

struct MatchPair {
    int pred_id = 0;
    int gt_id = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_pred;  // false positives
    std::vector<int> unmatched_gt;    // false negatives
    double iou_threshold = 0.5;
};

// Intersection over union of two binary masks; 1.0 when both are empty.
double pixel_iou(const ByteGrid& pred, const ByteGrid& gt);
double pixel_iou(const InstanceMap& pred, const InstanceMap& gt);

// One-to-one assignment over candidate pairs with IoU >= threshold,
// maximizing total IoU (Hungarian algorithm on the candidate graph).
MatchResult match_instances(const InstanceMap& pred, const InstanceMap& gt,
                            double iou_threshold = 0.5);

// Sum of matched-pair IoUs divided by the ground-truth instance count;
// unmatched ground truth contributes zero. Absent when gt_count == 0.
std::optional<double> tree_iou(const MatchResult& match, int gt_count);

// RMSE of Euclidean centroid distances over matched pairs, pixel units.
// Centroid lookup is by instance id. Absent when no pairs matched.
std::optional<double> centroid_rmse(const MatchResult& match,
                                    const std::vector<Point2d>& pred_centroids_px,
                                    const std::vector<Point2d>& gt_centroids_px);

struct Prf {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
};

// TP=FP=0 -> precision 1; TP=FN=0 -> recall 1; P+R=0 -> f1 0.
Prf instance_prf(int tp, int fp, int fn);
Prf instance_prf(const MatchResult& match);

// 4*pi*area/perimeter^2 from the polygon ring, clamped to (0, 1].
double compactness(const Ring& polygon);

// Mean of instance-pixel coordinates per label, pixel-index units,
// indexed by label id (entry 0 unused).
std::vector<Point2d> instance_centroids_px(const InstanceMap& m);

struct SignificanceResult {
    double p_value = 1.0;
    double ci_a_lo = 0.0, ci_a_hi = 0.0;
    double ci_b_lo = 0.0, ci_b_hi = 0.0;
};

// Two-sided paired permutation test on the mean difference: exact sign-flip
// enumeration for n <= 12, otherwise n_boot seeded sign-flip resamples.
// Percentile bootstrap 95% CIs of each sample mean.
SignificanceResult paired_significance(const std::vector<double>& scores_a,
                                       const std::vector<double>& scores_b,
                                       int n_boot = 10000, uint64_t seed = 1234);

struct ImageEval {
    std::string name;
    double pixel_iou = 0.0;
    std::optional<double> tree_iou;
    std::optional<double> centroid_rmse_px;
    int tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
    double pixel_iou = 0.0;              // pooled over all pixels
    std::optional<double> tree_iou;      // pooled: sum IoU / total gt count
    std::optional<double> centroid_rmse_px;  // pooled over matched pairs
    int tp = 0, fp = 0, fn = 0;
    Prf pooled;                          // from pooled TP/FP/FN
    Prf macro;                           // mean of per-image P/R/F1
    std::vector<ImageEval> per_image;
    double iou_threshold = 0.5;
};

// Evaluates one or more images; pooled and macro aggregates are both
// reported because they genuinely differ.
EvalReport evaluate_images(const std::vector<const InstanceMap*>& preds,
                           const std::vector<const InstanceMap*>& gts,
                           double iou_threshold,
                           const std::vector<std::string>& names = {});

}  // namespace deadwood
