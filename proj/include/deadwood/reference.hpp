#pragma once

// Serial reference implementations, deliberately written the slow and obvious
// way. They share nothing with the parallel kernels except the public data
// types, and exist so tests and the benchmark can compare both routes.

#include <functional>
#include <optional>
#include <vector>

#include "deadwood/geometry.hpp"
#include "deadwood/losses.hpp"
#include "deadwood/metrics.hpp"
#include "deadwood/postprocess.hpp"
#include "deadwood/raster.hpp"

namespace deadwood::ref {

// Stack-based flood fill labeling, components numbered 1..K in row-major
// order of their first pixel.
InstanceMap label_components(const ByteGrid& mask, int connectivity);

// Even-odd ray cast per pixel center.
bool point_in_polygon(const Polygon& poly, double x, double y);
InstanceMap rasterize_polygons(const std::vector<Polygon>& polys,
                               const GeoTransform& geo, int height, int width);

// All-pairs exact Euclidean distances.
FloatGrid sdt_boundary(const InstanceMap& m);

// Direct per-pixel evaluation over every centroid, no truncation window.
FloatGrid centroid_heatmap(const std::vector<Point2d>& centroids_px, double sigma,
                           int height, int width);

// Direct 2D convolution with the same truncated kernel as the fast path.
FloatGrid gaussian_blur(const FloatGrid& in, double sigma);

// Priority flood with the same (elevation, insertion-sequence) tie rule as
// watershed_segment, but the frontier is a plain vector scanned linearly for
// its minimum each step.
InstanceMap watershed(const ByteGrid& mask, const MarkerSet& markers,
                      const FloatGrid& elevation, int connectivity = 8);

// Exhaustive candidate enumeration + greedy selection, restated from the
// marker contract rather than shared with extract_markers.
MarkerSet extract_markers(const FloatGrid& centroid_map, const ByteGrid& mask,
                          const PipelineConfig& cfg);

// Naive double-precision loss sums (values only, no gradients).
double seg_loss_value(const FloatGrid& logits, const FloatGrid& target, const LossWeights& w);
double centroid_loss_value(const FloatGrid& pred, const FloatGrid& target);
double hybrid_loss_value(const FloatGrid& pred, const FloatGrid& target, const LossWeights& w);

// Central finite differences of an arbitrary scalar function of one grid.
// Uses the actually-representable float steps around each element.
FloatGrid finite_difference_gradient(const FloatGrid& at,
                                     const std::function<double(const FloatGrid&)>& f,
                                     double h = 1e-4);

// Max relative gradient error, denominator floored at 1e-8.
double max_rel_error(const FloatGrid& a, const FloatGrid& b);

// Best assignment by exhaustive permutation over candidate pairs with
// IoU >= threshold. Returns the maximum total IoU.
double best_matching_total_iou(const InstanceMap& pred, const InstanceMap& gt,
                               double iou_threshold);

// All 2^n sign assignments of the paired differences.
double exact_signflip_p_value(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace deadwood::ref
