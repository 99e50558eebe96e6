#pragma once

#include <vector>

#include "deadwood/geojson.hpp"
#include "deadwood/image_ops.hpp"
#include "deadwood/raster.hpp"

namespace deadwood {

// Ground-truth stack for the three network heads, channel order fixed:
// 0 = binary mask, 1 = centroid heatmap in [0,1], 2 = hybrid map in [-1,1].
// The instance map is a sidecar, not a network target.
struct TargetStack {
    MultiChannelRaster stack;
    InstanceMap instances;
    int dropped_outside = 0;
};

// Scanline rasterization, even-odd rule, pixel assigned iff its center lies
// inside the polygon. Later-listed polygons win overlaps. Polygons entirely
// outside the extent are dropped and counted in *dropped.
InstanceMap rasterize_polygons(const std::vector<Polygon>& polys,
                               const GeoTransform& geo, int height, int width,
                               int* dropped = nullptr);

// heat(p) = max over centroids c of exp(-|p-c|^2 / (2 sigma^2)), evaluated at
// integer pixel-index coordinates, kernels truncated at 4*sigma. Peaks are
// normalized to 1 and combined by max, so values stay threshold-comparable
// regardless of crowding.
FloatGrid render_centroid_heatmap(const std::vector<Point2d>& centroids_px,
                                  double sigma, int height, int width);

// Boundary pixels (foreground with a 4-neighbor of different label, background
// or the image edge) are exactly -1. Interior pixels hold d(p)/d_max of their
// instance where d is the Euclidean distance to the instance's boundary pixel
// set, so the deepest pixel is exactly +1. Background is 0. Instances that are
// all boundary stay at -1 throughout.
FloatGrid compute_sdt_boundary(const InstanceMap& m);

TargetStack build_target_stack(const std::vector<Annotation>& annotations,
                               const GeoTransform& geo, int height, int width,
                               double sigma = 3.0);

}  // namespace deadwood
