#pragma once

#include <cstdint>
#include <vector>

#include "deadwood/common.hpp"
#include "deadwood/raster.hpp"

namespace deadwood {

// Separable Gaussian, kernel truncated at 4*sigma, zero padding outside the
// image. sigma == 0 returns the input unchanged. Parallel over rows/columns;
// each output pixel is accumulated serially, so results do not depend on the
// thread count.
FloatGrid gaussian_blur(const FloatGrid& in, double sigma);

// 3x3 (8-neighborhood) binary dilation.
ByteGrid dilate8(const ByteGrid& in);

// Connected-component labeling with 4- or 8-connectivity. Components are
// labeled 1..K in row-major order of their first pixel. Internally the
// union-find first pass runs tile-parallel over row strips; strips are then
// merged at seam rows by label equivalence, which reproduces the global
// labeling exactly for any strip height or thread count.
InstanceMap label_components(const ByteGrid& mask, int connectivity,
                             const GeoTransform& geo = {});

// Per-label pixel counts, index 0 = background.
std::vector<int64_t> label_areas(const InstanceMap& m);

// Exact squared Euclidean distance to the nearest source pixel (two-pass
// lower-envelope transform). Non-source cells with no source anywhere get
// a value > width^2 + height^2.
std::vector<double> exact_edt_squared(const ByteGrid& sources);

}  // namespace deadwood
