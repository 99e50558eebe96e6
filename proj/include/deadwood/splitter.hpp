#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deadwood/raster.hpp"

namespace deadwood {

struct Patch {
    MultiChannelRaster raster;
    int col0 = 0;  // origin within the source image, pixels
    int row0 = 0;
};

// Patch origins at multiples of stride = size * (1 - overlap_fraction); when
// the last stride overshoots, a final patch is anchored flush to the border
// so every pixel is covered. With pad == true an image smaller than `size`
// yields a single zero-padded patch instead of an error.
std::vector<Patch> extract_patches(const MultiChannelRaster& image, int size = 256,
                                   double overlap_fraction = 0.5, bool pad = false);

// Origin list for one axis; exposed separately because the split tooling only
// needs patch geometry, not pixel copies.
std::vector<int> patch_origins(int dim, int size, int stride);

struct RegionCluster {
    int cluster_id = 0;
    std::vector<int> members;              // patch indices
    std::vector<std::pair<int64_t, int64_t>> bins;  // occupied (x_bin, y_bin)
    int64_t segment_count = 0;
};

// Hash patches to floor(x / bin_size), floor(y / bin_size) bins, then merge
// occupied bins into clusters by 8-neighborhood connectivity in bin space.
std::vector<RegionCluster> bin_and_cluster(const std::vector<Point2d>& patch_centroids,
                                           double bin_size,
                                           const std::vector<int64_t>& segment_counts = {});

enum class Partition { Train = 0, Validation = 1, Test = 2 };
const char* partition_name(Partition p);

struct SplitAssignment {
    std::vector<Partition> cluster_partition;   // by cluster index
    std::array<int64_t, 3> segment_totals{0, 0, 0};
    std::array<int64_t, 3> patch_counts{0, 0, 0};
    std::array<double, 3> achieved_fractions{0, 0, 0};
    std::array<double, 3> target_ratios{0.7, 0.2, 0.1};
    bool degenerate = false;  // fewer than 3 clusters; best-effort assignment
};

// Clusters sorted by segment count descending (ties broken by a seeded
// shuffle) and assigned greedily to the partition with the largest remaining
// deficit; partition ties resolve train > validation > test.
SplitAssignment assign_partitions(const std::vector<RegionCluster>& clusters,
                                  std::array<double, 3> ratios = {0.7, 0.2, 0.1},
                                  uint64_t seed = 0);

}  // namespace deadwood
