#include "deadwood/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace deadwood {

std::vector<int> patch_origins(int dim, int size, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + size <= dim; o += stride) origins.push_back(o);
    // Anchor a final patch flush to the border when the last stride
    // overshoots, so the tail of the image is still covered.
    if (origins.empty() || origins.back() + size < dim) {
        const int flush = dim - size;
        if (flush >= 0 && (origins.empty() || flush != origins.back())) {
            origins.push_back(flush);
        }
    }
    return origins;
}

std::vector<Patch> extract_patches(const MultiChannelRaster& image, int size,
                                   double overlap_fraction, bool pad) {
    if (size < 1) throw ValidationError("patch size must be >= 1");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw ValidationError("overlap_fraction must be in [0, 1)");
    }
    const int stride = std::max(1, static_cast<int>(std::lround(size * (1.0 - overlap_fraction))));

    if ((image.width < size || image.height < size) && !pad) {
        throw ValidationError("image " + std::to_string(image.width) + "x" +
                              std::to_string(image.height) + " smaller than patch size " +
                              std::to_string(size) + " and padding is disabled");
    }

    std::vector<int> cols = image.width >= size ? patch_origins(image.width, size, stride)
                                                : std::vector<int>{0};
    std::vector<int> rows = image.height >= size ? patch_origins(image.height, size, stride)
                                                 : std::vector<int>{0};

    std::vector<Patch> out;
    out.reserve(cols.size() * rows.size());
    for (int r0 : rows) {
        for (int c0 : cols) {
            Patch p;
            p.col0 = c0;
            p.row0 = r0;
            p.raster = MultiChannelRaster(size, size, image.channels, image.geo);
            p.raster.channel_roles = image.channel_roles;
            p.raster.geo.origin_x = image.geo.origin_x + c0 * image.geo.pixel_size_x;
            p.raster.geo.origin_y = image.geo.origin_y - r0 * image.geo.pixel_size_y;
            const int copy_h = std::min(size, image.height - r0);
            const int copy_w = std::min(size, image.width - c0);
            for (int r = 0; r < copy_h; ++r) {
                const float* src = &image.data[image.idx(r0 + r, c0, 0)];
                float* dst = &p.raster.data[p.raster.idx(r, 0, 0)];
                std::copy(src, src + static_cast<size_t>(copy_w) * image.channels, dst);
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<RegionCluster> bin_and_cluster(const std::vector<Point2d>& patch_centroids,
                                           double bin_size,
                                           const std::vector<int64_t>& segment_counts) {
    if (!(bin_size > 0.0)) throw ValidationError("bin_size must be > 0");
    if (!segment_counts.empty() && segment_counts.size() != patch_centroids.size()) {
        throw ValidationError("segment_counts length must match patch count");
    }

    // Occupied bins, in deterministic (x_bin, y_bin) order.
    std::map<std::pair<int64_t, int64_t>, std::vector<int>> bins;
    for (size_t i = 0; i < patch_centroids.size(); ++i) {
        const int64_t bx = static_cast<int64_t>(std::floor(patch_centroids[i].x / bin_size));
        const int64_t by = static_cast<int64_t>(std::floor(patch_centroids[i].y / bin_size));
        bins[{bx, by}].push_back(static_cast<int>(i));
    }

    std::vector<std::pair<int64_t, int64_t>> keys;
    keys.reserve(bins.size());
    for (const auto& [k, _] : bins) keys.push_back(k);
    std::map<std::pair<int64_t, int64_t>, int> key_index;
    for (size_t i = 0; i < keys.size(); ++i) key_index[keys[i]] = static_cast<int>(i);

    // Union occupied bins that touch under 8-neighborhood in bin space.
    std::vector<int> parent(keys.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
        while (parent[static_cast<size_t>(i)] != i) {
            parent[static_cast<size_t>(i)] = parent[static_cast<size_t>(parent[static_cast<size_t>(i)])];
            i = parent[static_cast<size_t>(i)];
        }
        return i;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    };
    for (size_t i = 0; i < keys.size(); ++i) {
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                if (dx == 0 && dy == 0) continue;
                const auto it = key_index.find({keys[i].first + dx, keys[i].second + dy});
                if (it != key_index.end()) unite(static_cast<int>(i), it->second);
            }
        }
    }

    std::map<int, RegionCluster> by_root;
    for (size_t i = 0; i < keys.size(); ++i) {
        const int root = find(static_cast<int>(i));
        RegionCluster& rc = by_root[root];
        rc.bins.push_back(keys[i]);
        for (int pidx : bins[keys[i]]) {
            rc.members.push_back(pidx);
            rc.segment_count += segment_counts.empty() ? 1 : segment_counts[static_cast<size_t>(pidx)];
        }
    }

    std::vector<RegionCluster> out;
    out.reserve(by_root.size());
    int next_id = 0;
    for (auto& [_, rc] : by_root) {
        rc.cluster_id = ++next_id;
        std::sort(rc.members.begin(), rc.members.end());
        out.push_back(std::move(rc));
    }
    return out;
}

const char* partition_name(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Validation: return "validation";
        case Partition::Test: return "test";
    }
    return "train";
}

SplitAssignment assign_partitions(const std::vector<RegionCluster>& clusters,
                                  std::array<double, 3> ratios, uint64_t seed) {
    if (clusters.empty()) throw ValidationError("no clusters to assign");
    double rsum = ratios[0] + ratios[1] + ratios[2];
    if (!(rsum > 0.0)) throw ValidationError("partition ratios must sum to a positive value");
    for (double& r : ratios) r /= rsum;

    SplitAssignment out;
    out.target_ratios = ratios;
    out.cluster_partition.assign(clusters.size(), Partition::Train);
    out.degenerate = clusters.size() < 3;

    int64_t grand_total = 0;
    for (const RegionCluster& c : clusters) grand_total += c.segment_count;

    // Seeded shuffle first so clusters of equal weight break ties randomly
    // but reproducibly; the stable sort keeps the shuffled order within ties.
    std::vector<size_t> order(clusters.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return clusters[a].segment_count > clusters[b].segment_count;
    });

    std::array<double, 3> current{0.0, 0.0, 0.0};
    for (size_t idx : order) {
        int best = 0;
        double best_deficit = -1e300;
        for (int p = 0; p < 3; ++p) {
            const double deficit = ratios[static_cast<size_t>(p)] * static_cast<double>(grand_total) -
                                   current[static_cast<size_t>(p)];
            if (deficit > best_deficit + 1e-12) {
                best_deficit = deficit;
                best = p;
            }
        }
        out.cluster_partition[idx] = static_cast<Partition>(best);
        current[static_cast<size_t>(best)] += static_cast<double>(clusters[idx].segment_count);
        out.segment_totals[static_cast<size_t>(best)] += clusters[idx].segment_count;
        out.patch_counts[static_cast<size_t>(best)] +=
            static_cast<int64_t>(clusters[idx].members.size());
    }

    for (int p = 0; p < 3; ++p) {
        out.achieved_fractions[static_cast<size_t>(p)] =
            grand_total > 0 ? static_cast<double>(out.segment_totals[static_cast<size_t>(p)]) /
                                  static_cast<double>(grand_total)
                            : 0.0;
    }
    return out;
}

}  // namespace deadwood
