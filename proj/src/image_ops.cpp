#include "deadwood/image_ops.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deadwood {

namespace {

std::vector<double> gaussian_kernel(double sigma, int* radius_out) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> w(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double val = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        w[static_cast<size_t>(k + radius)] = val;
        sum += val;
    }
    for (double& x : w) x /= sum;
    *radius_out = radius;
    return w;
}

}  // namespace

FloatGrid gaussian_blur(const FloatGrid& in, double sigma) {
    if (sigma < 0.0) throw ValidationError("blur sigma must be >= 0");
    if (sigma == 0.0) return in;
    int radius = 0;
    const std::vector<double> w = gaussian_kernel(sigma, &radius);
    const int W = in.width, H = in.height;

    FloatGrid tmp(W, H);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < H; ++r) {
        const float* row = &in.v[static_cast<size_t>(r) * W];
        float* out = &tmp.v[static_cast<size_t>(r) * W];
        for (int c = 0; c < W; ++c) {
            const int klo = std::max(-radius, -c);
            const int khi = std::min(radius, W - 1 - c);
            double acc = 0.0;
            for (int k = klo; k <= khi; ++k) {
                acc += w[static_cast<size_t>(k + radius)] * row[c + k];
            }
            out[c] = static_cast<float>(acc);
        }
    }

    FloatGrid out(W, H);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < H; ++r) {
        const int klo = std::max(-radius, -r);
        const int khi = std::min(radius, H - 1 - r);
        float* dst = &out.v[static_cast<size_t>(r) * W];
        for (int c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int k = klo; k <= khi; ++k) {
                acc += w[static_cast<size_t>(k + radius)] * tmp.v[static_cast<size_t>(r + k) * W + c];
            }
            dst[c] = static_cast<float>(acc);
        }
    }
    return out;
}

ByteGrid dilate8(const ByteGrid& in) {
    const int W = in.width, H = in.height;
    ByteGrid out(W, H);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            uint8_t v = 0;
            for (int dr = -1; dr <= 1 && !v; ++dr) {
                const int rr = r + dr;
                if (rr < 0 || rr >= H) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                    const int cc = c + dc;
                    if (cc < 0 || cc >= W) continue;
                    if (in.at(rr, cc)) {
                        v = 1;
                        break;
                    }
                }
            }
            out.at(r, c) = v;
        }
    }
    return out;
}

namespace {

// Union-find over pixel indices. Roots are always the smallest index of
// their component, so the final labeling is independent of union order and
// therefore of the strip decomposition.
struct PixelUnionFind {
    std::vector<int32_t> parent;

    explicit PixelUnionFind(size_t n) : parent(n, -1) {}

    int32_t find(int32_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];  // path halving keeps pointers decreasing
            i = parent[i];
        }
        return i;
    }

    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) {
            parent[b] = a;
        } else {
            parent[a] = b;
        }
    }
};

}  // namespace

InstanceMap label_components(const ByteGrid& mask, int connectivity,
                             const GeoTransform& geo) {
    if (connectivity != 4 && connectivity != 8) {
        throw ValidationError("connectivity must be 4 or 8");
    }
    const int W = mask.width, H = mask.height;
    const size_t n = mask.size();
    PixelUnionFind uf(n);

    for (size_t i = 0; i < n; ++i) {
        if (mask.v[i]) uf.parent[i] = static_cast<int32_t>(i);
    }

    // Strip decomposition; seams are re-merged afterwards, so the strip
    // height only affects parallel granularity, never the result.
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    const int min_rows = 64;
    int nstrips = std::min(std::max(1, H / min_rows), std::max(1, threads * 4));
    const int rows_per_strip = (H + nstrips - 1) / nstrips;
    nstrips = (H + rows_per_strip - 1) / rows_per_strip;

#pragma omp parallel for schedule(static)
    for (int s = 0; s < nstrips; ++s) {
        const int r0 = s * rows_per_strip;
        const int r1 = std::min(H, r0 + rows_per_strip);
        for (int r = r0; r < r1; ++r) {
            for (int c = 0; c < W; ++c) {
                const int32_t i = static_cast<int32_t>(static_cast<size_t>(r) * W + c);
                if (!mask.v[static_cast<size_t>(i)]) continue;
                if (c > 0 && mask.at(r, c - 1)) uf.unite(i, i - 1);
                if (r > r0) {
                    if (mask.at(r - 1, c)) uf.unite(i, i - W);
                    if (connectivity == 8) {
                        if (c > 0 && mask.at(r - 1, c - 1)) uf.unite(i, i - W - 1);
                        if (c + 1 < W && mask.at(r - 1, c + 1)) uf.unite(i, i - W + 1);
                    }
                }
            }
        }
    }

    // Seam merge: label equivalence across strip boundary rows.
    for (int s = 1; s < nstrips; ++s) {
        const int r = s * rows_per_strip;
        if (r >= H) break;
        for (int c = 0; c < W; ++c) {
            const int32_t i = static_cast<int32_t>(static_cast<size_t>(r) * W + c);
            if (!mask.v[static_cast<size_t>(i)]) continue;
            if (mask.at(r - 1, c)) uf.unite(i, i - W);
            if (connectivity == 8) {
                if (c > 0 && mask.at(r - 1, c - 1)) uf.unite(i, i - W - 1);
                if (c + 1 < W && mask.at(r - 1, c + 1)) uf.unite(i, i - W + 1);
            }
        }
    }

    // Parent indices strictly decrease toward the root, so one ascending
    // pass fully flattens the forest.
    for (size_t i = 0; i < n; ++i) {
        if (uf.parent[i] >= 0) uf.parent[i] = uf.parent[static_cast<size_t>(uf.parent[i])];
    }

    std::vector<int32_t> root_label(n, 0);
    int32_t next = 0;
    for (size_t i = 0; i < n; ++i) {
        if (uf.parent[i] == static_cast<int32_t>(i)) root_label[i] = ++next;
    }

    InstanceMap out(W, H, geo);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
        if (uf.parent[static_cast<size_t>(i)] >= 0) {
            out.labels[static_cast<size_t>(i)] =
                root_label[static_cast<size_t>(uf.parent[static_cast<size_t>(i)])];
        }
    }
    return out;
}

std::vector<int64_t> label_areas(const InstanceMap& m) {
    std::vector<int64_t> areas(static_cast<size_t>(m.max_label()) + 1, 0);
#pragma omp parallel
    {
        std::vector<int64_t> local(areas.size(), 0);
#pragma omp for schedule(static) nowait
        for (int64_t i = 0; i < static_cast<int64_t>(m.labels.size()); ++i) {
            local[static_cast<size_t>(m.labels[static_cast<size_t>(i)])]++;
        }
#pragma omp critical
        for (size_t k = 0; k < areas.size(); ++k) areas[k] += local[k];
    }
    return areas;
}

namespace {

// 1D squared-distance transform by lower envelope of parabolas.
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + static_cast<double>(q) * q) -
                    (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = 1e30;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> exact_edt_squared(const ByteGrid& sources) {
    const int W = sources.width, H = sources.height;
    const double kInf = 1e18;
    std::vector<double> grid(sources.size());
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = sources.v[i] ? 0.0 : kInf;

    // Columns first, then rows.
#pragma omp parallel
    {
        std::vector<double> f(std::max(W, H)), d(std::max(W, H));
        std::vector<int> v(std::max(W, H));
        std::vector<double> z(static_cast<size_t>(std::max(W, H)) + 1);

#pragma omp for schedule(static)
        for (int c = 0; c < W; ++c) {
            for (int r = 0; r < H; ++r) f[r] = grid[static_cast<size_t>(r) * W + c];
            dt1d(f, d, v, z, H);
            for (int r = 0; r < H; ++r) grid[static_cast<size_t>(r) * W + c] = d[r];
        }

#pragma omp for schedule(static)
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) f[c] = grid[static_cast<size_t>(r) * W + c];
            dt1d(f, d, v, z, W);
            for (int c = 0; c < W; ++c) grid[static_cast<size_t>(r) * W + c] = d[c];
        }
    }
    return grid;
}

}  // namespace deadwood
