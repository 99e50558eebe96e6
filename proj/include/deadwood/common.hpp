#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deadwood {

inline constexpr const char* kVersion = "0.1.0";

// Validation failures of in-memory data or parameters. CLI exit status 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatch between rasters that must align.
struct DimensionError : ValidationError {
    using ValidationError::ValidationError;
};

// Geometry type the pipeline does not handle (e.g. GeoJSON LineString).
struct UnsupportedGeometryError : ValidationError {
    using ValidationError::ValidationError;
};

// File-level problems: missing files, malformed headers, truncated payloads.
// CLI exit status 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : IoError {
    using IoError::IoError;
};

struct Point2d {
    double x = 0.0;
    double y = 0.0;
};

// Single-channel float raster plane. Row-major, index = r * width + c.
struct FloatGrid {
    int width = 0;
    int height = 0;
    std::vector<float> v;

    FloatGrid() = default;
    FloatGrid(int w, int h, float fill = 0.0f)
        : width(w), height(h), v(static_cast<size_t>(w) * h, fill) {}

    float& at(int r, int c) { return v[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return v[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return v.size(); }
    bool same_shape(const FloatGrid& o) const { return width == o.width && height == o.height; }
};

// Binary mask, 0/1 per pixel.
struct ByteGrid {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> v;

    ByteGrid() = default;
    ByteGrid(int w, int h, uint8_t fill = 0)
        : width(w), height(h), v(static_cast<size_t>(w) * h, fill) {}

    uint8_t& at(int r, int c) { return v[static_cast<size_t>(r) * width + c]; }
    uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return v.size(); }
    bool same_shape(const ByteGrid& o) const { return width == o.width && height == o.height; }
};

// Deterministic parallel sum: fixed 4096-element blocks summed serially,
// block sums combined pairwise. The result is bitwise identical for any
// thread count because neither the block layout nor the combine order
// depends on scheduling.
double pairwise_combine(std::vector<double>& partial);

template <class F>
double parallel_block_sum(int64_t n, F&& f) {
    constexpr int64_t kBlock = 4096;
    if (n <= 0) return 0.0;
    const int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<size_t>(nblocks), 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kBlock;
        const int64_t hi = std::min<int64_t>(lo + kBlock, n);
        double s = 0.0;
        for (int64_t i = lo; i < hi; ++i) s += f(i);
        partial[static_cast<size_t>(b)] = s;
    }
    return pairwise_combine(partial);
}

// FNV-1a over a file's bytes; used for input digests in run metadata.
std::string file_digest_hex(const std::string& path);

}  // namespace deadwood
