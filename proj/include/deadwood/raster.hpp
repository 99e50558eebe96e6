#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deadwood/common.hpp"

namespace deadwood {

// Affine georeference, north-up: pixel row index increases southward.
// Both pixel sizes are stored positive; the sign convention lives in the
// pixel<->map mapping, not in the data.
struct GeoTransform {
    double origin_x = 0.0;   // map x of the top-left corner of pixel (0,0)
    double origin_y = 0.0;   // map y of the top-left corner of pixel (0,0)
    double pixel_size_x = 1.0;
    double pixel_size_y = 1.0;

    // Center of pixel (col,row) in map units.
    Point2d pixel_to_map(double col, double row) const {
        return {origin_x + (col + 0.5) * pixel_size_x,
                origin_y - (row + 0.5) * pixel_size_y};
    }
    // Continuous pixel-index coordinates (integer value = pixel center).
    Point2d map_to_pixel(double x, double y) const {
        return {(x - origin_x) / pixel_size_x - 0.5,
                (origin_y - y) / pixel_size_y - 0.5};
    }

    void validate() const;
};

enum class ChannelRole { Segmentation, Centroid, Hybrid, ImageBand, Other };

const char* channel_role_name(ChannelRole r);
ChannelRole channel_role_from_name(const std::string& s);

// Dense float32 raster stack, row-major, channel-interleaved-last.
// Immutable by convention once built; all pipeline functions take it const.
struct MultiChannelRaster {
    int width = 0;
    int height = 0;
    int channels = 0;
    GeoTransform geo;
    std::vector<ChannelRole> channel_roles;
    std::vector<float> data;

    MultiChannelRaster() = default;
    MultiChannelRaster(int w, int h, int c, GeoTransform g = {});

    size_t idx(int r, int col, int ch) const {
        return (static_cast<size_t>(r) * width + col) * channels + ch;
    }
    float at(int r, int col, int ch) const { return data[idx(r, col, ch)]; }
    float& at(int r, int col, int ch) { return data[idx(r, col, ch)]; }

    FloatGrid extract_channel(int ch) const;
    void set_channel(int ch, const FloatGrid& g);

    // Throws ValidationError on size mismatch, bad channel count or NaN payload.
    void validate() const;
};

// Integer-labeled raster: 0 = background, k >= 1 = instance id.
struct InstanceMap {
    int width = 0;
    int height = 0;
    GeoTransform geo;
    std::vector<int32_t> labels;

    InstanceMap() = default;
    InstanceMap(int w, int h, GeoTransform g = {})
        : width(w), height(h), geo(g), labels(static_cast<size_t>(w) * h, 0) {}

    int32_t at(int r, int c) const { return labels[static_cast<size_t>(r) * width + c]; }
    int32_t& at(int r, int c) { return labels[static_cast<size_t>(r) * width + c]; }

    int32_t max_label() const;
    // Remaps labels onto {1..K} preserving ascending label order. Idempotent.
    void compact();
};

// Single-file raster container: one UTF-8 JSON header line terminated by
// '\n' (keys: width, height, channels, dtype="f32le", geotransform[4],
// channel_roles[]), then raw little-endian float32, row-major, channel-last.
MultiChannelRaster read_raster(const std::string& path);
void write_raster(const MultiChannelRaster& raster, const std::string& path);

// InstanceMap stored through the same container (single channel, role
// "other", labels as exact small integers in float32).
InstanceMap read_instance_map(const std::string& path);
void write_instance_map(const InstanceMap& m, const std::string& path);

}  // namespace deadwood
