#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deadwood/raster.hpp"

namespace deadwood {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

// Deterministic palette: golden-ratio hue walk keyed on the label id.
Rgb label_color(int32_t label);

// 8-bit RGB PNG (filter type 0 on every scanline). Deterministic bytes for
// identical input.
void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb);

// Decoder for the subset written above; used by tests and kept next to the
// writer so the two stay in sync.
std::vector<uint8_t> read_png_rgb(const std::string& path, int* width, int* height);

// Instance overlay: distinct color per label over an optional grayscale base.
void render_labels(const InstanceMap& labels, const FloatGrid* base,
                   const std::string& out_path);

}  // namespace deadwood
