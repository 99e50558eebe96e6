#include "deadwood/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace deadwood {

Rgb label_color(int32_t label) {
    // Golden-ratio hue walk; saturation/value fixed.
    const double hue = std::fmod(0.61803398875 * static_cast<double>(label), 1.0);
    const double s = 0.65, v = 0.95;
    const double h6 = hue * 6.0;
    const int i = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r = 0, g = 0, b = 0;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        case 5: r = v; g = p; b = q; break;
    }
    return {static_cast<uint8_t>(std::lround(r * 255.0)),
            static_cast<uint8_t>(std::lround(g * 255.0)),
            static_cast<uint8_t>(std::lround(b * 255.0))};
}

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> head;
    put_u32_be(head, static_cast<uint32_t>(data.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    f.write(type, 4);
    if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()),
                               static_cast<std::streamsize>(data.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<uint8_t> tail;
    put_u32_be(tail, static_cast<uint32_t>(crc));
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb) {
    if (width <= 0 || height <= 0 ||
        rgb.size() != static_cast<size_t>(width) * height * 3) {
        throw ValidationError("write_png: buffer size does not match dimensions");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);

    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(width));
    put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    write_chunk(f, "IHDR", ihdr);

    // Filter byte 0 on every scanline.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) * 3 + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);
        const uint8_t* row = &rgb[static_cast<size_t>(r) * width * 3];
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw IoError("zlib compression failed for " + path);
    }
    compressed.resize(bound);
    write_chunk(f, "IDAT", compressed);
    write_chunk(f, "IEND", {});
    if (!f) throw IoError("write failed: " + path);
}

std::vector<uint8_t> read_png_rgb(const std::string& path, int* width, int* height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || bytes[1] != 'P' || bytes[2] != 'N' || bytes[3] != 'G') {
        throw FormatError("not a PNG: " + path);
    }
    auto u32 = [&](size_t at) {
        return (static_cast<uint32_t>(bytes[at]) << 24) | (static_cast<uint32_t>(bytes[at + 1]) << 16) |
               (static_cast<uint32_t>(bytes[at + 2]) << 8) | static_cast<uint32_t>(bytes[at + 3]);
    };

    int w = 0, h = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = u32(pos);
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const size_t data_at = pos + 8;
        if (data_at + len > bytes.size()) throw FormatError("truncated PNG: " + path);
        if (type == "IHDR") {
            w = static_cast<int>(u32(data_at));
            h = static_cast<int>(u32(data_at + 4));
            if (bytes[data_at + 8] != 8 || bytes[data_at + 9] != 2) {
                throw FormatError("only 8-bit RGB PNGs supported: " + path);
            }
        } else if (type == "IDAT") {
            idat.insert(idat.end(), bytes.begin() + static_cast<long>(data_at),
                        bytes.begin() + static_cast<long>(data_at + len));
        } else if (type == "IEND") {
            break;
        }
        pos = data_at + len + 4;
    }
    if (w <= 0 || h <= 0) throw FormatError("missing IHDR: " + path);

    const size_t stride = static_cast<size_t>(w) * 3 + 1;
    std::vector<uint8_t> raw(static_cast<size_t>(h) * stride);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw FormatError("PNG inflate failed: " + path);
    }

    std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3);
    for (int r = 0; r < h; ++r) {
        if (raw[static_cast<size_t>(r) * stride] != 0) {
            throw FormatError("unexpected PNG filter type: " + path);
        }
        std::memcpy(&rgb[static_cast<size_t>(r) * w * 3],
                    &raw[static_cast<size_t>(r) * stride + 1], static_cast<size_t>(w) * 3);
    }
    *width = w;
    *height = h;
    return rgb;
}

void render_labels(const InstanceMap& labels, const FloatGrid* base,
                   const std::string& out_path) {
    const int W = labels.width, H = labels.height;
    if (base && (base->width != W || base->height != H)) {
        throw DimensionError("base image shape does not match labels");
    }

    float lo = 0.0f, hi = 1.0f;
    if (base && !base->v.empty()) {
        lo = *std::min_element(base->v.begin(), base->v.end());
        hi = *std::max_element(base->v.begin(), base->v.end());
        if (hi <= lo) hi = lo + 1.0f;
    }

    std::vector<uint8_t> rgb(static_cast<size_t>(W) * H * 3);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const size_t at = (static_cast<size_t>(r) * W + c) * 3;
            uint8_t gray = 40;
            if (base) {
                gray = static_cast<uint8_t>(
                    std::lround(255.0 * (base->at(r, c) - lo) / (hi - lo)));
            }
            const int32_t lab = labels.at(r, c);
            if (lab == 0) {
                rgb[at] = rgb[at + 1] = rgb[at + 2] = gray;
            } else {
                const Rgb col = label_color(lab);
                rgb[at] = static_cast<uint8_t>((2 * col.r + gray) / 3);
                rgb[at + 1] = static_cast<uint8_t>((2 * col.g + gray) / 3);
                rgb[at + 2] = static_cast<uint8_t>((2 * col.b + gray) / 3);
            }
        }
    }
    write_png(out_path, W, H, rgb);
}

}  // namespace deadwood
