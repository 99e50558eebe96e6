#include "deadwood/raster.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace deadwood {

using nlohmann::json;

void GeoTransform::validate() const {
    if (!(pixel_size_x > 0.0) || !(pixel_size_y > 0.0)) {
        throw ValidationError("pixel sizes must be positive");
    }
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
        throw ValidationError("geotransform origin must be finite");
    }
}

const char* channel_role_name(ChannelRole r) {
    switch (r) {
        case ChannelRole::Segmentation: return "segmentation";
        case ChannelRole::Centroid: return "centroid";
        case ChannelRole::Hybrid: return "hybrid";
        case ChannelRole::ImageBand: return "image-band";
        case ChannelRole::Other: return "other";
    }
    return "other";
}

ChannelRole channel_role_from_name(const std::string& s) {
    if (s == "segmentation") return ChannelRole::Segmentation;
    if (s == "centroid") return ChannelRole::Centroid;
    if (s == "hybrid") return ChannelRole::Hybrid;
    if (s == "image-band") return ChannelRole::ImageBand;
    if (s == "other") return ChannelRole::Other;
    throw FormatError("unknown channel role: " + s);
}

MultiChannelRaster::MultiChannelRaster(int w, int h, int c, GeoTransform g)
    : width(w), height(h), channels(c), geo(g),
      channel_roles(static_cast<size_t>(c > 0 ? c : 0), ChannelRole::Other),
      data(static_cast<size_t>(w) * h * (c > 0 ? c : 0), 0.0f) {
    if (w <= 0 || h <= 0 || c < 1) {
        throw ValidationError("raster dimensions must be positive and channels >= 1");
    }
}

FloatGrid MultiChannelRaster::extract_channel(int ch) const {
    if (ch < 0 || ch >= channels) throw ValidationError("channel index out of range");
    FloatGrid g(width, height);
    const size_t n = static_cast<size_t>(width) * height;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
        g.v[i] = data[static_cast<size_t>(i) * channels + ch];
    }
    return g;
}

void MultiChannelRaster::set_channel(int ch, const FloatGrid& g) {
    if (ch < 0 || ch >= channels) throw ValidationError("channel index out of range");
    if (g.width != width || g.height != height) {
        throw DimensionError("channel grid shape does not match raster");
    }
    const size_t n = static_cast<size_t>(width) * height;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
        data[static_cast<size_t>(i) * channels + ch] = g.v[i];
    }
}

void MultiChannelRaster::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("raster dimensions must be positive");
    if (channels < 1) throw ValidationError("raster must have at least one channel");
    geo.validate();
    const size_t expect = static_cast<size_t>(width) * height * channels;
    if (data.size() != expect) {
        throw ValidationError("raster data length " + std::to_string(data.size()) +
                              " does not match " + std::to_string(expect));
    }
    if (channel_roles.size() != static_cast<size_t>(channels)) {
        throw ValidationError("channel_roles length does not match channel count");
    }
    for (float f : data) {
        if (!std::isfinite(f)) throw ValidationError("raster payload contains a non-finite value");
    }
}

int32_t InstanceMap::max_label() const {
    int32_t m = 0;
    for (int32_t v : labels) m = std::max(m, v);
    return m;
}

void InstanceMap::compact() {
    const int32_t maxl = max_label();
    if (maxl <= 0) return;
    std::vector<int32_t> remap(static_cast<size_t>(maxl) + 1, 0);
    for (int32_t v : labels) {
        if (v > 0) remap[v] = 1;
    }
    int32_t next = 0;
    for (int32_t l = 1; l <= maxl; ++l) {
        if (remap[l]) remap[l] = ++next;
    }
    for (auto& v : labels) {
        if (v > 0) v = remap[v];
    }
}

namespace {

void pack_le_f32(const std::vector<float>& src, std::vector<unsigned char>& out) {
    out.resize(src.size() * 4);
    for (size_t i = 0; i < src.size(); ++i) {
        uint32_t bits;
        std::memcpy(&bits, &src[i], 4);
        out[4 * i + 0] = static_cast<unsigned char>(bits & 0xff);
        out[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
        out[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
        out[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
}

void unpack_le_f32(const std::vector<unsigned char>& src, std::vector<float>& out) {
    out.resize(src.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) {
        uint32_t bits = static_cast<uint32_t>(src[4 * i + 0]) |
                        (static_cast<uint32_t>(src[4 * i + 1]) << 8) |
                        (static_cast<uint32_t>(src[4 * i + 2]) << 16) |
                        (static_cast<uint32_t>(src[4 * i + 3]) << 24);
        std::memcpy(&out[i], &bits, 4);
    }
}

}  // namespace

void write_raster(const MultiChannelRaster& raster, const std::string& path) {
    raster.validate();
    json hdr;
    hdr["width"] = raster.width;
    hdr["height"] = raster.height;
    hdr["channels"] = raster.channels;
    hdr["dtype"] = "f32le";
    hdr["geotransform"] = {raster.geo.origin_x, raster.geo.origin_y,
                           raster.geo.pixel_size_x, raster.geo.pixel_size_y};
    json roles = json::array();
    for (ChannelRole r : raster.channel_roles) roles.push_back(channel_role_name(r));
    hdr["channel_roles"] = roles;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << hdr.dump() << '\n';
    std::vector<unsigned char> payload;
    pack_le_f32(raster.data, payload);
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (!f) throw IoError("write failed: " + path);
}

MultiChannelRaster read_raster(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("missing header line: " + path);

    json hdr;
    try {
        hdr = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("malformed raster header in " + path + ": " + e.what());
    }
    for (const char* key : {"width", "height", "channels", "dtype", "geotransform", "channel_roles"}) {
        if (!hdr.contains(key)) throw FormatError(std::string("raster header missing key '") + key + "' in " + path);
    }
    if (hdr["dtype"] != "f32le") throw FormatError("unsupported dtype in " + path);

    MultiChannelRaster r;
    r.width = hdr["width"].get<int>();
    r.height = hdr["height"].get<int>();
    r.channels = hdr["channels"].get<int>();
    if (r.width <= 0 || r.height <= 0 || r.channels < 1) {
        throw FormatError("non-positive dimensions in raster header: " + path);
    }
    auto gt = hdr["geotransform"];
    if (!gt.is_array() || gt.size() != 4) throw FormatError("geotransform must have 4 entries: " + path);
    r.geo.origin_x = gt[0].get<double>();
    r.geo.origin_y = gt[1].get<double>();
    r.geo.pixel_size_x = gt[2].get<double>();
    r.geo.pixel_size_y = gt[3].get<double>();
    for (const auto& role : hdr["channel_roles"]) {
        r.channel_roles.push_back(channel_role_from_name(role.get<std::string>()));
    }
    if (r.channel_roles.size() != static_cast<size_t>(r.channels)) {
        throw FormatError("channel_roles length mismatch: " + path);
    }

    const size_t count = static_cast<size_t>(r.width) * r.height * r.channels;
    std::vector<unsigned char> payload(count * 4);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<size_t>(f.gcount()) != payload.size()) {
        throw FormatError("truncated payload in " + path + ": expected " +
                          std::to_string(payload.size()) + " bytes, got " +
                          std::to_string(f.gcount()));
    }
    char extra;
    if (f.read(&extra, 1)) throw FormatError("trailing bytes after payload in " + path);
    unpack_le_f32(payload, r.data);

    try {
        r.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (" + path + ")");
    }
    return r;
}

void write_instance_map(const InstanceMap& m, const std::string& path) {
    MultiChannelRaster r(m.width, m.height, 1, m.geo);
    r.channel_roles[0] = ChannelRole::Other;
    for (size_t i = 0; i < m.labels.size(); ++i) r.data[i] = static_cast<float>(m.labels[i]);
    write_raster(r, path);
}

InstanceMap read_instance_map(const std::string& path) {
    MultiChannelRaster r = read_raster(path);
    if (r.channels != 1) throw FormatError("instance map must be single-channel: " + path);
    InstanceMap m(r.width, r.height, r.geo);
    for (size_t i = 0; i < r.data.size(); ++i) {
        const float f = r.data[i];
        if (f < 0.0f || f != std::floor(f)) {
            throw ValidationError("instance map pixel is not a non-negative integer: " + path);
        }
        m.labels[i] = static_cast<int32_t>(f);
    }
    return m;
}

}  // namespace deadwood
