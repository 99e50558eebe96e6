#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "deadwood/raster.hpp"

using namespace deadwood;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("deadwood_test_" + name)).string();
}

MultiChannelRaster random_raster(std::mt19937_64& rng, int w, int h, int c) {
    MultiChannelRaster r(w, h, c);
    r.geo.origin_x = 384000.0;
    r.geo.origin_y = 6672000.0;
    r.geo.pixel_size_x = 0.25;
    r.geo.pixel_size_y = 0.25;
    for (float& v : r.data) {
        v = static_cast<float>((rng() >> 40)) / static_cast<float>(1 << 24) * 2.0f - 1.0f;
    }
    return r;
}

}  // namespace

TEST_CASE("raster round-trip is bitwise identity") {
    std::mt19937_64 rng(7);
    const std::string path = temp_path("roundtrip.rast");
    for (int iter = 0; iter < 1000; ++iter) {
        const int w = 1 + static_cast<int>(rng() % 9);
        const int h = 1 + static_cast<int>(rng() % 9);
        const int c = 1 + static_cast<int>(rng() % 4);
        MultiChannelRaster r = random_raster(rng, w, h, c);
        write_raster(r, path);
        const MultiChannelRaster back = read_raster(path);
        REQUIRE(back.width == r.width);
        REQUIRE(back.height == r.height);
        REQUIRE(back.channels == r.channels);
        REQUIRE(back.data == r.data);  // exact float equality
        REQUIRE(back.geo.origin_x == r.geo.origin_x);
        REQUIRE(back.geo.pixel_size_y == r.geo.pixel_size_y);
    }
    fs::remove(path);
}

TEST_CASE("known payload bytes for a 1x1x3 raster") {
    // Independent byte-level expectation: 0.25f, -1.0f, 1.0f little-endian.
    MultiChannelRaster r(1, 1, 3);
    r.data = {0.25f, -1.0f, 1.0f};
    const std::string path = temp_path("payload.rast");
    write_raster(r, path);

    std::ifstream f(path, std::ios::binary);
    std::string header;
    std::getline(f, header);
    std::vector<unsigned char> payload((std::istreambuf_iterator<char>(f)),
                                       std::istreambuf_iterator<char>());
    REQUIRE(payload.size() == 12);
    const std::vector<unsigned char> expect = {
        0x00, 0x00, 0x80, 0x3e,  // 0.25f
        0x00, 0x00, 0x80, 0xbf,  // -1.0f
        0x00, 0x00, 0x80, 0x3f,  // 1.0f
    };
    CHECK(payload == expect);
    fs::remove(path);
}

TEST_CASE("all-zero raster payload is all zero bytes") {
    MultiChannelRaster r(4, 4, 1);
    const std::string path = temp_path("zeros.rast");
    write_raster(r, path);
    std::ifstream f(path, std::ios::binary);
    std::string header;
    std::getline(f, header);
    std::vector<unsigned char> payload((std::istreambuf_iterator<char>(f)),
                                       std::istreambuf_iterator<char>());
    REQUIRE(payload.size() == 64);
    for (unsigned char b : payload) CHECK(b == 0);
    fs::remove(path);
}

TEST_CASE("truncated payload is a format error") {
    const std::string path = temp_path("trunc.rast");
    {
        std::ofstream f(path, std::ios::binary);
        f << R"({"width":2,"height":2,"channels":1,"dtype":"f32le","geotransform":[0,2,1,1],"channel_roles":["other"]})"
          << '\n';
        const char bytes[12] = {0};
        f.write(bytes, 12);  // needs 16
    }
    CHECK_THROWS_AS(read_raster(path), FormatError);
    fs::remove(path);
}

TEST_CASE("NaN payload is rejected at load") {
    MultiChannelRaster r(2, 2, 1);
    const std::string path = temp_path("nan.rast");
    write_raster(r, path);
    {
        // Patch one payload float to a NaN bit pattern.
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        std::string header;
        std::getline(f, header);
        const auto payload_start = f.tellg();
        f.seekp(payload_start);
        const unsigned char nan_bytes[4] = {0x00, 0x00, 0xc0, 0x7f};
        f.write(reinterpret_cast<const char*>(nan_bytes), 4);
    }
    CHECK_THROWS_AS(read_raster(path), ValidationError);
    fs::remove(path);
}

TEST_CASE("malformed header is a format error") {
    const std::string path = temp_path("badheader.rast");
    {
        std::ofstream f(path, std::ios::binary);
        f << "{not json" << '\n';
    }
    CHECK_THROWS_AS(read_raster(path), FormatError);
    fs::remove(path);
}

TEST_CASE("zero channels cannot be constructed or written") {
    CHECK_THROWS_AS(MultiChannelRaster(2, 2, 0), ValidationError);
}

TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(read_raster("/nonexistent/nope.rast"), IoError);
}

TEST_CASE("writing a default (zero-channel) raster is a validation error") {
    MultiChannelRaster empty;
    CHECK_THROWS_AS(write_raster(empty, temp_path("empty.rast")), ValidationError);
}

TEST_CASE("pixel<->map round trip on integer pixel coordinates") {
    GeoTransform geo;
    geo.origin_x = 384000.0;
    geo.origin_y = 6672000.0;
    geo.pixel_size_x = 0.25;  // dyadic, exact in binary
    geo.pixel_size_y = 0.5;
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            const Point2d m = geo.pixel_to_map(c, r);
            const Point2d p = geo.map_to_pixel(m.x, m.y);
            CHECK(p.x == static_cast<double>(c));
            CHECK(p.y == static_cast<double>(r));
        }
    }
}

TEST_CASE("pixel<->map round trip within half a pixel for arbitrary sizes") {
    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 200; ++iter) {
        GeoTransform geo;
        geo.origin_x = static_cast<double>(rng() % 1000000) / 7.0;
        geo.origin_y = static_cast<double>(rng() % 1000000) / 3.0;
        geo.pixel_size_x = 0.1 + static_cast<double>(rng() % 1000) / 997.0;
        geo.pixel_size_y = 0.1 + static_cast<double>(rng() % 1000) / 991.0;
        const int c = static_cast<int>(rng() % 10000);
        const int r = static_cast<int>(rng() % 10000);
        const Point2d m = geo.pixel_to_map(c, r);
        const Point2d p = geo.map_to_pixel(m.x, m.y);
        CHECK(std::lround(p.x) == c);
        CHECK(std::lround(p.y) == r);
    }
}

TEST_CASE("instance map compaction is idempotent") {
    InstanceMap m(4, 3);
    m.labels = {0, 5, 5, 0, 2, 2, 0, 9, 0, 0, 9, 9};
    m.compact();
    const std::vector<int32_t> once = m.labels;
    CHECK(m.max_label() == 3);
    CHECK(once == std::vector<int32_t>{0, 2, 2, 0, 1, 1, 0, 3, 0, 0, 3, 3});
    m.compact();
    CHECK(m.labels == once);
}

TEST_CASE("instance map raster round trip") {
    InstanceMap m(5, 4);
    for (size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = static_cast<int32_t>(i % 3);
    const std::string path = temp_path("imap.rast");
    write_instance_map(m, path);
    const InstanceMap back = read_instance_map(path);
    CHECK(back.labels == m.labels);
    fs::remove(path);
}
