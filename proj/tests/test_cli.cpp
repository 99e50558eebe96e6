#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "deadwood/cli.hpp"
#include "deadwood/common.hpp"
#include "deadwood/raster.hpp"
#include "deadwood/render.hpp"

using namespace deadwood;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& p) const { return (path / p).string(); }
};

json read_json(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    json doc;
    f >> doc;
    return doc;
}

}  // namespace

TEST_CASE("cli: synth -> postprocess -> evaluate -> render chain") {
    TempDir tmp("deadwood_cli_chain");

    const std::string spec = tmp / "spec.json";
    {
        std::ofstream f(spec);
        f << R"({"height":256,"width":256,"pixel_size":0.25,"density":25,
                 "crown_radius_min":5,"crown_radius_max":10,"seed":7})";
    }
    REQUIRE(cli::dispatch({"synth", "--spec", spec, "--out-dir", tmp / "corpus", "--count", "2"}) == 0);
    REQUIRE(fs::exists(tmp / "corpus/manifest.json"));
    REQUIRE(fs::exists(tmp / "corpus/scene_0000/pred.rast"));

    REQUIRE(cli::dispatch({"postprocess", "--pred", tmp / "corpus/scene_0000/pred.rast",
                           "--out-labels", tmp / "labels.rast", "--out-geojson",
                           tmp / "instances.geojson"}) == 0);
    REQUIRE(fs::exists(tmp / "labels.rast"));
    REQUIRE(fs::exists(tmp / "labels.rast.meta.json"));

    const json meta = read_json(tmp / "labels.rast.meta.json");
    CHECK(meta["metadata"]["tool_version"] == kVersion);
    CHECK(meta["metadata"]["config"].contains("seg_threshold"));
    CHECK(!meta["metadata"]["input_digests"].empty());

    REQUIRE(cli::dispatch({"evaluate", "--pred-labels", tmp / "labels.rast", "--gt",
                           tmp / "corpus/scene_0000/instances.rast", "--report",
                           tmp / "report.json"}) == 0);
    const json report = read_json(tmp / "report.json");
    CHECK(report["pixel_iou"].get<double>() > 0.9);
    CHECK(report["tree_iou"].get<double>() > 0.9);
    CHECK(report["pooled"]["f1"].get<double>() > 0.9);
    CHECK(report.contains("metadata"));

    // GeoJSON ground truth route exercises rasterization + annotation centroids.
    REQUIRE(cli::dispatch({"evaluate", "--pred-labels", tmp / "labels.rast", "--gt",
                           tmp / "corpus/scene_0000/annotations.geojson", "--report",
                           tmp / "report2.json"}) == 0);
    const json report2 = read_json(tmp / "report2.json");
    CHECK(report2["centroid_rmse_px"].get<double>() < 1.0);

    REQUIRE(cli::dispatch({"render", "--labels", tmp / "labels.rast", "--out",
                           tmp / "overlay.png"}) == 0);
    REQUIRE(fs::exists(tmp / "overlay.png"));

    // Base-image overlay route.
    REQUIRE(cli::dispatch({"render", "--labels", tmp / "labels.rast", "--base",
                           tmp / "corpus/scene_0000/pred.rast", "--out", tmp / "overlay2.png"}) == 0);
    REQUIRE(fs::exists(tmp / "overlay2.png"));

    // Same inputs, same config: outputs are digest-identical, and a thread
    // cap must not change results.
    REQUIRE(cli::dispatch({"postprocess", "--pred", tmp / "corpus/scene_0000/pred.rast",
                           "--out-labels", tmp / "labels_b.rast"}) == 0);
    REQUIRE(cli::dispatch({"--threads", "2", "postprocess", "--pred",
                           tmp / "corpus/scene_0000/pred.rast", "--out-labels",
                           tmp / "labels_c.rast"}) == 0);
    CHECK(file_digest_hex(tmp / "labels.rast") == file_digest_hex(tmp / "labels_b.rast"));
    CHECK(file_digest_hex(tmp / "labels.rast") == file_digest_hex(tmp / "labels_c.rast"));
}

TEST_CASE("cli: loss-eval emits a component table") {
    TempDir tmp("deadwood_cli_loss");
    const std::string spec = tmp / "spec.json";
    {
        std::ofstream f(spec);
        f << R"({"height":64,"width":64,"density":40,"crown_radius_min":4,
                 "crown_radius_max":7,"seed":3,"noise_sigma":0.05,"blur_sigma":1.0})";
    }
    REQUIRE(cli::dispatch({"synth", "--spec", spec, "--out-dir", tmp / "c"}) == 0);
    // Prediction channel 0 holds probabilities, not logits; for the loss CLI
    // that is fine as a smoke input (logits near 0..1).
    REQUIRE(cli::dispatch({"loss-eval", "--pred", tmp / "c/scene_0000/pred.rast", "--target",
                           tmp / "c/scene_0000/target.rast", "--csv", tmp / "loss.csv"}) == 0);
    std::ifstream f(tmp / "loss.csv");
    std::string line, all;
    int rows = 0;
    while (std::getline(f, line)) {
        all += line + "\n";
        ++rows;
    }
    CHECK(rows == 8);  // header + 7 components
    CHECK(all.find("total,") != std::string::npos);
}

TEST_CASE("cli: split writes cluster assignments with fractions") {
    TempDir tmp("deadwood_cli_split");
    // One synthetic "image" with wide geography so patches fall in many bins.
    MultiChannelRaster img(1024, 1024, 1);
    img.geo.origin_x = 0.0;
    img.geo.origin_y = 262144.0;
    img.geo.pixel_size_x = 256.0;  // coarse pixels spread patches far apart
    img.geo.pixel_size_y = 256.0;
    write_raster(img, tmp / "img.rast");
    {
        std::ofstream f(tmp / "images.json");
        f << json{{"images", {tmp / "img.rast"}}}.dump();
    }
    {
        // A few annotations scattered over the extent.
        json features = json::array();
        for (int i = 0; i < 30; ++i) {
            const double x = 1000.0 + 8000.0 * i;
            const double y = 250000.0 - 7000.0 * i;
            json f;
            f["type"] = "Feature";
            f["properties"] = json::object();
            f["geometry"] = {{"type", "Polygon"},
                             {"coordinates", {{{x, y}, {x + 50, y}, {x + 50, y + 50},
                                               {x, y + 50}, {x, y}}}}};
            features.push_back(f);
        }
        std::ofstream f(tmp / "ann.geojson");
        f << json{{"type", "FeatureCollection"}, {"features", features}}.dump();
    }
    REQUIRE(cli::dispatch({"split", "--annotations", tmp / "ann.geojson", "--images",
                           tmp / "images.json", "--bin-size", "40000", "--seed", "5", "--out",
                           tmp / "split.json"}) == 0);
    const json split = read_json(tmp / "split.json");
    REQUIRE(split.contains("clusters"));
    CHECK(split["clusters"].size() >= 1);
    const double total = split["achieved_fractions"]["train"].get<double>() +
                         split["achieved_fractions"]["validation"].get<double>() +
                         split["achieved_fractions"]["test"].get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cli: ablate prints four configuration rows") {
    TempDir tmp("deadwood_cli_ablate");
    const std::string spec = tmp / "spec.json";
    {
        std::ofstream f(spec);
        f << R"({"height":192,"width":192,"density":30,"crown_radius_min":5,
                 "crown_radius_max":9,"seed":13})";
    }
    REQUIRE(cli::dispatch({"synth", "--spec", spec, "--out-dir", tmp / "corpus", "--count", "3"}) == 0);
    REQUIRE(cli::dispatch({"ablate", "--corpus", tmp / "corpus/manifest.json", "--out",
                           tmp / "ablation.csv"}) == 0);
    std::ifstream f(tmp / "ablation.csv");
    std::string line;
    std::getline(f, line);
    CHECK(line == "config,pixel_iou,tree_iou,centroid_rmse_px,precision,recall,f1");
    std::vector<std::string> rows;
    while (std::getline(f, line)) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("raw,", 0) == 0);
    CHECK(rows[3].rfind("final,", 0) == 0);

    // Noiseless corpus: the final configuration must not trail raw on tree IoU.
    auto tree_iou_of = [](const std::string& row) {
        size_t p = row.find(',');
        p = row.find(',', p + 1);
        return std::stod(row.substr(p + 1));
    };
    CHECK(tree_iou_of(rows[3]) >= tree_iou_of(rows[0]) - 1e-9);
}

TEST_CASE("cli: render output is deterministic and colors instances distinctly") {
    TempDir tmp("deadwood_cli_render");
    InstanceMap labels(32, 32);
    for (int r = 2; r < 8; ++r) {
        for (int c = 2; c < 8; ++c) labels.at(r, c) = 1;
    }
    for (int r = 12; r < 18; ++r) {
        for (int c = 12; c < 18; ++c) labels.at(r, c) = 2;
    }
    for (int r = 22; r < 28; ++r) {
        for (int c = 22; c < 28; ++c) labels.at(r, c) = 3;
    }
    write_instance_map(labels, tmp / "labels.rast");

    REQUIRE(cli::dispatch({"render", "--labels", tmp / "labels.rast", "--out", tmp / "a.png"}) == 0);
    REQUIRE(cli::dispatch({"render", "--labels", tmp / "labels.rast", "--out", tmp / "b.png"}) == 0);
    CHECK(file_digest_hex(tmp / "a.png") == file_digest_hex(tmp / "b.png"));

    int w = 0, h = 0;
    const std::vector<uint8_t> rgb = read_png_rgb(tmp / "a.png", &w, &h);
    REQUIRE(w == 32);
    REQUIRE(h == 32);
    std::set<std::array<uint8_t, 3>> colors;
    for (size_t i = 0; i < rgb.size(); i += 3) {
        colors.insert({rgb[i], rgb[i + 1], rgb[i + 2]});
    }
    CHECK(colors.size() == 4);  // background + 3 instance colors

    // Empty map renders a solid background.
    InstanceMap empty(16, 16);
    write_instance_map(empty, tmp / "empty.rast");
    REQUIRE(cli::dispatch({"render", "--labels", tmp / "empty.rast", "--out", tmp / "e.png"}) == 0);
    const std::vector<uint8_t> ergb = read_png_rgb(tmp / "e.png", &w, &h);
    std::set<std::array<uint8_t, 3>> ecolors;
    for (size_t i = 0; i < ergb.size(); i += 3) {
        ecolors.insert({ergb[i], ergb[i + 1], ergb[i + 2]});
    }
    CHECK(ecolors.size() == 1);
}

TEST_CASE("cli: exit codes distinguish usage, validation and I/O failures") {
    CHECK(cli::dispatch({"no-such-command"}) == 64);
    CHECK(cli::dispatch({}) == 64);
    CHECK(cli::dispatch({"evaluate", "--pred-labels", "/nope.rast", "--gt", "/nope.geojson",
                         "--report", "/tmp/deadwood_nope.json"}) == 2);

    // Validation failure: malformed ratios.
    TempDir tmp("deadwood_cli_codes");
    {
        std::ofstream f(tmp / "ann.geojson");
        f << R"({"type":"FeatureCollection","features":[]})";
    }
    {
        std::ofstream f(tmp / "images.json");
        f << R"({"images":[]})";
    }
    CHECK(cli::dispatch({"split", "--annotations", tmp / "ann.geojson", "--images",
                         tmp / "images.json", "--ratios", "0.5,0.5", "--out",
                         tmp / "split.json"}) == 1);
}
