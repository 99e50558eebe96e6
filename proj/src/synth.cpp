#include "deadwood/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

namespace deadwood {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Explicit draws instead of std::*_distribution so the byte streams are
// identical across standard libraries.
double uniform01(std::mt19937_64& g) {
    return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
}

double uniform_in(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

double normal(std::mt19937_64& g) {
    const double u1 = uniform01(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int poisson(std::mt19937_64& g, double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 100.0) {
        const int k = static_cast<int>(std::lround(lambda + std::sqrt(lambda) * normal(g)));
        return std::max(0, k);
    }
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform01(g);
    } while (p > limit);
    return k - 1;
}

}  // namespace

void SceneSpec::validate() const {
    if (height < 16 || width < 16) throw ValidationError("scene extent must be at least 16x16");
    if (!(pixel_size > 0.0)) throw ValidationError("pixel_size must be > 0");
    if (!(density >= 0.0)) throw ValidationError("density must be >= 0");
    if (!(crown_radius_min > 0.0) || !(crown_radius_max >= crown_radius_min)) {
        throw ValidationError("crown radius range must be positive and non-empty");
    }
    if (!(overlap_probability >= 0.0 && overlap_probability <= 1.0)) {
        throw ValidationError("overlap_probability must be in [0, 1]");
    }
    for (double s : noise_sigma) {
        if (!(s >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
    }
    if (!(blur_sigma >= 0.0)) throw ValidationError("blur_sigma must be >= 0");
    if (!(heatmap_sigma > 0.0)) throw ValidationError("heatmap_sigma must be > 0");
}

SceneSpec SceneSpec::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed scene spec in " + path + ": " + e.what());
    }
    SceneSpec s;
    s.height = doc.value("height", s.height);
    s.width = doc.value("width", s.width);
    s.pixel_size = doc.value("pixel_size", s.pixel_size);
    s.density = doc.value("density", s.density);
    s.crown_radius_min = doc.value("crown_radius_min", s.crown_radius_min);
    s.crown_radius_max = doc.value("crown_radius_max", s.crown_radius_max);
    s.overlap_probability = doc.value("overlap_probability", s.overlap_probability);
    if (doc.contains("noise_sigma")) {
        const auto& ns = doc["noise_sigma"];
        if (ns.is_number()) {
            const double v = ns.get<double>();
            s.noise_sigma = {v, v, v};
        } else if (ns.is_array() && ns.size() == 3) {
            for (int i = 0; i < 3; ++i) s.noise_sigma[static_cast<size_t>(i)] = ns[i].get<double>();
        } else {
            throw FormatError("noise_sigma must be a number or a 3-array in " + path);
        }
    }
    s.blur_sigma = doc.value("blur_sigma", s.blur_sigma);
    s.heatmap_sigma = doc.value("heatmap_sigma", s.heatmap_sigma);
    s.seed = doc.value("seed", s.seed);
    s.validate();
    return s;
}

std::string SceneSpec::to_json() const {
    json doc;
    doc["height"] = height;
    doc["width"] = width;
    doc["pixel_size"] = pixel_size;
    doc["density"] = density;
    doc["crown_radius_min"] = crown_radius_min;
    doc["crown_radius_max"] = crown_radius_max;
    doc["overlap_probability"] = overlap_probability;
    doc["noise_sigma"] = {noise_sigma[0], noise_sigma[1], noise_sigma[2]};
    doc["blur_sigma"] = blur_sigma;
    doc["heatmap_sigma"] = heatmap_sigma;
    doc["seed"] = seed;
    return doc.dump();
}

namespace {

struct CrownDraft {
    double cx, cy, radius;  // corner-space pixel coordinates
    bool overlap_ok;
};

Polygon make_crown_polygon(std::mt19937_64& rng, const CrownDraft& d,
                           const GeoTransform& geo) {
    const double ecc = uniform_in(rng, 0.0, 0.25);
    const double phi = uniform_in(rng, 0.0, M_PI);
    const double a2 = uniform_in(rng, 0.0, 0.12);
    const double p2 = uniform_in(rng, 0.0, 2.0 * M_PI);
    const double a3 = uniform_in(rng, 0.0, 0.10);
    const double p3 = uniform_in(rng, 0.0, 2.0 * M_PI);
    const double ax = d.radius * (1.0 + ecc);
    const double by = d.radius * (1.0 - ecc);
    const double cphi = std::cos(phi), sphi = std::sin(phi);

    constexpr int kVerts = 48;
    Ring ring;
    ring.reserve(kVerts + 1);
    for (int k = 0; k < kVerts; ++k) {
        const double t = 2.0 * M_PI * k / kVerts;
        // Low-order radial harmonics keep the blob star-shaped (no self
        // intersection) while varying compactness.
        const double rho = 1.0 + a2 * std::cos(2.0 * t + p2) + a3 * std::cos(3.0 * t + p3);
        const double ex = rho * ax * std::cos(t);
        const double ey = rho * by * std::sin(t);
        const double px = d.cx + ex * cphi - ey * sphi;
        const double py = d.cy + ex * sphi + ey * cphi;
        ring.push_back({geo.origin_x + px * geo.pixel_size_x,
                        geo.origin_y - py * geo.pixel_size_y});
    }
    ring.push_back(ring.front());
    return Polygon{{std::move(ring)}};
}

void corrupt_channel(FloatGrid& g, std::mt19937_64& rng, double blur_sigma,
                     double noise_sigma, float lo, float hi) {
    if (blur_sigma > 0.0) g = gaussian_blur(g, blur_sigma);
    if (noise_sigma > 0.0) {
        for (float& x : g.v) {
            x = static_cast<float>(x + noise_sigma * normal(rng));
        }
    }
    if (blur_sigma > 0.0 || noise_sigma > 0.0) {
        for (float& x : g.v) x = std::clamp(x, lo, hi);
    }
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    GeoTransform geo;
    geo.pixel_size_x = spec.pixel_size;
    geo.pixel_size_y = spec.pixel_size;
    geo.origin_x = 0.0;
    geo.origin_y = spec.height * spec.pixel_size;

    const double area_ha = static_cast<double>(spec.height) * spec.width *
                           spec.pixel_size * spec.pixel_size / 10000.0;
    const int count = poisson(rng, spec.density * area_ha);

    std::vector<CrownDraft> crowns;
    crowns.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double radius = uniform_in(rng, spec.crown_radius_min, spec.crown_radius_max);
        const bool overlap_ok = uniform01(rng) < spec.overlap_probability;
        double margin = radius * 1.4 + 2.0;
        margin = std::min(margin, std::min(spec.width, spec.height) / 2.0 - 1.0);

        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const double cx = uniform_in(rng, margin, spec.width - margin);
            const double cy = uniform_in(rng, margin, spec.height - margin);
            bool ok = true;
            for (const CrownDraft& other : crowns) {
                const double sep = overlap_ok
                                       ? std::max(6.0, 0.55 * (radius + other.radius))
                                       : radius + other.radius + 2.0;
                const double dx = cx - other.cx, dy = cy - other.cy;
                if (dx * dx + dy * dy < sep * sep) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                crowns.push_back({cx, cy, radius, overlap_ok});
                placed = true;
            }
        }
        if (!placed) {
            throw ValidationError("crown placement failed after bounded retries; "
                                  "density too high for the extent");
        }
    }

    Scene scene;
    scene.annotations.reserve(crowns.size());
    for (const CrownDraft& d : crowns) {
        Annotation ann;
        ann.polygon = make_crown_polygon(rng, d, geo);
        ann.centroid = polygon_centroid(ann.polygon);
        scene.annotations.push_back(std::move(ann));
    }

    scene.target = build_target_stack(scene.annotations, geo, spec.height, spec.width,
                                      spec.heatmap_sigma);

    scene.pred = scene.target.stack;
    FloatGrid seg = scene.pred.extract_channel(0);
    FloatGrid cen = scene.pred.extract_channel(1);
    FloatGrid hyb = scene.pred.extract_channel(2);
    corrupt_channel(seg, rng, spec.blur_sigma, spec.noise_sigma[0], 0.0f, 1.0f);
    corrupt_channel(cen, rng, spec.blur_sigma, spec.noise_sigma[1], 0.0f, 1.0f);
    // The hybrid head's corruption is noise only: blurring would smear the
    // -1 boundary ridge into the interior and change its meaning.
    corrupt_channel(hyb, rng, 0.0, spec.noise_sigma[2], -1.0f, 1.0f);
    scene.pred.set_channel(0, seg);
    scene.pred.set_channel(1, cen);
    scene.pred.set_channel(2, hyb);
    return scene;
}

namespace {

void write_annotations_geojson(const std::vector<Annotation>& anns, const std::string& path) {
    json doc;
    doc["type"] = "FeatureCollection";
    doc["crs_epsg"] = 0;
    json features = json::array();
    for (const Annotation& a : anns) {
        json rings = json::array();
        for (const Ring& ring : a.polygon.rings) {
            json coords = json::array();
            for (const Point2d& v : ring) coords.push_back({v.x, v.y});
            rings.push_back(std::move(coords));
        }
        json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
        f["properties"] = {{"centroid", {a.centroid.x, a.centroid.y}}};
        features.push_back(std::move(f));
    }
    doc["features"] = std::move(features);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << doc.dump() << '\n';
}

}  // namespace

std::string write_corpus(const std::vector<SceneSpec>& specs, const std::string& out_dir) {
    fs::create_directories(out_dir);
    json manifest;
    manifest["tool_version"] = kVersion;
    json scenes = json::array();

    for (size_t i = 0; i < specs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04zu", i);
        const fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);

        const Scene scene = generate_scene(specs[i]);
        write_annotations_geojson(scene.annotations, (dir / "annotations.geojson").string());
        write_raster(scene.target.stack, (dir / "target.rast").string());
        write_raster(scene.pred, (dir / "pred.rast").string());
        write_instance_map(scene.target.instances, (dir / "instances.rast").string());

        json entry;
        entry["dir"] = name;
        entry["spec"] = json::parse(specs[i].to_json());
        scenes.push_back(std::move(entry));
    }
    manifest["scenes"] = std::move(scenes);

    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream f(manifest_path);
    if (!f) throw IoError("cannot open for writing: " + manifest_path);
    f << manifest.dump(2) << '\n';
    return manifest_path;
}

std::vector<CorpusEntry> read_corpus_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open: " + manifest_path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest in " + manifest_path + ": " + e.what());
    }
    const fs::path root = fs::path(manifest_path).parent_path();
    std::vector<CorpusEntry> out;
    for (const auto& entry : doc.value("scenes", json::array())) {
        CorpusEntry ce;
        ce.dir = (root / entry.at("dir").get<std::string>()).string();
        const json& sj = entry.at("spec");
        SceneSpec s;
        s.height = sj.value("height", s.height);
        s.width = sj.value("width", s.width);
        s.pixel_size = sj.value("pixel_size", s.pixel_size);
        s.density = sj.value("density", s.density);
        s.crown_radius_min = sj.value("crown_radius_min", s.crown_radius_min);
        s.crown_radius_max = sj.value("crown_radius_max", s.crown_radius_max);
        s.overlap_probability = sj.value("overlap_probability", s.overlap_probability);
        if (sj.contains("noise_sigma") && sj["noise_sigma"].is_array()) {
            for (int k = 0; k < 3; ++k) s.noise_sigma[static_cast<size_t>(k)] = sj["noise_sigma"][k].get<double>();
        }
        s.blur_sigma = sj.value("blur_sigma", s.blur_sigma);
        s.heatmap_sigma = sj.value("heatmap_sigma", s.heatmap_sigma);
        s.seed = sj.value("seed", s.seed);
        ce.spec = s;
        out.push_back(std::move(ce));
    }
    return out;
}

}  // namespace deadwood
