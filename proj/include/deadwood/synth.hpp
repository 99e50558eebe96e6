#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deadwood/geojson.hpp"
#include "deadwood/targets.hpp"

namespace deadwood {

struct SceneSpec {
    int height = 512;
    int width = 512;
    double pixel_size = 0.25;          // m/pixel; density is per hectare
    double density = 2.0;              // expected trees per hectare
    double crown_radius_min = 6.0;     // pixels
    double crown_radius_max = 14.0;
    double overlap_probability = 0.0;
    std::array<double, 3> noise_sigma{0.0, 0.0, 0.0};
    double blur_sigma = 0.0;
    double heatmap_sigma = 3.0;
    uint64_t seed = 0;

    void validate() const;
    static SceneSpec from_json_file(const std::string& path);
    std::string to_json() const;
};

struct Scene {
    std::vector<Annotation> annotations;
    TargetStack target;
    MultiChannelRaster pred;  // corrupted copy of the target stack
};

// Crowns are perturbed ellipses placed by dart throwing with per-tree
// overlap permission; the prediction stack is the target stack after
// per-channel blur + Gaussian noise, clamped to the channel's range.
// Deterministic in (spec, seed); single-threaded by contract.
Scene generate_scene(const SceneSpec& spec);

struct CorpusEntry {
    std::string dir;
    SceneSpec spec;
};

// Writes annotations.geojson, target.rast, pred.rast, instances.rast per
// scene plus manifest.json at the corpus root. Returns the manifest path.
std::string write_corpus(const std::vector<SceneSpec>& specs, const std::string& out_dir);

std::vector<CorpusEntry> read_corpus_manifest(const std::string& manifest_path);

}  // namespace deadwood
