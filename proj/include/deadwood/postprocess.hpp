#pragma once

#include <string>
#include <vector>

#include "deadwood/geojson.hpp"
#include "deadwood/image_ops.hpp"
#include "deadwood/raster.hpp"

namespace deadwood {

enum class PeakMetric { Euclidean, Chebyshev };

struct StageFlags {
    bool filtering = true;         // min-area connected-component filtering
    bool hybrid_filtering = true;  // boundary-cue region suppression
    bool watershed = true;         // marker-controlled watershed split
};

struct PipelineConfig {
    double seg_threshold = 0.5;
    int min_area = 16;
    double boundary_threshold = -0.5;
    double boundary_presence_fraction = 0.05;
    double smooth_sigma = 2.0;
    double peak_min_distance = 5.0;
    double peak_min_intensity = 0.1;
    int connectivity = 8;
    PeakMetric peak_metric = PeakMetric::Euclidean;
    StageFlags stages;

    void validate() const;
    static PipelineConfig from_json_file(const std::string& path);
    std::string to_json() const;

    // Table-style presets: raw (all off), filter, watershed, final (all on).
    static StageFlags stages_from_name(const std::string& name);
};

struct Marker {
    int row = 0;
    int col = 0;
    float intensity = 0.0f;
};
using MarkerSet = std::vector<Marker>;

// pixel = 1 iff seg_prob >= seg_threshold and its connected component has
// area >= min_area.
ByteGrid threshold_and_filter(const FloatGrid& seg_prob, const PipelineConfig& cfg);

ByteGrid threshold_only(const FloatGrid& seg_prob, double seg_threshold);

// Region-level suppression: a connected region of `mask` is kept iff the
// fraction of its boundary pixels lying within a 1-pixel dilation of
// {hybrid <= boundary_threshold} reaches boundary_presence_fraction and is
// nonzero. Regions with no boundary signal at all are always suppressed.
ByteGrid hybrid_filter(const ByteGrid& mask, const FloatGrid& hybrid_map,
                       const PipelineConfig& cfg);

// Gaussian-smooth with smooth_sigma, keep masked local maxima above
// peak_min_intensity, then greedy non-maximum suppression: candidates sorted
// by (intensity desc, row, col), accepted if at least peak_min_distance from
// every previously accepted marker.
MarkerSet extract_markers(const FloatGrid& centroid_map, const ByteGrid& mask,
                          const PipelineConfig& cfg);

// Marker-controlled watershed by priority flooding. Seeds are pushed in
// marker order and labeled 1..K; queue entries pop in ascending
// (elevation, insertion-sequence); every masked pixel takes the label of the
// flood that reaches it first. Neighbor expansion order is row-major over the
// connectivity offsets, which together with the insertion sequence fixes all
// ties. Markers outside the mask are discarded and counted.
InstanceMap watershed_segment(const ByteGrid& mask, const MarkerSet& markers,
                              const FloatGrid& elevation, int connectivity = 8,
                              int* discarded = nullptr);

enum class VectorizeMode { Contour, Ellipse };

// Contour mode traces the outer pixel-edge ring (shoelace area == pixel count
// for solid instances); ellipse mode fits center and axes from first and
// second pixel moments and emits a sampled ellipse ring.
InstanceSet vectorize(const InstanceMap& instances, const GeoTransform& geo,
                      VectorizeMode mode);

struct PipelineResult {
    InstanceMap labels;
    InstanceSet instances;
    int discarded_markers = 0;
};

// Channels ordered (segmentation probability, centroid, hybrid). Stage flags
// in cfg select the ablation configuration; with everything disabled the
// result is the raw connected components of the thresholded mask.
PipelineResult run_pipeline(const MultiChannelRaster& pred_stack,
                            const PipelineConfig& cfg,
                            VectorizeMode mode = VectorizeMode::Contour);

}  // namespace deadwood
