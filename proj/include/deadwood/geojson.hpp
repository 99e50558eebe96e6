#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deadwood/geometry.hpp"

namespace deadwood {

struct Annotation {
    Polygon polygon;            // map units
    Point2d centroid;           // map units; polygon centroid when absent in file
    bool centroid_from_file = false;
};

// GeoJSON FeatureCollection of Polygon features. A feature may carry a
// "centroid": [x, y] property; otherwise the area-weighted polygon centroid
// is used. Non-polygon geometries and unclosed rings are rejected.
std::vector<Annotation> read_annotations(const std::string& path);

struct InstanceFeature {
    int id = 0;
    Ring polygon;          // map units, closed
    Point2d centroid_px;   // pixel-index units (x = col, y = row)
    Point2d centroid_map;
    double area_px = 0.0;
    double area_map = 0.0;
    double compactness = 0.0;
};

using InstanceSet = std::vector<InstanceFeature>;

void write_instances_geojson(const InstanceSet& instances, int crs_epsg,
                             const std::string& path);

}  // namespace deadwood
