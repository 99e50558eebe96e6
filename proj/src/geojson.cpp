#include "deadwood/geojson.hpp"

#include <fstream>

#include <json.hpp>

namespace deadwood {

using nlohmann::json;

namespace {

Ring parse_ring(const json& coords, const std::string& path) {
    Ring ring;
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2) {
            throw FormatError("bad coordinate in " + path);
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    if (ring.size() < 4) throw ValidationError("polygon ring with fewer than 4 positions in " + path);
    if (ring.front().x != ring.back().x || ring.front().y != ring.back().y) {
        throw ValidationError("unclosed polygon ring in " + path);
    }
    return ring;
}

}  // namespace

std::vector<Annotation> read_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed GeoJSON in " + path + ": " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection") {
        throw FormatError("expected FeatureCollection in " + path);
    }

    std::vector<Annotation> out;
    for (const auto& feature : doc.value("features", json::array())) {
        const auto& geom = feature.at("geometry");
        const std::string type = geom.value("type", "");
        if (type != "Polygon") {
            throw UnsupportedGeometryError("unsupported geometry '" + type + "' in " + path);
        }
        Annotation ann;
        for (const auto& ring_coords : geom.at("coordinates")) {
            ann.polygon.rings.push_back(parse_ring(ring_coords, path));
        }
        if (ann.polygon.empty()) throw ValidationError("empty polygon in " + path);

        if (feature.contains("properties") && feature["properties"].is_object() &&
            feature["properties"].contains("centroid")) {
            const auto& c = feature["properties"]["centroid"];
            if (!c.is_array() || c.size() != 2) {
                throw FormatError("centroid property must be [x, y] in " + path);
            }
            ann.centroid = {c[0].get<double>(), c[1].get<double>()};
            ann.centroid_from_file = true;
        } else {
            ann.centroid = polygon_centroid(ann.polygon);
        }
        out.push_back(std::move(ann));
    }
    return out;
}

void write_instances_geojson(const InstanceSet& instances, int crs_epsg,
                             const std::string& path) {
    json doc;
    doc["type"] = "FeatureCollection";
    doc["crs_epsg"] = crs_epsg;
    json features = json::array();
    for (const InstanceFeature& inst : instances) {
        json coords = json::array();
        for (const Point2d& v : inst.polygon) coords.push_back({v.x, v.y});
        json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", json::array({coords})}};
        f["properties"] = {
            {"id", inst.id},
            {"centroid", {inst.centroid_map.x, inst.centroid_map.y}},
            {"centroid_px", {inst.centroid_px.x, inst.centroid_px.y}},
            {"area_px", inst.area_px},
            {"area_map", inst.area_map},
            {"compactness", inst.compactness},
        };
        features.push_back(std::move(f));
    }
    doc["features"] = std::move(features);

    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << doc.dump(2) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace deadwood
