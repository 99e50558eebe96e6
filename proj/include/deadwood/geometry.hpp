#pragma once

#include <vector>

#include "deadwood/common.hpp"

namespace deadwood {

// Closed ring: first vertex equals last vertex. Vertices in map units
// unless a function says otherwise.
using Ring = std::vector<Point2d>;

// Ring 0 is the exterior; any further rings are holes.
struct Polygon {
    std::vector<Ring> rings;

    const Ring& exterior() const { return rings.front(); }
    bool empty() const { return rings.empty() || rings.front().size() < 4; }
};

// Ensures first == last, throws ValidationError if the ring has < 3 distinct
// vertices.
Ring close_ring(std::vector<Point2d> pts);

double ring_signed_area(const Ring& r);
double ring_perimeter(const Ring& r);

// Area-weighted centroid of exterior minus holes.
Point2d polygon_centroid(const Polygon& p);
double polygon_area(const Polygon& p);
double polygon_perimeter(const Polygon& p);  // exterior ring only

// Bounding box of the exterior ring.
struct Box2d {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};
Box2d polygon_bounds(const Polygon& p);

}  // namespace deadwood
