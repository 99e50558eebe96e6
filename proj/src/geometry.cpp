#include "deadwood/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace deadwood {

Ring close_ring(std::vector<Point2d> pts) {
    if (!pts.empty() && (pts.front().x != pts.back().x || pts.front().y != pts.back().y)) {
        pts.push_back(pts.front());
    }
    if (pts.size() < 4) throw ValidationError("ring needs at least 3 distinct vertices");
    return pts;
}

double ring_signed_area(const Ring& r) {
    double a = 0.0;
    for (size_t i = 0; i + 1 < r.size(); ++i) {
        a += r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
    }
    return 0.5 * a;
}

double ring_perimeter(const Ring& r) {
    double p = 0.0;
    for (size_t i = 0; i + 1 < r.size(); ++i) {
        p += std::hypot(r[i + 1].x - r[i].x, r[i + 1].y - r[i].y);
    }
    return p;
}

namespace {

// Signed area and area-weighted centroid accumulator for one ring.
void ring_centroid_terms(const Ring& r, double& area, double& cx, double& cy) {
    area = 0.0;
    cx = 0.0;
    cy = 0.0;
    for (size_t i = 0; i + 1 < r.size(); ++i) {
        const double cross = r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
        area += cross;
        cx += (r[i].x + r[i + 1].x) * cross;
        cy += (r[i].y + r[i + 1].y) * cross;
    }
    area *= 0.5;
    cx /= 6.0;
    cy /= 6.0;
}

}  // namespace

Point2d polygon_centroid(const Polygon& p) {
    if (p.empty()) throw ValidationError("centroid of an empty polygon");
    double total_area = 0.0, total_cx = 0.0, total_cy = 0.0;
    for (size_t k = 0; k < p.rings.size(); ++k) {
        double a, cx, cy;
        ring_centroid_terms(p.rings[k], a, cx, cy);
        // Normalize orientation: exterior contributes positive area, holes negative.
        double sign = (k == 0) ? (a < 0 ? -1.0 : 1.0) : (a > 0 ? -1.0 : 1.0);
        total_area += sign * a;
        total_cx += sign * cx;
        total_cy += sign * cy;
    }
    if (total_area == 0.0) throw ValidationError("degenerate polygon: zero area");
    return {total_cx / total_area, total_cy / total_area};
}

double polygon_area(const Polygon& p) {
    if (p.empty()) return 0.0;
    double total = std::abs(ring_signed_area(p.rings[0]));
    for (size_t k = 1; k < p.rings.size(); ++k) {
        total -= std::abs(ring_signed_area(p.rings[k]));
    }
    return total;
}

double polygon_perimeter(const Polygon& p) {
    if (p.empty()) return 0.0;
    return ring_perimeter(p.exterior());
}

Box2d polygon_bounds(const Polygon& p) {
    Box2d b;
    if (p.empty()) return b;
    const Ring& r = p.exterior();
    b.min_x = b.max_x = r[0].x;
    b.min_y = b.max_y = r[0].y;
    for (const Point2d& v : r) {
        b.min_x = std::min(b.min_x, v.x);
        b.max_x = std::max(b.max_x, v.x);
        b.min_y = std::min(b.min_y, v.y);
        b.max_y = std::max(b.max_y, v.y);
    }
    return b;
}

}  // namespace deadwood
