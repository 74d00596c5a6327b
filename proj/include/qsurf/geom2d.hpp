#pragma once

// Small 2D vector/polygon toolkit shared by the geometry builder, the
// mesher and the field post-processing. Lengths are in nanometres
// throughout the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "qsurf/detail/predicates.hpp"

namespace qsurf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
    bool operator<(const Vec2& o) const {
        return x < o.x || (x == o.x && y < o.y);
    }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double norm2(const Vec2& a) { return a.x * a.x + a.y * a.y; }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }
inline Vec2 normalized(const Vec2& a) {
    const double n = norm(a);
    return n > 0 ? a / n : Vec2{0, 0};
}
inline Vec2 perp(const Vec2& a) { return {-a.y, a.x}; }  // +90 degrees

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return detail::orient2d(a.x, a.y, b.x, b.y, c.x, c.y);
}
inline int in_circle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    return detail::incircle(a.x, a.y, b.x, b.y, c.x, c.y, d.x, d.y);
}

using Polyline = std::vector<Vec2>;

// Signed area, positive for counterclockwise rings.
inline double polygon_area(const Polyline& poly) {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += cross(p, q);
    }
    return 0.5 * a;
}

inline double polyline_length(const Polyline& p) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) s += dist(p[i], p[i + 1]);
    return s;
}

inline double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double l2 = norm2(ab);
    if (l2 == 0.0) return dist(p, a);
    const double t = std::clamp(dot(p - a, ab) / l2, 0.0, 1.0);
    return dist(p, a + t * ab);
}

// Even-odd test; points exactly on the boundary may land on either side.
inline bool point_in_polygon(const Vec2& p, const Polyline& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

// Proper + improper segment intersection, exact predicates. Shared
// endpoints do not count as an intersection.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                               const Vec2& d) {
    if (a == c || a == d || b == c || b == d) return false;
    const int d1 = orient(c, d, a);
    const int d2 = orient(c, d, b);
    const int d3 = orient(a, b, c);
    const int d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

inline bool polygon_is_simple(const Polyline& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if (a == b) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2& c = poly[j];
            const Vec2& d = poly[(j + 1) % n];
            const bool adjacent =
                (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

// One-sided Hausdorff distance from polyline a to polyline b.
inline double hausdorff_one_sided(const Polyline& a, const Polyline& b) {
    double h = 0.0;
    for (const Vec2& p : a) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < b.size(); ++i)
            dmin = std::min(dmin, dist_point_segment(p, b[i], b[i + 1]));
        if (b.size() == 1) dmin = dist(p, b[0]);
        h = std::max(h, dmin);
    }
    return h;
}

inline double hausdorff(const Polyline& a, const Polyline& b) {
    return std::max(hausdorff_one_sided(a, b), hausdorff_one_sided(b, a));
}

// Interior angle at vertex b of triangle (a, b, c), radians.
inline double angle_at(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 u = a - b;
    const Vec2 v = c - b;
    const double d = std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0);
    return std::acos(d);
}

inline double triangle_min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::min({angle_at(c, a, b), angle_at(a, b, c), angle_at(b, c, a)});
}

inline double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * cross(b - a, c - a);
}

inline Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ab = b - a;
    const Vec2 ac = c - a;
    const double d = 2.0 * cross(ab, ac);
    const double ab2 = norm2(ab);
    const double ac2 = norm2(ac);
    return {a.x + (ac.y * ab2 - ab.y * ac2) / d,
            a.y + (ab.x * ac2 - ac.x * ab2) / d};
}

}  // namespace qsurf
