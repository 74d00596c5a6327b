#pragma once

// Conforming, material-respecting triangular meshing of a CrossSection:
//  * thin oxide strips are pre-split into two structured element layers
//    (aspect-capped), independent of the Delaunay behaviour;
//  * every other region is meshed by constrained Delaunay triangulation with
//    size-field-driven interior refinement and smart-Laplacian smoothing;
//  * neighbouring regions conform exactly because every shared boundary
//    segment is subdivided once, in a global registry, and reused.
// Adaptation is longest-edge (Rivara) bisection with conformity closure, so
// children nest inside their parents.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <vector>

#include "qsurf/detail/delaunay.hpp"
#include "qsurf/errors.hpp"
#include "qsurf/geometry.hpp"

namespace qsurf {

struct SizeField {
    double h_min = 1.0;   // nm
    double h_max = 100.0; // nm
    double grading = 1.3; // growth rate per unit distance
    std::vector<Vec2> attractor_points;
    std::vector<std::pair<Vec2, Vec2>> attractor_edges;

    void validate() const {
        if (!(h_min > 0 && h_min <= h_max))
            throw ValidationError("size field: need 0 < h_min <= h_max");
        if (!(grading > 1.0 && grading <= 2.0))
            throw ValidationError("size field: need 1 < grading <= 2");
    }

    double cutoff_dist() const { return (h_max - h_min) / grading; }

    double eval(const Vec2& p) const {
        if (attractor_points.empty() && attractor_edges.empty()) return h_max;
        const double dcap = cutoff_dist();
        if (bbox_valid_) {
            const double dx = std::max({bb_lo_.x - p.x, 0.0, p.x - bb_hi_.x});
            const double dy = std::max({bb_lo_.y - p.y, 0.0, p.y - bb_hi_.y});
            if (dx * dx + dy * dy >= dcap * dcap) return h_max;
        }
        double d = std::numeric_limits<double>::infinity();
        for (const Vec2& a : attractor_points) d = std::min(d, dist(p, a));
        for (const auto& [a, b] : attractor_edges)
            d = std::min(d, dist_point_segment(p, a, b));
        return std::min(h_max, h_min + grading * d);
    }

    void finalize() {
        bb_lo_ = {1e300, 1e300};
        bb_hi_ = {-1e300, -1e300};
        auto grow = [&](const Vec2& v) {
            bb_lo_.x = std::min(bb_lo_.x, v.x);
            bb_lo_.y = std::min(bb_lo_.y, v.y);
            bb_hi_.x = std::max(bb_hi_.x, v.x);
            bb_hi_.y = std::max(bb_hi_.y, v.y);
        };
        for (const Vec2& a : attractor_points) grow(a);
        for (const auto& [a, b] : attractor_edges) {
            grow(a);
            grow(b);
        }
        bbox_valid_ = !(attractor_points.empty() && attractor_edges.empty());
    }

private:
    Vec2 bb_lo_, bb_hi_;
    bool bbox_valid_ = false;
};

// Default seeding: dense toward the pad-edge profile and corners, where the
// electrostatic field concentrates.
inline SizeField default_size_field(const CrossSection& cs) {
    const GeometryParams& g = cs.params;
    SizeField sf;
    const double dh_min =
        std::min(g.dh_top_nm() > 0 ? g.dh_top_nm() : 1e300,
                 g.dh_side_nm() > 0 ? g.dh_side_nm() : 1e300);
    sf.h_min = dh_min < 1e300 ? std::max(1.0, dh_min / 3.0)
                              : std::max(1.0, g.film_thickness / 40.0);
    sf.h_max = g.gap_nm() / 40.0;
    sf.grading = 1.3;

    for (const CornerMarker& m : cs.corner_markers)
        sf.attractor_points.push_back(m.point);
    // profile surfaces near the corners, clipped to a window around the
    // markers so long pad faces do not drag h_min across the whole box
    const double window = std::min(3000.0, 0.45 * g.gap_nm());
    auto on_box = [&](const Vec2& a, const Vec2& b) {
        return (a.x == cs.box_lo.x && b.x == cs.box_lo.x) ||
               (a.x == cs.box_hi.x && b.x == cs.box_hi.x) ||
               (a.y == cs.box_lo.y && b.y == cs.box_lo.y) ||
               (a.y == cs.box_hi.y && b.y == cs.box_hi.y);
    };
    auto clip_to_window = [&](const Vec2& a, const Vec2& b,
                              std::vector<std::pair<Vec2, Vec2>>& out) {
        const Vec2 d = b - a;
        const double len2 = norm2(d);
        if (len2 == 0) return;
        std::vector<std::pair<double, double>> ivals;
        for (const CornerMarker& m : cs.corner_markers) {
            const Vec2 am = a - m.point;
            // |am + t d|^2 = window^2
            const double A = len2;
            const double B = 2.0 * dot(am, d);
            const double C = norm2(am) - window * window;
            const double disc = B * B - 4 * A * C;
            if (disc <= 0) continue;
            const double sq = std::sqrt(disc);
            const double t0 = std::max(0.0, (-B - sq) / (2 * A));
            const double t1 = std::min(1.0, (-B + sq) / (2 * A));
            if (t0 < t1) ivals.push_back({t0, t1});
        }
        if (ivals.empty()) return;
        std::sort(ivals.begin(), ivals.end());
        double lo = ivals[0].first, hi = ivals[0].second;
        auto emit = [&](double t0, double t1) {
            out.push_back({a + t0 * d, a + t1 * d});
        };
        for (std::size_t i = 1; i < ivals.size(); ++i) {
            if (ivals[i].first <= hi) {
                hi = std::max(hi, ivals[i].second);
            } else {
                emit(lo, hi);
                lo = ivals[i].first;
                hi = ivals[i].second;
            }
        }
        emit(lo, hi);
    };
    std::set<std::pair<std::pair<double, double>, std::pair<double, double>>> seen;
    for (const Region& r : cs.regions) {
        if (r.material == Material::substrate || r.material == Material::vacuum)
            continue;  // metal and oxide boundaries drive the field
        const std::size_t n = r.polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = r.polygon[i];
            const Vec2& b = r.polygon[(i + 1) % n];
            if (on_box(a, b)) continue;
            auto k = std::minmax(std::make_pair(a.x, a.y), std::make_pair(b.x, b.y));
            if (!seen.insert({k.first, k.second}).second) continue;
            clip_to_window(a, b, sf.attractor_edges);
        }
    }
    sf.finalize();
    return sf;
}

// ---------------------------------------------------------------------------

struct Mesh {
    struct Tri {
        std::array<int, 3> v;
        int region = 0;
    };
    struct BEdge {
        int a, b;
        BoundaryTag tag;
        FaceKind face = FaceKind::none;
    };

    std::vector<Vec2> nodes;
    std::vector<Tri> triangles;
    std::vector<BEdge> boundary_edges;
    int generation = 0;

    std::vector<Material> region_materials;  // by region id
    std::vector<double> region_eps;          // by region id
    std::vector<int> region_electrode;       // -1/0/1 by region id

    double triangle_area_of(const Tri& t) const {
        return triangle_area(nodes[t.v[0]], nodes[t.v[1]], nodes[t.v[2]]);
    }
};

struct MeshQuality {
    double min_angle_deg = 0;
    double max_aspect = 0;  // longest/shortest edge
    std::size_t elements = 0;
    std::map<Material, std::size_t> per_region;
};

inline MeshQuality mesh_quality(const Mesh& m) {
    MeshQuality q;
    q.min_angle_deg = 180.0;
    q.elements = m.triangles.size();
    for (const Mesh::Tri& t : m.triangles) {
        const Vec2& a = m.nodes[t.v[0]];
        const Vec2& b = m.nodes[t.v[1]];
        const Vec2& c = m.nodes[t.v[2]];
        q.min_angle_deg =
            std::min(q.min_angle_deg, rad2deg(triangle_min_angle(a, b, c)));
        const double e0 = dist(a, b), e1 = dist(b, c), e2 = dist(c, a);
        q.max_aspect = std::max(
            q.max_aspect, std::max({e0, e1, e2}) / std::min({e0, e1, e2}));
        q.per_region[m.region_materials[t.region]] += 1;
    }
    return q;
}

namespace detail {

using SegKey = std::pair<std::pair<double, double>, std::pair<double, double>>;

inline SegKey seg_key(const Vec2& a, const Vec2& b) {
    auto pa = std::make_pair(a.x, a.y);
    auto pb = std::make_pair(b.x, b.y);
    return pa < pb ? SegKey{pa, pb} : SegKey{pb, pa};
}

// Global registry of boundary-segment subdivisions: interior points ordered
// from the key's first endpoint to its second.
struct SegmentRegistry {
    std::map<SegKey, std::vector<Vec2>> sub;

    bool has(const Vec2& a, const Vec2& b) const {
        return sub.count(seg_key(a, b)) > 0;
    }

    void put(const Vec2& a, const Vec2& b, std::vector<Vec2> pts) {
        const SegKey k = seg_key(a, b);
        if (std::make_pair(a.x, a.y) != k.first)
            std::reverse(pts.begin(), pts.end());
        sub[k] = std::move(pts);
    }

    // Insert a single split point into an existing (or new) subdivision.
    void insert_point(const Vec2& a, const Vec2& b, const Vec2& p) {
        if (p == a || p == b) return;
        const SegKey k = seg_key(a, b);
        auto& v = sub[k];
        for (const Vec2& q : v)
            if (q == p) return;
        v.push_back(p);
        const Vec2 origin{k.first.first, k.first.second};
        std::sort(v.begin(), v.end(), [&](const Vec2& x, const Vec2& y) {
            return norm2(x - origin) < norm2(y - origin);
        });
    }

    std::vector<Vec2> chain(const Vec2& a, const Vec2& b) const {
        std::vector<Vec2> out{a};
        const auto it = sub.find(seg_key(a, b));
        if (it != sub.end()) {
            std::vector<Vec2> mid = it->second;
            if (std::make_pair(a.x, a.y) != it->first.first)
                std::reverse(mid.begin(), mid.end());
            out.insert(out.end(), mid.begin(), mid.end());
        }
        out.push_back(b);
        return out;
    }
};

inline std::vector<Vec2> subdivide_even(const Vec2& a, const Vec2& b, int n) {
    std::vector<Vec2> out;
    for (int k = 1; k < n; ++k)
        out.push_back(a + (double(k) / n) * (b - a));
    return out;
}

// Graded subdivision: interior fractions of [a,b] stepped by the local size
// target (probed ahead so steps do not overshoot into finer zones).
template <typename H>
std::vector<double> graded_fractions(const Vec2& a, const Vec2& b,
                                     double ref_len, H&& h) {
    std::vector<double> fs;
    if (ref_len <= 0) return fs;
    double t = 0.0;
    for (int guard = 0; guard < 2000000; ++guard) {
        double ht = h(a + t * (b - a));
        ht = std::min(ht, h(a + std::min(1.0, t + 0.5 * ht / ref_len) * (b - a)));
        ht = std::min(ht, h(a + std::min(1.0, t + ht / ref_len) * (b - a)));
        const double step = std::max(ht / ref_len, 1e-9);
        if (t + step >= 1.0 - 1e-12) break;
        t += step;
        fs.push_back(t);
    }
    if (!fs.empty()) {
        const double last_int = 1.0 - fs.back();
        const double prev_int =
            fs.size() >= 2 ? fs.back() - fs[fs.size() - 2] : fs.back();
        if (last_int < 0.5 * prev_int) fs.pop_back();
    }
    return fs;
}

// Deterministic ear clipping for small simple polygons (junction columns).
inline std::vector<std::array<Vec2, 3>> ear_clip(std::vector<Vec2> poly) {
    std::vector<std::array<Vec2, 3>> out;
    if (polygon_area(poly) < 0) std::reverse(poly.begin(), poly.end());
    std::size_t guard = 0;
    while (poly.size() > 3 && guard++ < 10000) {
        bool clipped = false;
        // prefer the ear with the best min-angle
        double best = -1;
        std::size_t best_i = 0;
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = poly[(i + n - 1) % n];
            const Vec2& b = poly[i];
            const Vec2& c = poly[(i + 1) % n];
            if (orient(a, b, c) <= 0) continue;
            bool ok = true;
            for (std::size_t j = 0; j < n && ok; ++j) {
                if (j == i || j == (i + n - 1) % n || j == (i + 1) % n) continue;
                const Vec2& p = poly[j];
                if (orient(a, b, p) >= 0 && orient(b, c, p) >= 0 &&
                    orient(c, a, p) >= 0)
                    ok = false;
            }
            if (!ok) continue;
            const double ang = triangle_min_angle(a, b, c);
            if (ang > best) {
                best = ang;
                best_i = i;
            }
        }
        if (best < 0) break;
        const std::size_t i = best_i;
        out.push_back({poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]});
        poly.erase(poly.begin() + (long)i);
        clipped = true;
        (void)clipped;
    }
    if (poly.size() == 3) out.push_back({poly[0], poly[1], poly[2]});
    return out;
}

struct RegionTris {
    std::vector<std::array<Vec2, 3>> tris;
};

struct StripPrep {
    const OxideStrip* strip = nullptr;
    std::vector<Vec2> I, O, M;  // paired chains, M = midline
};

// Chain along a straight cap from `from` to `to`: polygon corner vertices
// lying on it plus all registry subdivision points of its atomic segments.
inline std::vector<Vec2> cap_chain(const Vec2& from, const Vec2& to,
                                   const SegmentRegistry& reg,
                                   const std::vector<Polyline>& all_polygons) {
    std::vector<Vec2> corners;
    const double len = dist(from, to);
    for (const Polyline& poly : all_polygons)
        for (const Vec2& v : poly) {
            if (v == from || v == to) continue;
            if (dist_point_segment(v, from, to) < 1e-9 && dist(v, from) < len &&
                dist(v, to) < len)
                corners.push_back(v);
        }
    std::sort(corners.begin(), corners.end(), [&](const Vec2& x, const Vec2& y) {
        return norm2(x - from) < norm2(y - from);
    });
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
    std::vector<Vec2> atoms{from};
    for (const Vec2& c : corners) atoms.push_back(c);
    atoms.push_back(to);
    std::vector<Vec2> chain;
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
        auto c = reg.chain(atoms[i], atoms[i + 1]);
        for (std::size_t k = 0; k + 1 < c.size(); ++k) chain.push_back(c[k]);
    }
    chain.push_back(to);
    return chain;
}

// Phase A: subdivide the strip longitudinally (publishing shared chains) and
// register the midline's end points on the caps.
inline StripPrep prepare_strip(const OxideStrip& strip, const SizeField& sf,
                               SegmentRegistry& reg,
                               const std::vector<Polyline>& all_polygons) {
    const double layer = strip.thickness / 2.0;
    const double aspect_cap = 3.0;

    StripPrep prep;
    prep.strip = &strip;
    prep.I = {strip.inner.front()};
    prep.O = {strip.outer.front()};
    for (std::size_t s = 0; s + 1 < strip.inner.size(); ++s) {
        const Vec2 ia = strip.inner[s], ib = strip.inner[s + 1];
        const Vec2 oa = strip.outer[s], ob = strip.outer[s + 1];
        const double len = std::max(dist(ia, ib), dist(oa, ob));
        if (len == 0) continue;
        auto h_here = [&](const Vec2& p) {
            return std::min(sf.eval(p), aspect_cap * layer);
        };
        const Vec2 mida = 0.5 * (ia + oa);
        const Vec2 midb = 0.5 * (ib + ob);
        const auto fs = graded_fractions(mida, midb, len, h_here);
        std::vector<Vec2> isub, osub;
        for (double f : fs) {
            prep.I.push_back(ia + f * (ib - ia));
            prep.O.push_back(oa + f * (ob - oa));
            isub.push_back(prep.I.back());
            osub.push_back(prep.O.back());
        }
        prep.I.push_back(ib);
        prep.O.push_back(ob);
        if (!(ia == ib) && !reg.has(ia, ib)) reg.put(ia, ib, std::move(isub));
        if (!(oa == ob) && !reg.has(oa, ob)) reg.put(oa, ob, std::move(osub));
    }
    if (prep.I.size() < 2) throw MeshFailure("strip chain degenerate");
    prep.M.resize(prep.I.size());
    for (std::size_t k = 0; k < prep.I.size(); ++k)
        prep.M[k] = 0.5 * (prep.I[k] + prep.O[k]);

    // register midline end points on the caps' atomic segments
    auto register_mid = [&](const Vec2& from, const Vec2& to, const Vec2& mid) {
        if (mid == from || mid == to) return;
        std::vector<Vec2> corners{from};
        const double len = dist(from, to);
        for (const Polyline& poly : all_polygons)
            for (const Vec2& v : poly) {
                if (v == from || v == to) continue;
                if (dist_point_segment(v, from, to) < 1e-9 &&
                    dist(v, from) < len && dist(v, to) < len)
                    corners.push_back(v);
            }
        corners.push_back(to);
        std::sort(corners.begin(), corners.end(),
                  [&](const Vec2& x, const Vec2& y) {
                      return norm2(x - from) < norm2(y - from);
                  });
        corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
        for (std::size_t i = 0; i + 1 < corners.size(); ++i) {
            const Vec2& a = corners[i];
            const Vec2& b = corners[i + 1];
            if (mid == a || mid == b) return;
            if (dist_point_segment(mid, a, b) < 1e-9 &&
                dist(mid, a) < dist(a, b) && dist(mid, b) < dist(a, b)) {
                reg.insert_point(a, b, mid);
                return;
            }
        }
    };
    register_mid(prep.I.front(), prep.O.front(), prep.M.front());
    register_mid(prep.I.back(), prep.O.back(), prep.M.back());
    return prep;
}

// Phase B: emit the two structured layers; junction columns with decorated
// caps are ear-clipped against the final cap chains.
inline RegionTris emit_strip(const StripPrep& prep, const SegmentRegistry& reg,
                             const std::vector<Polyline>& all_polygons) {
    const auto& I = prep.I;
    const auto& O = prep.O;
    const auto& M = prep.M;
    const std::size_t K = I.size();

    const std::vector<Vec2> cap_front =
        cap_chain(I.front(), O.front(), reg, all_polygons);
    const std::vector<Vec2> cap_back =
        cap_chain(I.back(), O.back(), reg, all_polygons);

    RegionTris out;
    auto emit_quad = [&](const Vec2& a, const Vec2& b, const Vec2& c,
                         const Vec2& d) {
        // (a,b) along one chain, (d,c) along the next; split on the shorter
        // diagonal, ties toward (a,c)
        if (dist(a, b) == 0) {
            if (triangle_area(a, c, d) != 0) out.tris.push_back({a, c, d});
            return;
        }
        if (dist(c, d) == 0) {
            if (triangle_area(a, b, c) != 0) out.tris.push_back({a, b, c});
            return;
        }
        if (dist(a, c) <= dist(b, d)) {
            out.tris.push_back({a, b, c});
            out.tris.push_back({a, c, d});
        } else {
            out.tris.push_back({a, b, d});
            out.tris.push_back({b, c, d});
        }
    };

    const bool plain_front = cap_front.size() == 3;
    const bool plain_back = cap_back.size() == 3;
    if ((!plain_front || !plain_back) && K < 3) {
        std::vector<Vec2> poly;
        for (auto it = cap_front.rbegin(); it != cap_front.rend(); ++it)
            poly.push_back(*it);  // O_0 .. I_0
        poly.push_back(I.back());
        for (std::size_t i = 1; i + 1 < cap_back.size(); ++i)
            poly.push_back(cap_back[i]);
        poly.push_back(O.back());
        std::vector<Vec2> d;
        for (const Vec2& v : poly)
            if (d.empty() || !(d.back() == v)) d.push_back(v);
        if (d.size() > 1 && d.front() == d.back()) d.pop_back();
        if (d.size() >= 3)
            for (auto& t : ear_clip(d)) out.tris.push_back(t);
        return out;
    }
    const std::size_t k0 = plain_front ? 0 : 1;
    const std::size_t k1 = plain_back ? K - 1 : K - 2;
    for (std::size_t k = k0; k + 1 <= k1; ++k) {
        emit_quad(I[k], I[k + 1], M[k + 1], M[k]);
        emit_quad(M[k], M[k + 1], O[k + 1], O[k]);
    }
    auto column_poly = [&](bool front) {
        std::vector<Vec2> poly;
        if (front) {
            for (auto it = cap_front.rbegin(); it != cap_front.rend(); ++it)
                poly.push_back(*it);  // O_0 .. I_0 down the cap
            poly.push_back(I[1]);
            poly.push_back(M[1]);
            poly.push_back(O[1]);
        } else {
            poly.push_back(I[K - 2]);
            poly.push_back(I[K - 1]);
            for (std::size_t i = 1; i + 1 < cap_back.size(); ++i)
                poly.push_back(cap_back[i]);
            poly.push_back(O[K - 1]);
            poly.push_back(O[K - 2]);
            poly.push_back(M[K - 2]);
        }
        std::vector<Vec2> d;
        for (const Vec2& v : poly)
            if (d.empty() || !(d.back() == v)) d.push_back(v);
        if (d.size() > 1 && d.front() == d.back()) d.pop_back();
        return d;
    };
    if (!plain_front)
        for (auto& t : ear_clip(column_poly(true))) out.tris.push_back(t);
    if (!plain_back)
        for (auto& t : ear_clip(column_poly(false))) out.tris.push_back(t);
    return out;
}

// CDT + refinement + smoothing of one polygonal region.
inline RegionTris mesh_cdt_region(const std::vector<Vec2>& chain,
                                  const SizeField& sf, double quality_deg) {
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const Vec2& p : chain) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    Delaunay d(lo, hi);
    std::vector<int> ids;
    ids.reserve(chain.size());
    int hint = -1;
    for (const Vec2& p : chain) {
        const int id = d.insert(p, hint);
        if (id < 0) throw MeshFailure("boundary point rejected");
        ids.push_back(id);
        hint = d.vertex_triangle(id);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int a = ids[i];
        const int b = ids[(i + 1) % ids.size()];
        if (a != b) d.constrain(a, b);
    }
    d.carve_outside();
    d.delaunay_pass();

    // size + quality driven refinement
    const double qmin = deg2rad(quality_deg);
    for (int pass = 0; pass < 40; ++pass) {
        struct Bad {
            double score;
            double cx, cy;
            int t;
        };
        std::vector<Bad> bad;
        for (std::size_t t = 0; t < d.tris.size(); ++t) {
            if (!d.tris[t].alive) continue;
            const Vec2& a = d.pts[d.tris[t].v[0]];
            const Vec2& b = d.pts[d.tris[t].v[1]];
            const Vec2& c = d.pts[d.tris[t].v[2]];
            const Vec2 cen = (a + b + c) / 3.0;
            const double L = std::max({dist(a, b), dist(b, c), dist(c, a)});
            const double h = sf.eval(cen);
            const double size_ratio = L / h;
            const double ang = triangle_min_angle(a, b, c);
            double score = 0;
            if (size_ratio > 1.45) score = size_ratio;
            if (ang < qmin) {
                const double s = std::min({dist(a, b), dist(b, c), dist(c, a)});
                if (s > 0.5 * sf.h_min)
                    score = std::max(score, 1.45 + qmin / std::max(ang, 1e-9));
            }
            if (score > 0) bad.push_back({score, cen.x, cen.y, (int)t});
        }
        if (bad.empty()) break;
        std::sort(bad.begin(), bad.end(), [](const Bad& x, const Bad& y) {
            if (x.score != y.score) return x.score > y.score;
            if (x.cx != y.cx) return x.cx < y.cx;
            if (x.cy != y.cy) return x.cy < y.cy;
            return x.t < y.t;
        });
        int inserted = 0;
        for (const Bad& bd : bad) {
            if (!d.tris[bd.t].alive) continue;
            const Vec2& a = d.pts[d.tris[bd.t].v[0]];
            const Vec2& b = d.pts[d.tris[bd.t].v[1]];
            const Vec2& c = d.pts[d.tris[bd.t].v[2]];
            Vec2 cc = circumcenter(a, b, c);
            if (!std::isfinite(cc.x) || !std::isfinite(cc.y)) continue;
            // walk from the triangle toward cc without crossing constraints
            int cur = bd.t;
            bool reachable = true;
            for (int step = 0; step < 256; ++step) {
                const auto& tr = d.tris[cur];
                bool moved = false;
                for (int i = 0; i < 3; ++i) {
                    const Vec2& u = d.pts[tr.v[(i + 1) % 3]];
                    const Vec2& w = d.pts[tr.v[(i + 2) % 3]];
                    if (orient(u, w, cc) < 0) {
                        if (tr.c[i] || tr.n[i] < 0) {
                            reachable = false;
                        } else {
                            cur = tr.n[i];
                            moved = true;
                        }
                        break;
                    }
                }
                if (!moved) break;
                if (!reachable) break;
            }
            if (!reachable) {
                // fall back to the midpoint of the longest unconstrained edge
                const auto& tr = d.tris[bd.t];
                double bl = -1;
                Vec2 mid;
                bool found = false;
                for (int i = 0; i < 3; ++i) {
                    if (tr.c[i] || tr.n[i] < 0) continue;
                    const Vec2& u = d.pts[tr.v[(i + 1) % 3]];
                    const Vec2& w = d.pts[tr.v[(i + 2) % 3]];
                    const double l = dist(u, w);
                    if (l > bl) {
                        bl = l;
                        mid = 0.5 * (u + w);
                        found = true;
                    }
                }
                if (!found) continue;
                cc = mid;
                cur = bd.t;
            }
            // avoid near-duplicate insertions; scale by the bad triangle's
            // own shortest edge so boundary-forced fine zones still heal
            const auto& host = d.tris[cur];
            double dmin = 1e300;
            for (int i = 0; i < 3; ++i)
                dmin = std::min(dmin, dist(cc, d.pts[host.v[i]]));
            const double s_bad = std::min({dist(a, b), dist(b, c), dist(c, a)});
            if (dmin < 0.4 * s_bad) continue;
            // points nearly on a constrained/hull line would fan into
            // near-degenerate slivers
            bool near_constraint = false;
            for (int i = 0; i < 3 && !near_constraint; ++i) {
                if (!host.c[i] && host.n[i] >= 0) continue;
                const Vec2& u = d.pts[host.v[(i + 1) % 3]];
                const Vec2& w = d.pts[host.v[(i + 2) % 3]];
                if (dist_point_segment(cc, u, w) < 0.25 * s_bad)
                    near_constraint = true;
            }
            if (near_constraint) continue;
            if (d.insert(cc, cur) >= 0) ++inserted;
        }
        if (inserted == 0) break;
    }

    // smart-Laplacian smoothing of interior vertices + Delaunay flips
    std::vector<std::uint8_t> fixed(d.pts.size(), 0);
    for (std::size_t t = 0; t < d.tris.size(); ++t) {
        if (!d.tris[t].alive) continue;
        for (int i = 0; i < 3; ++i)
            if (d.tris[t].c[i] || d.tris[t].n[i] < 0) {
                fixed[d.tris[t].v[(i + 1) % 3]] = 1;
                fixed[d.tris[t].v[(i + 2) % 3]] = 1;
            }
    }
    for (int pass = 0; pass < 4; ++pass) {
        std::vector<std::vector<int>> star(d.pts.size());
        for (std::size_t t = 0; t < d.tris.size(); ++t) {
            if (!d.tris[t].alive) continue;
            for (int i = 0; i < 3; ++i) star[d.tris[t].v[i]].push_back((int)t);
        }
        for (std::size_t v = Delaunay::kSuperVerts; v < d.pts.size(); ++v) {
            if (fixed[v] || star[v].empty()) continue;
            std::set<int> nbrs;
            for (int t : star[v])
                for (int i = 0; i < 3; ++i)
                    if (d.tris[t].v[i] != (int)v) nbrs.insert(d.tris[t].v[i]);
            Vec2 cen{0, 0};
            for (int u : nbrs) cen += d.pts[u];
            cen = cen / double(nbrs.size());
            const Vec2 old = d.pts[v];
            auto local_min_angle = [&]() {
                double m = 1e300;
                for (int t : star[v]) {
                    if (!d.tris[t].alive) continue;
                    const Vec2& a = d.pts[d.tris[t].v[0]];
                    const Vec2& b = d.pts[d.tris[t].v[1]];
                    const Vec2& c = d.pts[d.tris[t].v[2]];
                    if (triangle_area(a, b, c) <= 0) return -1.0;
                    m = std::min(m, triangle_min_angle(a, b, c));
                }
                return m;
            };
            const double before = local_min_angle();
            d.pts[v] = cen;
            const double after = local_min_angle();
            if (after < before) d.pts[v] = old;
        }
        d.delaunay_pass();
    }

    RegionTris out;
    for (const auto& t : d.tris) {
        if (!t.alive) continue;
        out.tris.push_back({d.pts[t.v[0]], d.pts[t.v[1]], d.pts[t.v[2]]});
    }
    return out;
}

}  // namespace detail

inline Mesh generate_mesh(const CrossSection& cs, const SizeField& sf) {
    sf.validate();
    for (const OxideStrip& s : cs.strips)
        if (sf.h_min > s.thickness / 2.0)
            throw MeshFailure(
                "size field cannot resolve the oxide layer: h_min > thickness/2");

    detail::SegmentRegistry reg;
    std::vector<Polyline> all_polys;
    for (const Region& r : cs.regions) all_polys.push_back(r.polygon);

    // 1. strips first; they publish their chain subdivisions, then emit
    //    once every strip's cap splits are known
    std::vector<detail::RegionTris> region_tris(cs.regions.size());
    std::vector<bool> is_strip(cs.regions.size(), false);
    std::vector<detail::StripPrep> preps;
    for (const OxideStrip& s : cs.strips) {
        preps.push_back(detail::prepare_strip(s, sf, reg, all_polys));
        is_strip[s.region_index] = true;
    }
    for (const detail::StripPrep& p : preps)
        region_tris[p.strip->region_index] = detail::emit_strip(p, reg, all_polys);

    // 2. subdivide remaining atomic segments by the size field (graded)
    for (const Region& r : cs.regions) {
        const std::size_t n = r.polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = r.polygon[i];
            const Vec2& b = r.polygon[(i + 1) % n];
            if (reg.has(a, b)) continue;
            const double len = dist(a, b);
            if (len == 0) continue;
            const auto fs = detail::graded_fractions(
                a, b, len, [&](const Vec2& p) { return sf.eval(p); });
            std::vector<Vec2> pts;
            pts.reserve(fs.size());
            for (double f : fs) pts.push_back(a + f * (b - a));
            reg.put(a, b, std::move(pts));
        }
    }

    // 3. CDT regions
    for (std::size_t ri = 0; ri < cs.regions.size(); ++ri) {
        if (is_strip[ri]) continue;
        const Polyline& poly = cs.regions[ri].polygon;
        std::vector<Vec2> chain;
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % n];
            auto c = reg.chain(a, b);
            for (std::size_t k = 0; k + 1 < c.size(); ++k) chain.push_back(c[k]);
        }
        region_tris[ri] = detail::mesh_cdt_region(chain, sf, 19.0);
    }

    // 4. merge into a single conforming mesh
    Mesh m;
    std::map<std::pair<double, double>, int> node_of;
    auto node_id = [&](const Vec2& p) {
        auto [it, inserted] =
            node_of.try_emplace(std::make_pair(p.x, p.y), (int)m.nodes.size());
        if (inserted) m.nodes.push_back(p);
        return it->second;
    };
    for (std::size_t ri = 0; ri < cs.regions.size(); ++ri) {
        for (const auto& t : region_tris[ri].tris) {
            Mesh::Tri mt;
            const int a = node_id(t[0]);
            const int b = node_id(t[1]);
            const int c = node_id(t[2]);
            if (triangle_area(t[0], t[1], t[2]) <= 0)
                mt.v = {a, c, b};
            else
                mt.v = {a, b, c};
            mt.region = (int)ri;
            m.triangles.push_back(mt);
        }
        m.region_materials.push_back(cs.regions[ri].material);
        m.region_electrode.push_back(cs.regions[ri].electrode);
        double eps = 1.0;
        switch (cs.regions[ri].material) {
            case Material::substrate: eps = cs.params.eps_substrate; break;
            case Material::oxide_top:
            case Material::oxide_side: eps = cs.params.eps_oxide; break;
            case Material::metal: eps = 1.0; break;
            case Material::vacuum: eps = 1.0; break;
        }
        m.region_eps.push_back(eps);
    }

    // 5. boundary edges from tagged atomic segments (electrode tags win
    //    over `outer` when both apply)
    std::map<detail::SegKey, std::pair<BoundaryTag, FaceKind>> tag_of;
    for (const BoundarySegment& s : cs.boundary_tags) {
        const auto k = detail::seg_key(s.a, s.b);
        auto it = tag_of.find(k);
        if (it == tag_of.end() || it->second.first == BoundaryTag::outer)
            tag_of[k] = {s.tag, s.face};
    }
    for (const BoundarySegment& s : cs.boundary_tags) {
        const auto k = detail::seg_key(s.a, s.b);
        const auto [tag, face] = tag_of.at(k);
        if (tag != s.tag) continue;  // superseded duplicate
        auto c = reg.chain(s.a, s.b);
        for (std::size_t i = 0; i + 1 < c.size(); ++i) {
            auto ita = node_of.find(std::make_pair(c[i].x, c[i].y));
            auto itb = node_of.find(std::make_pair(c[i + 1].x, c[i + 1].y));
            if (ita == node_of.end() || itb == node_of.end())
                throw MeshFailure("boundary chain node missing from mesh");
            m.boundary_edges.push_back({ita->second, itb->second, tag, face});
        }
    }
    // dedupe (electrode edges tagged from both metal and neighbour walks)
    {
        std::set<std::pair<int, int>> seen;
        std::vector<Mesh::BEdge> out;
        for (const auto& e : m.boundary_edges) {
            auto k = std::pair<int,int>{std::min(e.a, e.b), std::max(e.a, e.b)};
            if (seen.insert(k).second) out.push_back(e);
        }
        m.boundary_edges = std::move(out);
    }
    m.generation = 0;
    return m;
}

// ---------------------------------------------------------------------------
// Longest-edge (Rivara) bisection with conformity closure.

inline Mesh adapt_mesh(const Mesh& mesh, const std::vector<double>& indicators,
                       double fraction) {
    if (indicators.size() != mesh.triangles.size())
        throw ValidationError("adapt_mesh: indicator length mismatch");
    if (!(fraction >= 0 && fraction <= 1))
        throw ValidationError("adapt_mesh: fraction must be in [0,1]");

    Mesh m = mesh;  // value copy; triangles replaced below
    struct WTri {
        std::array<int, 3> v;
        int region;
        bool alive = true;
    };
    std::vector<WTri> tris;
    tris.reserve(mesh.triangles.size() * 2);
    for (const auto& t : mesh.triangles)
        tris.push_back({t.v, t.region, true});

    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    auto ekey = [](int a, int b) {
        return std::pair<int, int>{std::min(a, b), std::max(a, b)};
    };
    auto link = [&](int t) {
        for (int i = 0; i < 3; ++i) {
            auto k = ekey(tris[t].v[i], tris[t].v[(i + 1) % 3]);
            edge_tris[k].push_back(t);
        }
    };
    for (std::size_t t = 0; t < tris.size(); ++t) link((int)t);
    auto alive_neighbor = [&](int t, std::pair<int, int> k) {
        auto it = edge_tris.find(k);
        if (it == edge_tris.end()) return -1;
        for (int o : it->second)
            if (o != t && tris[o].alive) return o;
        return -1;
    };

    std::map<std::pair<int, int>, std::pair<BoundaryTag, FaceKind>> btag;
    for (const auto& e : m.boundary_edges)
        btag[ekey(e.a, e.b)] = {e.tag, e.face};

    auto longest_edge = [&](int t) -> std::pair<int, int> {
        double best = -1;
        std::pair<int, int> bk{-1, -1};
        for (int i = 0; i < 3; ++i) {
            const int a = tris[t].v[i];
            const int b = tris[t].v[(i + 1) % 3];
            const double l = dist(m.nodes[a], m.nodes[b]);
            auto k = ekey(a, b);
            if (l > best || (l == best && k < bk)) {
                best = l;
                bk = k;
            }
        }
        return bk;
    };

    std::map<std::pair<int, int>, int> midpoint_of;
    auto midpoint = [&](std::pair<int, int> k) {
        auto [it, inserted] = midpoint_of.try_emplace(k, (int)m.nodes.size());
        if (inserted) {
            m.nodes.push_back(0.5 * (m.nodes[k.first] + m.nodes[k.second]));
            auto bt = btag.find(k);
            if (bt != btag.end()) {
                btag[ekey(k.first, it->second)] = bt->second;
                btag[ekey(it->second, k.second)] = bt->second;
                btag.erase(bt);
            }
        }
        return it->second;
    };

    auto split_along = [&](int t, std::pair<int, int> k) {
        const int mid = midpoint(k);
        int c = -1;
        for (int i = 0; i < 3; ++i) {
            const int a = tris[t].v[i];
            const int b = tris[t].v[(i + 1) % 3];
            if (ekey(a, b) == k) c = tris[t].v[(i + 2) % 3];
        }
        if (c < 0) throw MeshFailure("split: edge not in triangle");
        tris[t].alive = false;
        // preserve orientation: children (a, mid, c) and (mid, b, c) where
        // (a,b,c) is the parent's cyclic order with (a,b) the split edge
        int a = -1, b = -1;
        for (int i = 0; i < 3; ++i) {
            const int u = tris[t].v[i];
            const int w = tris[t].v[(i + 1) % 3];
            if (ekey(u, w) == k) {
                a = u;
                b = w;
            }
        }
        const int t1 = (int)tris.size();
        tris.push_back({{a, mid, c}, tris[t].region, true});
        link(t1);
        const int t2 = (int)tris.size();
        tris.push_back({{mid, b, c}, tris[t].region, true});
        link(t2);
    };

    // Rivara refinement of one triangle
    auto refine = [&](int t0) {
        std::vector<int> stack{t0};
        std::size_t guard = 0;
        while (!stack.empty()) {
            if (++guard > 64 * mesh.triangles.size() + 4096)
                throw MeshFailure("adapt: bisection cascade stuck");
            const int t = stack.back();
            if (!tris[t].alive) {
                stack.pop_back();
                continue;
            }
            const auto k = longest_edge(t);
            const int nb = alive_neighbor(t, k);
            if (nb >= 0 && longest_edge(nb) != k) {
                stack.push_back(nb);
                continue;
            }
            split_along(t, k);
            if (nb >= 0) split_along(nb, k);
            stack.pop_back();
        }
    };

    // mark: top `fraction` by indicator, zero-indicator triangles never marked
    std::vector<int> order(indicators.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        if (indicators[x] != indicators[y]) return indicators[x] > indicators[y];
        return x < y;
    });
    const std::size_t want = (std::size_t)std::ceil(fraction * (double)order.size());
    std::vector<int> marked;
    for (std::size_t i = 0; i < order.size() && marked.size() < want; ++i)
        if (indicators[order[i]] > 0) marked.push_back(order[i]);

    for (int t : marked)
        if (tris[t].alive) refine(t);

    m.triangles.clear();
    for (const auto& t : tris)
        if (t.alive) m.triangles.push_back({t.v, t.region});
    m.boundary_edges.clear();
    for (const auto& [k, tf] : btag)
        m.boundary_edges.push_back({k.first, k.second, tf.first, tf.second});
    m.generation = mesh.generation + 1;
    return m;
}

// ---------------------------------------------------------------------------
// Audits and IO.

// Exhaustive conformity audit: orientation, edge matching (interior edges
// shared by exactly two triangles), no hanging nodes.
inline void audit_mesh(const Mesh& m) {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : m.triangles) {
        if (m.triangle_area_of(t) <= 0) throw MeshFailure("audit: orientation");
        for (int i = 0; i < 3; ++i) {
            auto k = std::pair<int,int>{std::min(t.v[i], t.v[(i + 1) % 3]), std::max(t.v[i], t.v[(i + 1) % 3])};
            edge_count[{k.first, k.second}] += 1;
        }
    }
    for (const auto& [k, c] : edge_count)
        if (c > 2) throw MeshFailure("audit: edge shared by >2 triangles");
    // hanging nodes: a node lying on another edge implies an unmatched pair
    std::size_t boundary_like = 0;
    for (const auto& [k, c] : edge_count)
        if (c == 1) ++boundary_like;
    std::set<std::pair<int, int>> bset;
    for (const auto& e : m.boundary_edges) {
        auto k = std::pair<int,int>{std::min(e.a, e.b), std::max(e.a, e.b)};
        bset.insert(k);
    }
    for (const auto& [k, c] : edge_count) {
        if (c != 1) continue;
        // every single-sided edge must be a domain boundary edge (tagged or
        // on the box border); tagged is the robust check here
        if (!bset.count(k)) {
            // allow untagged outer edges only if both nodes are on the hull
            // of the mesh; without the cross-section we cannot verify, so
            // require tags for all single-sided edges
            throw MeshFailure("audit: unmatched interior edge (hanging node?)");
        }
    }
    (void)boundary_like;
}

inline void write_mesh_ascii(std::ostream& os, const Mesh& m) {
    os.precision(12);
    os << "nodes " << m.nodes.size() << " triangles " << m.triangles.size()
       << "\n";
    for (const Vec2& p : m.nodes) os << p.x << " " << p.y << "\n";
    for (const auto& t : m.triangles)
        os << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << t.region
           << "\n";
}

inline void write_mesh_vtk(std::ostream& os, const Mesh& m) {
    os << "# vtk DataFile Version 3.0\nqsurf mesh\nASCII\n"
       << "DATASET UNSTRUCTURED_GRID\n";
    os.precision(12);
    os << "POINTS " << m.nodes.size() << " double\n";
    for (const Vec2& p : m.nodes) os << p.x << " " << p.y << " 0\n";
    os << "CELLS " << m.triangles.size() << " " << 4 * m.triangles.size()
       << "\n";
    for (const auto& t : m.triangles)
        os << "3 " << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
    os << "CELL_TYPES " << m.triangles.size() << "\n";
    for (std::size_t i = 0; i < m.triangles.size(); ++i) os << "5\n";
    os << "CELL_DATA " << m.triangles.size() << "\nSCALARS region_id int 1\n"
       << "LOOKUP_TABLE default\n";
    for (const auto& t : m.triangles) os << t.region << "\n";
}

}  // namespace qsurf
