#pragma once

// Parameterized transmon pad-edge cross-section builder. Produces a set of
// material-tagged polygons (metal pad + mirrored ground electrode, surface
// oxide strips, substrate with trench/undercut, vacuum) that tile the
// bounding box exactly; neighbouring regions share vertices bit-for-bit so
// the mesher can rely on edge identity instead of tolerance snapping.
//
// Units: lengths nm, angles degrees at the interface (radians internally).

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsurf/errors.hpp"
#include "qsurf/geom2d.hpp"

namespace qsurf {

enum class Material : std::uint8_t {
    metal,
    substrate,
    oxide_top,
    oxide_side,
    vacuum,
};

inline const char* material_name(Material m) {
    switch (m) {
        case Material::metal: return "metal";
        case Material::substrate: return "substrate";
        case Material::oxide_top: return "oxide_top";
        case Material::oxide_side: return "oxide_side";
        case Material::vacuum: return "vacuum";
    }
    return "?";
}

enum class BoundaryTag : std::uint8_t { electrode_pad, electrode_ground, outer };

inline const char* boundary_tag_name(BoundaryTag t) {
    switch (t) {
        case BoundaryTag::electrode_pad: return "electrode_pad";
        case BoundaryTag::electrode_ground: return "electrode_ground";
        case BoundaryTag::outer: return "outer";
    }
    return "?";
}

// Which face of the electrode a tagged segment belongs to; used by the
// thin-layer boundary-integral estimate to split top vs side.
enum class FaceKind : std::uint8_t { none, top, side, bottom };

struct GeometryParams {
    double alpha = 0.0;           // sidewall footer angle, deg, 0 = vertical
    double dh = 5.0;              // surface oxide thickness, nm
    std::optional<double> dh_top;   // independent top-surface override
    std::optional<double> dh_side;  // independent sidewall override
    double r1 = 0.0;              // top edge radius, nm
    double r2 = 0.0;              // bottom edge radius, nm
    double trench_depth = 0.0;    // nm
    double undercut_x = 0.0;      // nm
    double undercut_beta = 90.0;  // deg, measured from horizontal
    double film_thickness = 160.0;
    double exposed_length = 0.0;  // nm, oxidized strip next to the sidewall
    bool capped = false;          // true: top oxide only over exposed_length
    double gap = 30.0;            // um, pad edge to ground edge
    double eps_substrate = 11.45;
    double eps_oxide = 10.0;
    double domain_scale = 6.0;    // box height as a multiple of gap

    double gap_nm() const { return gap * 1000.0; }
    double pad_extent_nm() const { return 2.0 * gap_nm(); }
    double dh_top_nm() const { return dh_top.value_or(dh); }
    double dh_side_nm() const { return dh_side.value_or(dh); }
};

struct Region {
    Polyline polygon;  // CCW, consecutive-duplicate free
    Material material = Material::vacuum;
    int electrode = -1;  // 0 = pad, 1 = ground, metal regions only
};

struct BoundarySegment {
    Vec2 a, b;
    BoundaryTag tag;
    FaceKind face = FaceKind::none;
};

struct CornerMarker {
    Vec2 point;
    double exterior_angle_deg;  // field-region opening angle at the corner
};

// Thin oxide band with a 1:1 inner/outer vertex pairing (inner vertices may
// repeat where a sharp metal corner fans into a rounded outer arc).
struct OxideStrip {
    std::size_t region_index;
    Polyline inner;
    Polyline outer;
    double thickness;
};

struct CrossSection {
    Vec2 box_lo, box_hi;
    std::vector<Region> regions;
    std::vector<BoundarySegment> boundary_tags;
    std::vector<CornerMarker> corner_markers;
    std::vector<OxideStrip> strips;
    double mirror_x = 0.0;  // gap midline
    GeometryParams params;  // parameters the section was built from

    double box_area() const {
        return (box_hi.x - box_lo.x) * (box_hi.y - box_lo.y);
    }
};

namespace detail {

inline constexpr double kFootExitDeg = 20.0;  // ground-incidence of the foot
inline constexpr double kMaxArcChordErr = 0.2;  // nm

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw GeometryConflict(msg);
}

inline Polyline arc_points(const Vec2& center, double radius, double th0,
                           double th1, double max_chord_err) {
    // Inclusive of both endpoints; th in radians, swept linearly th0 -> th1.
    const double sweep = th1 - th0;
    double dth_max = std::numbers::pi / 8.0;
    if (radius > max_chord_err) {
        dth_max = std::min(dth_max, 2.0 * std::acos(1.0 - max_chord_err / radius));
    }
    const int n = std::max(1, (int)std::ceil(std::abs(sweep) / dth_max));
    Polyline pts;
    pts.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double th = th0 + sweep * (double(i) / n);
        pts.push_back(center + radius * Vec2{std::cos(th), std::sin(th)});
    }
    return pts;
}

inline void dedupe_consecutive(Polyline& p, double tol = 0.0) {
    Polyline out;
    for (const Vec2& v : p) {
        if (out.empty() || dist(out.back(), v) > tol) out.push_back(v);
    }
    if (out.size() > 1 && dist(out.front(), out.back()) <= tol) out.pop_back();
    p = std::move(out);
}

}  // namespace detail

inline void validate_params(const GeometryParams& g) {
    auto fail = [](const std::string& m) { throw GeometryConflict(m); };
    auto nonneg = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            fail(std::string(name) + " must be >= 0");
    };
    nonneg(g.alpha, "alpha");
    nonneg(g.dh, "dh");
    if (g.dh_top) nonneg(*g.dh_top, "dh_top");
    if (g.dh_side) nonneg(*g.dh_side, "dh_side");
    nonneg(g.r1, "r1");
    nonneg(g.r2, "r2");
    nonneg(g.trench_depth, "trench_depth");
    nonneg(g.undercut_x, "undercut_x");
    nonneg(g.exposed_length, "exposed_length");
    if (!(g.film_thickness > 0)) fail("film_thickness must be > 0");
    if (!(g.gap > 0)) fail("gap must be > 0");
    if (!(g.eps_substrate >= 1)) fail("eps_substrate must be >= 1");
    if (!(g.eps_oxide >= 1)) fail("eps_oxide must be >= 1");
    if (!(g.alpha >= 0 && g.alpha < 90)) fail("alpha must be in [0, 90)");
    if (g.r1 + g.r2 > g.film_thickness)
        fail("r1 + r2 must not exceed film_thickness (corner roundings overlap)");
    if (g.undercut_x > 0) {
        if (!(g.undercut_beta > 0 && g.undercut_beta <= 90))
            fail("undercut_beta must be in (0, 90] when undercut_x > 0");
        if (!(g.trench_depth > 0))
            fail("undercut_x requires trench_depth > 0 (undercut carves the trench wall)");
        if (g.undercut_x > 0.5 * g.pad_extent_nm())
            fail("undercut_x vs pad extent: undercut exceeds half the modeled pad");
    }
    if (g.exposed_length > 0.5 * g.pad_extent_nm())
        fail("exposed_length exceeds the pad half-width of the model");
    if (g.r2 > 0 && g.alpha > 90.0 - detail::kFootExitDeg - 5.0)
        fail("alpha vs r2: footer rounding needs alpha <= 65 degrees");
    if (!(g.domain_scale >= 1.0)) fail("domain_scale must be >= 1");
    const double half_h = 0.5 * g.domain_scale * g.gap_nm();
    if (half_h <= g.film_thickness + g.dh_top_nm() + 1.0)
        fail("domain_scale too small for film_thickness + oxide");
    if (half_h <= g.trench_depth + 1.0)
        fail("domain_scale too small for trench_depth");
}

namespace detail {

// Pad edge profile in local coordinates: sidewall base corner at the
// origin, metal interior at x < 0, substrate top surface at y = 0.
struct EdgeProfile {
    Polyline inner;   // metal surface, descending from the top tangency
    Polyline outer;   // inner offset by dh_side, 1:1 paired with inner
    double x_split;   // where the flat top ends and the profile begins
    double x_f;       // metal-substrate contact x
    double x_w;       // solid footprint (incl. oxide skirt); trench wall ref
    bool flush_cap;   // bottom oxide cap lies on y = 0
    Vec2 top_marker;
    double top_exterior_deg;
    double contact_exterior_deg;
};

inline EdgeProfile build_edge_profile(const GeometryParams& g) {
    const double a = deg2rad(g.alpha);
    const double t = g.film_thickness;
    const double r1 = g.r1;
    const double dhs = g.dh_side_nm();
    // Foot radii thinner than the side oxide collapse to the sharp corner;
    // the offset band would otherwise self-intersect.
    const double r2 = (g.r2 >= std::max(dhs, 0.5)) ? g.r2 : 0.0;
    const Vec2 u{-std::sin(a), std::cos(a)};  // up the sidewall
    const Vec2 n{std::cos(a), std::sin(a)};   // outward normal

    EdgeProfile ep;
    std::vector<std::pair<Vec2, Vec2>> path;  // (inner, outer) descending

    const double exit = deg2rad(kFootExitDeg);
    double s2 = 0.0;  // sidewall parameter where the foot arc starts
    Vec2 foot_center;
    if (r2 > 0) {
        s2 = (std::cos(exit) * r2 - r2 * std::sin(a)) / std::cos(a);
        check(s2 >= 0, "alpha vs r2: foot arc does not fit");
        foot_center = s2 * u + r2 * n;
    }

    // Top corner / R1 arc.
    double s1;  // sidewall parameter where the straight part starts
    if (r1 > 0) {
        const double cx1 = -(r1 + (t - r1) * std::sin(a)) / std::cos(a);
        const Vec2 c1{cx1, t - r1};
        Polyline arc =
            arc_points(c1, r1, std::numbers::pi / 2.0, a, kMaxArcChordErr);
        arc.front() = {cx1, t};  // exact tangency shared with the top face
        for (const Vec2& p : arc) {
            const Vec2 nr = normalized(p - c1);
            path.emplace_back(p, p + dhs * nr);
        }
        s1 = dot(c1, u);
        ep.x_split = cx1;
        ep.top_marker = {cx1, t};
        ep.top_exterior_deg = 180.0;  // rounded, no field singularity
    } else {
        const Vec2 k{-t * std::tan(a), t};
        // Sharp corner: round join on the outer path fans around k.
        if (dhs > 0) {
            Polyline arc =
                arc_points(k, dhs, std::numbers::pi / 2.0, a, kMaxArcChordErr);
            arc.front() = {k.x, t + dhs};
            for (const Vec2& p : arc) path.emplace_back(k, p);
        } else {
            path.emplace_back(k, k);
        }
        s1 = dot(k, u);
        ep.x_split = k.x;
        ep.top_marker = k;
        ep.top_exterior_deg = 270.0 - g.alpha;
    }
    check(s1 > s2 + 1e-9, "r1 vs r2: corner roundings overlap on the sidewall");

    // Straight sidewall from s1 down to s2.
    {
        const Vec2 pin = s2 * u;  // only used when r2 == 0 (s2 == 0 -> B)
        (void)pin;
        const Vec2 top_in = s1 * u;
        const Vec2 top_out = top_in + dhs * n;
        if (path.empty() || dist(path.back().first, top_in) > 1e-12 ||
            dist(path.back().second, top_out) > 1e-12) {
            path.emplace_back(top_in, top_out);
        }
    }

    if (r2 > 0) {
        const Vec2 t2 = s2 * u;
        path.emplace_back(t2, t2 + dhs * n);
        const double th0 = std::numbers::pi + a;
        const double th1 = 1.5 * std::numbers::pi - exit;  // 250 deg for 20
        const Polyline arc = arc_points(foot_center, r2, th0, th1, kMaxArcChordErr);
        for (std::size_t i = 1; i < arc.size(); ++i) {
            const Vec2& p = arc[i];
            const Vec2 nr = normalized(foot_center - p);  // outward (vacuum)
            path.emplace_back(p, p + dhs * nr);
        }
        Vec2 e = path.back().first;
        check(std::abs(e.y) < 1e-6, "foot arc failed to reach the substrate plane");
        e.y = 0.0;
        path.back().first = e;
        path.back().second = e + dhs * normalized(foot_center - e);
        ep.x_f = e.x;
        ep.x_w = path.back().second.x;
        ep.flush_cap = false;
        ep.contact_exterior_deg = 360.0 - kFootExitDeg;
    } else {
        const Vec2 b{0.0, 0.0};
        Vec2 outer_end = b;
        if (dhs > 0) outer_end = {dhs / std::cos(a), 0.0};
        path.emplace_back(b, outer_end);
        ep.x_f = 0.0;
        ep.x_w = outer_end.x;
        ep.flush_cap = true;
        ep.contact_exterior_deg = 270.0 + g.alpha;
    }

    ep.inner.reserve(path.size());
    ep.outer.reserve(path.size());
    for (auto& [pi, po] : path) {
        ep.inner.push_back(pi);
        ep.outer.push_back(po);
    }
    return ep;
}

// Substrate top-surface profile from (x_lo, 0) to the trench floor at the
// gap midline; also used (mirrored) for the ground side.
inline Polyline substrate_top_profile(const GeometryParams& g,
                                      const EdgeProfile& ep, double x_lo,
                                      double xm) {
    Polyline pr;
    pr.push_back({x_lo, 0.0});
    const double dt = g.trench_depth;
    const double xw = ep.x_w;
    if (dt <= 0) {
        pr.push_back({ep.x_f, 0.0});
        if (xw > ep.x_f) pr.push_back({xw, 0.0});
        pr.push_back({xm, 0.0});
        detail::dedupe_consecutive(pr);
        return pr;
    }
    if (g.undercut_x > 0) {
        const double beta = deg2rad(g.undercut_beta);
        const Vec2 p0{xw - g.undercut_x, 0.0};
        pr.push_back(p0);
        const double drop = g.undercut_x * std::tan(beta);
        if (drop < dt) {
            pr.push_back({xw, -drop});
            pr.push_back({xw, -dt});
        } else {
            pr.push_back({p0.x + dt / std::tan(beta), -dt});
        }
    } else {
        pr.push_back({ep.x_f, 0.0});
        if (xw > ep.x_f) pr.push_back({xw, 0.0});
        pr.push_back({xw, -dt});
    }
    pr.push_back({xm, -dt});
    detail::dedupe_consecutive(pr);
    return pr;
}

}  // namespace detail

inline CrossSection build_cross_section(const GeometryParams& g) {
    validate_params(g);
    using detail::dedupe_consecutive;

    const double t = g.film_thickness;
    const double dht = g.dh_top_nm();
    const double dhs = g.dh_side_nm();
    const double gap = g.gap_nm();
    const double pad = g.pad_extent_nm();
    const double dt = g.trench_depth;

    const detail::EdgeProfile ep = detail::build_edge_profile(g);
    const double x_lo = -pad;
    const double xm = ep.x_f + 0.5 * gap;  // mirror line
    const double x_hi = 2.0 * xm - x_lo;
    const double half_h = 0.5 * g.domain_scale * gap;
    auto mirror = [xm](const Vec2& p) { return Vec2{2.0 * xm - p.x, p.y}; };
    auto mirror_line = [&](Polyline p) {
        for (Vec2& v : p) v = mirror(v);
        return p;
    };

    detail::check(ep.x_w < xm - 1.0, "gap too small for the edge profile");
    if (g.undercut_x > 0)
        detail::check(ep.x_w - g.undercut_x > x_lo + 1.0,
                      "undercut_x vs footer extent: undercut self-intersects the pad");

    const bool has_top_oxide = dht > 0 && (!g.capped || g.exposed_length > 0);
    const bool has_side_oxide = dhs > 0;
    const double x_ox0 =
        g.capped ? ep.x_split - g.exposed_length : x_lo;  // top oxide start
    if (has_top_oxide)
        detail::check(x_ox0 >= x_lo - 1e-9 && x_ox0 < ep.x_split,
                      "exposed_length vs pad extent");
    const Vec2 p0{ep.x_w - g.undercut_x, 0.0};  // undercut apex
    const bool undercut = g.undercut_x > 0;

    CrossSection cs;
    cs.params = g;
    cs.box_lo = {x_lo, -half_h};
    cs.box_hi = {x_hi, half_h};
    cs.mirror_x = xm;

    // --- pad metal -------------------------------------------------------
    Polyline pad_metal;
    pad_metal.push_back({x_lo, 0.0});
    if (undercut && p0.x > x_lo) pad_metal.push_back(p0);
    pad_metal.push_back({ep.x_f, 0.0});
    for (auto it = ep.inner.rbegin(); it != ep.inner.rend(); ++it)
        pad_metal.push_back(*it);  // ascending profile to the top tangency
    if (g.capped && g.exposed_length > 0 && x_ox0 > x_lo)
        pad_metal.push_back({x_ox0, t});
    pad_metal.push_back({x_lo, t});
    dedupe_consecutive(pad_metal);

    // --- pad oxide strips -------------------------------------------------
    Polyline side_polygon;
    if (has_side_oxide) {
        side_polygon = ep.inner;  // descending
        side_polygon.push_back(ep.outer.back());
        for (auto it = ep.outer.rbegin(); it != ep.outer.rend(); ++it)
            side_polygon.push_back(*it);
        // top cap back to the inner start is implied by closing the ring
        dedupe_consecutive(side_polygon);
    }

    Polyline top_polygon;
    if (has_top_oxide) {
        top_polygon.push_back({x_ox0, t});
        top_polygon.push_back({ep.x_split, t});
        if (has_side_oxide && dhs < dht)
            top_polygon.push_back({ep.x_split, t + dhs});
        top_polygon.push_back({ep.x_split, t + dht});
        top_polygon.push_back({x_ox0, t + dht});
        dedupe_consecutive(top_polygon);
    }
    // side polygon may need the oxide-top junction split on its top cap
    if (has_side_oxide && has_top_oxide && dht < dhs) {
        // top cap runs outer.front -> inner.front; insert (x_split, t+dht)
        Polyline fixed;
        for (std::size_t i = 0; i < side_polygon.size(); ++i) {
            fixed.push_back(side_polygon[i]);
            const Vec2& a = side_polygon[i];
            const Vec2& b = side_polygon[(i + 1) % side_polygon.size()];
            const Vec2 split{ep.x_split, t + dht};
            if (dist(a, ep.outer.front()) < 1e-12 &&
                dist(b, ep.inner.front()) < 1e-12) {
                fixed.push_back(split);
            }
        }
        side_polygon = std::move(fixed);
    }
    // flush bottom cap crossed by the undercut opening: split at p0
    if (has_side_oxide && ep.flush_cap && undercut && p0.x > ep.x_f + 1e-12 &&
        p0.x < ep.x_w - 1e-12) {
        Polyline fixed;
        const std::size_t n = side_polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            fixed.push_back(side_polygon[i]);
            const Vec2& a = side_polygon[i];
            const Vec2& b = side_polygon[(i + 1) % n];
            if (dist(a, ep.inner.back()) < 1e-12 &&
                dist(b, ep.outer.back()) < 1e-12) {
                fixed.push_back(p0);
            }
        }
        side_polygon = std::move(fixed);
    }

    // --- substrate ---------------------------------------------------------
    const Polyline left_prof = detail::substrate_top_profile(g, ep, x_lo, xm);
    Polyline substrate;
    substrate.push_back({x_lo, -half_h});
    substrate.push_back({x_hi, -half_h});
    {
        Polyline right = mirror_line(left_prof);  // runs (x_hi,0) -> (xm,.)
        for (const Vec2& v : right) substrate.push_back(v);
        for (auto it = left_prof.rbegin(); it != left_prof.rend(); ++it)
            substrate.push_back(*it);
    }
    dedupe_consecutive(substrate, 1e-12);

    // --- vacuum skyline (left half, runs left to right) --------------------
    Polyline sky;
    const double z0 = (!g.capped && has_top_oxide) ? t + dht : t;
    sky.push_back({x_lo, z0});
    if (has_top_oxide) {
        if (g.capped) {
            sky.push_back({x_ox0, t});
            sky.push_back({x_ox0, t + dht});
        }
        sky.push_back({ep.x_split, t + dht});
        if (has_side_oxide) {
            if (dht != dhs) sky.push_back({ep.x_split, t + dhs});
        } else {
            sky.push_back({ep.x_split, t});
        }
    } else {
        sky.push_back({ep.x_split, t});
        if (has_side_oxide) sky.push_back({ep.x_split, t + dhs});
    }
    if (has_side_oxide) {
        for (std::size_t i = 1; i < ep.outer.size(); ++i)
            sky.push_back(ep.outer[i]);
    } else {
        for (std::size_t i = 1; i < ep.inner.size(); ++i)
            sky.push_back(ep.inner[i]);
    }
    // bottom of the electrode stack: cap, undercut, trench wall
    if (has_side_oxide && !ep.flush_cap) {
        sky.push_back({ep.x_f, 0.0});  // down the floating cap
    }
    if (undercut) {
        // exposed oxide cap footprint and/or metal underside, then slant
        if (ep.flush_cap && has_side_oxide) {
            if (p0.x < ep.x_f) {
                sky.push_back({ep.x_f, 0.0});
                if (p0.x > x_lo) sky.push_back(p0);
            } else {
                sky.push_back(p0);
            }
        } else {
            if (p0.x < ep.x_f && p0.x > x_lo) sky.push_back(p0);
        }
        const double beta = deg2rad(g.undercut_beta);
        const double drop = g.undercut_x * std::tan(beta);
        if (drop < dt) {
            sky.push_back({ep.x_w, -drop});
            sky.push_back({ep.x_w, -dt});
        } else {
            sky.push_back({p0.x + dt / std::tan(beta), -dt});
        }
        sky.push_back({xm, -dt});
    } else {
        if (!ep.flush_cap || !has_side_oxide) {
            if (ep.x_w > ep.x_f) sky.push_back({ep.x_w, 0.0});
        }
        if (dt > 0) {
            sky.push_back({ep.x_w, -dt});
            sky.push_back({xm, -dt});
        } else {
            sky.push_back({xm, 0.0});
        }
    }
    dedupe_consecutive(sky, 1e-12);

    Polyline vacuum = sky;
    {
        Polyline right = mirror_line(sky);  // (x_hi, z0) -> (xm, floor)
        for (auto it = right.rbegin(); it != right.rend(); ++it)
            vacuum.push_back(*it);
    }
    vacuum.push_back({x_hi, half_h});
    vacuum.push_back({x_lo, half_h});
    dedupe_consecutive(vacuum, 1e-12);

    // --- assemble regions ---------------------------------------------------
    auto add_region = [&](Polyline poly, Material m, int electrode) {
        if (polygon_area(poly) < 0)
            std::reverse(poly.begin(), poly.end());
        Region r;
        r.polygon = std::move(poly);
        r.material = m;
        r.electrode = electrode;
        cs.regions.push_back(std::move(r));
        return cs.regions.size() - 1;
    };

    add_region(substrate, Material::substrate, -1);
    const std::size_t pad_idx = add_region(pad_metal, Material::metal, 0);
    Polyline ground_metal = mirror_line(pad_metal);
    std::reverse(ground_metal.begin(), ground_metal.end());
    const std::size_t gnd_idx = add_region(ground_metal, Material::metal, 1);

    if (has_top_oxide) {
        const std::size_t i1 = add_region(top_polygon, Material::oxide_top, -1);
        cs.strips.push_back({i1,
                             {{x_ox0, t}, {ep.x_split, t}},
                             {{x_ox0, t + dht}, {ep.x_split, t + dht}},
                             dht});
        Polyline gp = mirror_line(top_polygon);
        std::reverse(gp.begin(), gp.end());
        const std::size_t i2 = add_region(gp, Material::oxide_top, -1);
        cs.strips.push_back({i2,
                             mirror_line({{x_ox0, t}, {ep.x_split, t}}),
                             mirror_line({{x_ox0, t + dht}, {ep.x_split, t + dht}}),
                             dht});
    }
    if (has_side_oxide) {
        const std::size_t i1 = add_region(side_polygon, Material::oxide_side, -1);
        cs.strips.push_back({i1, ep.inner, ep.outer, dhs});
        Polyline gp = mirror_line(side_polygon);
        std::reverse(gp.begin(), gp.end());
        const std::size_t i2 = add_region(gp, Material::oxide_side, -1);
        cs.strips.push_back({i2, mirror_line(ep.inner), mirror_line(ep.outer), dhs});
    }
    add_region(vacuum, Material::vacuum, -1);

    // --- boundary tags -------------------------------------------------------
    auto tag_polygon = [&](const Polyline& poly, BoundaryTag tag, bool is_pad) {
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % n];
            FaceKind f = FaceKind::none;
            const double xa = is_pad ? a.x : 2.0 * xm - a.x;
            const double xb = is_pad ? b.x : 2.0 * xm - b.x;
            if (a.y == t && b.y == t)
                f = FaceKind::top;
            else if (a.y == 0.0 && b.y == 0.0)
                f = FaceKind::bottom;
            else if (std::max(xa, xb) > ep.x_split - 1e-9 && a.x != x_lo &&
                     a.x != x_hi)
                f = FaceKind::side;
            cs.boundary_tags.push_back({a, b, tag, f});
        }
    };
    tag_polygon(cs.regions[pad_idx].polygon, BoundaryTag::electrode_pad, true);
    tag_polygon(cs.regions[gnd_idx].polygon, BoundaryTag::electrode_ground, false);

    // outer box edges contributed by non-metal regions
    auto on_box = [&](const Vec2& a, const Vec2& b) {
        auto edge_on = [&](double va, double vb, double lim) {
            return va == lim && vb == lim;
        };
        return edge_on(a.x, b.x, x_lo) || edge_on(a.x, b.x, x_hi) ||
               edge_on(a.y, b.y, -half_h) || edge_on(a.y, b.y, half_h);
    };
    for (const Region& r : cs.regions) {
        if (r.material == Material::metal) continue;
        const std::size_t n = r.polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = r.polygon[i];
            const Vec2& b = r.polygon[(i + 1) % n];
            if (on_box(a, b))
                cs.boundary_tags.push_back({a, b, BoundaryTag::outer});
        }
    }

    // --- corner markers ------------------------------------------------------
    auto add_marker = [&](const Vec2& p, double deg) {
        cs.corner_markers.push_back({p, deg});
        cs.corner_markers.push_back({mirror(p), deg});
    };
    add_marker(ep.top_marker, ep.top_exterior_deg);
    add_marker({ep.x_f, 0.0}, ep.contact_exterior_deg);
    if (dt > 0) add_marker({ep.x_w, 0.0}, 270.0);
    if (undercut) add_marker(p0, 180.0 + g.undercut_beta);

    return cs;
}

// ---------------------------------------------------------------------------
// Validation: diagnostic list of invariant violations (empty when valid).

struct Violation {
    std::string what;
};

inline std::vector<Violation> validate_cross_section(const CrossSection& cs) {
    std::vector<Violation> out;
    const double box_area = cs.box_area();

    double area_sum = 0.0;
    for (std::size_t ri = 0; ri < cs.regions.size(); ++ri) {
        const Region& r = cs.regions[ri];
        const double a = polygon_area(r.polygon);
        if (a <= 0)
            out.push_back({"OrientationViolation: region " + std::to_string(ri) +
                           " (" + material_name(r.material) + ") not CCW"});
        if (!polygon_is_simple(r.polygon))
            out.push_back({"SimplicityViolation: region " + std::to_string(ri) +
                           " (" + material_name(r.material) + ") self-intersects"});
        area_sum += a;
    }
    if (std::abs(area_sum - box_area) > 1e-9 * box_area + 1e-6)
        out.push_back({"GapViolation: region areas sum to " +
                       std::to_string(area_sum) + " vs box " +
                       std::to_string(box_area)});

    // Tiling by edge matching: every atomic edge either appears exactly twice
    // (opposite orientations) or lies on the box border. Catches both gaps
    // and overlaps for vertex-sharing constructions.
    std::map<std::pair<std::pair<double, double>, std::pair<double, double>>, int>
        edges;
    auto key = [](const Vec2& a, const Vec2& b) {
        return std::make_pair(std::make_pair(a.x, a.y), std::make_pair(b.x, b.y));
    };
    for (const Region& r : cs.regions) {
        const std::size_t n = r.polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = r.polygon[i];
            const Vec2& b = r.polygon[(i + 1) % n];
            edges[key(a, b)] += 1;
        }
    }
    auto on_border = [&](const Vec2& a, const Vec2& b) {
        auto edge_on = [&](double va, double vb, double lim) {
            return va == lim && vb == lim;
        };
        return edge_on(a.x, b.x, cs.box_lo.x) || edge_on(a.x, b.x, cs.box_hi.x) ||
               edge_on(a.y, b.y, cs.box_lo.y) || edge_on(a.y, b.y, cs.box_hi.y);
    };
    for (const auto& [k, cnt] : edges) {
        const Vec2 a{k.first.first, k.first.second};
        const Vec2 b{k.second.first, k.second.second};
        const auto rk = key(b, a);
        const int rcnt = edges.count(rk) ? edges.at(rk) : 0;
        if (cnt > 1 || rcnt > 1) {
            out.push_back({"OverlapViolation: edge repeated at (" +
                           std::to_string(a.x) + "," + std::to_string(a.y) + ")"});
            continue;
        }
        if (rcnt == 0 && !on_border(a, b))
            out.push_back({"GapViolation: unmatched interior edge at (" +
                           std::to_string(a.x) + "," + std::to_string(a.y) +
                           ")-(" + std::to_string(b.x) + "," +
                           std::to_string(b.y) + ")"});
    }

    // proper edge crossings between distinct regions indicate overlap
    for (std::size_t ri = 0; ri < cs.regions.size(); ++ri) {
        for (std::size_t rj = ri + 1; rj < cs.regions.size(); ++rj) {
            const Polyline& p = cs.regions[ri].polygon;
            const Polyline& q = cs.regions[rj].polygon;
            bool hit = false;
            for (std::size_t i = 0; i < p.size() && !hit; ++i) {
                const Vec2& a = p[i];
                const Vec2& b = p[(i + 1) % p.size()];
                for (std::size_t j = 0; j < q.size() && !hit; ++j) {
                    const Vec2& c = q[j];
                    const Vec2& d = q[(j + 1) % q.size()];
                    const int d1 = orient(c, d, a), d2 = orient(c, d, b);
                    const int d3 = orient(a, b, c), d4 = orient(a, b, d);
                    if (d1 * d2 < 0 && d3 * d4 < 0) hit = true;
                }
            }
            if (hit)
                out.push_back({"OverlapViolation: regions " + std::to_string(ri) +
                               " and " + std::to_string(rj) + " cross"});
        }
    }

    // every metal boundary edge must carry an electrode tag
    std::set<std::pair<std::pair<double, double>, std::pair<double, double>>>
        tagged;
    for (const BoundarySegment& s : cs.boundary_tags)
        if (s.tag != BoundaryTag::outer) tagged.insert(key(s.a, s.b));
    for (const Region& r : cs.regions) {
        if (r.material != Material::metal) continue;
        const std::size_t n = r.polygon.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!tagged.count(key(r.polygon[i], r.polygon[(i + 1) % n]))) {
                out.push_back({"TagViolation: untagged metal edge"});
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization.

inline void to_json(nlohmann::json& j, const GeometryParams& g) {
    j = nlohmann::json{{"alpha", g.alpha},
                       {"dh", g.dh},
                       {"r1", g.r1},
                       {"r2", g.r2},
                       {"trench_depth", g.trench_depth},
                       {"undercut_x", g.undercut_x},
                       {"undercut_beta", g.undercut_beta},
                       {"film_thickness", g.film_thickness},
                       {"exposed_length", g.exposed_length},
                       {"capped", g.capped},
                       {"gap", g.gap},
                       {"eps_substrate", g.eps_substrate},
                       {"eps_oxide", g.eps_oxide},
                       {"domain_scale", g.domain_scale}};
    if (g.dh_top) j["dh_top"] = *g.dh_top;
    if (g.dh_side) j["dh_side"] = *g.dh_side;
}

inline void from_json(const nlohmann::json& j, GeometryParams& g) {
    static const std::set<std::string> known{
        "alpha",        "dh",          "dh_top",         "dh_side",
        "r1",           "r2",          "trench_depth",   "undercut_x",
        "undercut_beta","film_thickness", "exposed_length", "capped",
        "gap",          "eps_substrate", "eps_oxide",    "domain_scale"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ValidationError("geometry: unknown key '" + it.key() + "'");
    g = GeometryParams{};
    auto get = [&](const char* k, double& v) {
        if (j.contains(k)) v = j.at(k).get<double>();
    };
    get("alpha", g.alpha);
    get("dh", g.dh);
    if (j.contains("dh_top")) g.dh_top = j.at("dh_top").get<double>();
    if (j.contains("dh_side")) g.dh_side = j.at("dh_side").get<double>();
    get("r1", g.r1);
    get("r2", g.r2);
    get("trench_depth", g.trench_depth);
    get("undercut_x", g.undercut_x);
    get("undercut_beta", g.undercut_beta);
    get("film_thickness", g.film_thickness);
    get("exposed_length", g.exposed_length);
    if (j.contains("capped")) g.capped = j.at("capped").get<bool>();
    get("gap", g.gap);
    get("eps_substrate", g.eps_substrate);
    get("eps_oxide", g.eps_oxide);
    get("domain_scale", g.domain_scale);
}

// ASCII polygon dump: one block per region.
inline void write_cross_section(std::ostream& os, const CrossSection& cs) {
    os.precision(12);
    for (const Region& r : cs.regions) {
        os << "material " << material_name(r.material) << "\n";
        for (const Vec2& v : r.polygon) os << v.x << " " << v.y << "\n";
        os << "\n";
    }
}

// Convenience: set a GeometryParams field by its JSON name (sweep axes).
inline void set_param(GeometryParams& g, const std::string& name, double v) {
    if (name == "alpha") g.alpha = v;
    else if (name == "dh") g.dh = v;
    else if (name == "dh_top") g.dh_top = v;
    else if (name == "dh_side") g.dh_side = v;
    else if (name == "r1") g.r1 = v;
    else if (name == "r2") g.r2 = v;
    else if (name == "trench_depth") g.trench_depth = v;
    else if (name == "undercut_x") g.undercut_x = v;
    else if (name == "undercut_beta") g.undercut_beta = v;
    else if (name == "film_thickness") g.film_thickness = v;
    else if (name == "exposed_length") g.exposed_length = v;
    else if (name == "gap") g.gap = v;
    else if (name == "eps_substrate") g.eps_substrate = v;
    else if (name == "eps_oxide") g.eps_oxide = v;
    else if (name == "domain_scale") g.domain_scale = v;
    else throw ValidationError("unknown sweep axis '" + name + "'");
}

}  // namespace qsurf
