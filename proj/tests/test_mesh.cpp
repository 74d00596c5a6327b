#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "qsurf/mesh.hpp"

using namespace qsurf;

namespace {

// Unit-square fixture: one vacuum region, outer boundary.
CrossSection square_fixture(double side) {
    CrossSection cs;
    cs.box_lo = {0, 0};
    cs.box_hi = {side, side};
    Region r;
    r.polygon = {{0, 0}, {side, 0}, {side, side}, {0, side}};
    r.material = Material::vacuum;
    cs.regions.push_back(r);
    for (std::size_t i = 0; i < 4; ++i)
        cs.boundary_tags.push_back({r.polygon[i], r.polygon[(i + 1) % 4],
                                    BoundaryTag::outer});
    cs.params.eps_substrate = 1;
    cs.params.eps_oxide = 1;
    return cs;
}

SizeField uniform_field(double h) {
    SizeField sf;
    sf.h_min = h;
    sf.h_max = h;
    sf.grading = 1.3;
    return sf;
}

GeometryParams small_base() {
    GeometryParams g;
    g.gap = 2.0;
    return g;
}

}  // namespace

TEST_CASE("uniform square: edge lengths track the size target") {
    const CrossSection cs = square_fixture(100.0);
    const SizeField sf = uniform_field(10.0);
    const Mesh m = generate_mesh(cs, sf);
    audit_mesh(m);
    REQUIRE(m.triangles.size() > 100);
    for (const auto& t : m.triangles) {
        for (int i = 0; i < 3; ++i) {
            const double l =
                dist(m.nodes[t.v[i]], m.nodes[t.v[(i + 1) % 3]]);
            REQUIRE(l >= 5.0 - 1e-9);
            REQUIRE(l <= 20.0 + 1e-9);
        }
    }
    const MeshQuality q = mesh_quality(m);
    REQUIRE(q.min_angle_deg >= 15.0);
}

TEST_CASE("pad-edge geometry: two element layers across the oxide") {
    GeometryParams g = small_base();
    const CrossSection cs = build_cross_section(g);
    SizeField sf = default_size_field(cs);
    sf.h_min = 1.5;
    sf.finalize();
    const Mesh m = generate_mesh(cs, sf);
    audit_mesh(m);
    INFO("elements: " << m.triangles.size());
    REQUIRE(m.triangles.size() > 1000);

    // no oxide triangle may touch both the metal surface and the outer
    // oxide surface: that would be a single layer across the thickness
    for (const OxideStrip& s : cs.strips) {
        auto on_chain = [&](const Vec2& p, const Polyline& chain) {
            for (std::size_t i = 0; i + 1 < chain.size(); ++i)
                if (dist_point_segment(p, chain[i], chain[i + 1]) < 1e-9)
                    return true;
            return false;
        };
        for (const auto& t : m.triangles) {
            if (t.region != (int)s.region_index) continue;
            bool inner = false, outer = false;
            for (int i = 0; i < 3; ++i) {
                const Vec2& p = m.nodes[t.v[i]];
                if (on_chain(p, s.inner)) inner = true;
                if (on_chain(p, s.outer)) outer = true;
            }
            REQUIRE(!(inner && outer));
        }
    }
    const MeshQuality q = mesh_quality(m);
    REQUIRE(q.min_angle_deg >= 15.0);
}

TEST_CASE("unresolvable oxide layer raises MeshFailure") {
    GeometryParams g = small_base();  // dh = 5
    const CrossSection cs = build_cross_section(g);
    SizeField sf = default_size_field(cs);
    sf.h_min = 10.0;
    REQUIRE_THROWS_AS(generate_mesh(cs, sf), MeshFailure);
}

TEST_CASE("adapt: all-zero indicators leave the mesh unchanged") {
    const CrossSection cs = square_fixture(100.0);
    const Mesh m = generate_mesh(cs, uniform_field(10.0));
    const std::vector<double> zeros(m.triangles.size(), 0.0);
    const Mesh m2 = adapt_mesh(m, zeros, 0.2);
    REQUIRE(m2.generation == m.generation + 1);
    REQUIRE(m2.triangles.size() == m.triangles.size());
    REQUIRE(m2.nodes.size() == m.nodes.size());
}

TEST_CASE("adapt: a single hot triangle splits locally") {
    const CrossSection cs = square_fixture(100.0);
    const Mesh m = generate_mesh(cs, uniform_field(10.0));
    std::vector<double> ind(m.triangles.size(), 0.0);
    const std::size_t hot = m.triangles.size() / 2;
    ind[hot] = 1.0;
    const Vec2 hot_cen = (m.nodes[m.triangles[hot].v[0]] +
                          m.nodes[m.triangles[hot].v[1]] +
                          m.nodes[m.triangles[hot].v[2]]) /
                         3.0;
    const Mesh m2 = adapt_mesh(m, ind, 0.05);
    audit_mesh(m2);
    REQUIRE(m2.triangles.size() > m.triangles.size());
    REQUIRE(m2.triangles.size() <= m.triangles.size() + 12);
    // all new nodes lie near the hot triangle
    for (std::size_t n = m.nodes.size(); n < m2.nodes.size(); ++n)
        REQUIRE(dist(m2.nodes[n], hot_cen) < 40.0);
}

TEST_CASE("adapt: refinement nesting and conformity") {
    const CrossSection cs = square_fixture(50.0);
    const Mesh m = generate_mesh(cs, uniform_field(12.0));
    std::vector<double> ind(m.triangles.size());
    for (std::size_t i = 0; i < ind.size(); ++i) ind[i] = double(i % 7);
    const Mesh m2 = adapt_mesh(m, ind, 0.3);
    audit_mesh(m2);
    REQUIRE(m2.generation == m.generation + 1);

    // every child contained in exactly one parent; parent areas add up
    std::vector<double> covered(m.triangles.size(), 0.0);
    for (const auto& c : m2.triangles) {
        const Vec2 cen = (m2.nodes[c.v[0]] + m2.nodes[c.v[1]] +
                          m2.nodes[c.v[2]]) /
                         3.0;
        int parent = -1;
        for (std::size_t p = 0; p < m.triangles.size(); ++p) {
            const auto& t = m.triangles[p];
            const Vec2& a = m.nodes[t.v[0]];
            const Vec2& b = m.nodes[t.v[1]];
            const Vec2& cc = m.nodes[t.v[2]];
            if (orient(a, b, cen) >= 0 && orient(b, cc, cen) >= 0 &&
                orient(cc, a, cen) >= 0) {
                parent = (int)p;
                break;
            }
        }
        REQUIRE(parent >= 0);
        covered[parent] += m2.triangle_area_of(c);
    }
    for (std::size_t p = 0; p < m.triangles.size(); ++p)
        REQUIRE(covered[p] ==
                Catch::Approx(m.triangle_area_of(m.triangles[p])).epsilon(1e-9));
}

TEST_CASE("mesh quality stats") {
    Mesh m;
    m.nodes = {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
    m.triangles.push_back({{0, 1, 2}, 0});
    m.region_materials = {Material::vacuum};
    m.region_eps = {1.0};
    m.region_electrode = {-1};
    REQUIRE(mesh_quality(m).min_angle_deg == Catch::Approx(60.0).margin(1e-9));

    Mesh r;
    r.nodes = {{0, 0}, {1, 0}, {0, 1}};
    r.triangles.push_back({{0, 1, 2}, 0});
    r.region_materials = {Material::vacuum};
    r.region_eps = {1.0};
    r.region_electrode = {-1};
    REQUIRE(mesh_quality(r).min_angle_deg == Catch::Approx(45.0).margin(1e-9));
}

TEST_CASE("min angle survives repeated adaptation") {
    GeometryParams g = small_base();
    g.trench_depth = 60;
    const CrossSection cs = build_cross_section(g);
    Mesh m = generate_mesh(cs, default_size_field(cs));
    for (int k = 0; k < 3; ++k) {
        std::vector<double> ind(m.triangles.size());
        // refine around the pad contact corner, mimicking a field indicator
        Vec2 corner{0, 0};
        for (const CornerMarker& cm : cs.corner_markers)
            if (cm.point.x < cs.mirror_x) corner = cm.point;
        for (std::size_t i = 0; i < ind.size(); ++i) {
            const auto& t = m.triangles[i];
            const Vec2 cen =
                (m.nodes[t.v[0]] + m.nodes[t.v[1]] + m.nodes[t.v[2]]) / 3.0;
            ind[i] = 1.0 / (1.0 + norm2(cen - corner));
        }
        m = adapt_mesh(m, ind, 0.2);
        audit_mesh(m);
    }
    REQUIRE(m.generation == 3);
    const MeshQuality q = mesh_quality(m);
    INFO("min angle after 3 adaptations: " << q.min_angle_deg);
    REQUIRE(q.min_angle_deg >= 15.0);
}

TEST_CASE("determinism: identical inputs give bit-identical meshes") {
    GeometryParams g = small_base();
    g.alpha = 20;
    g.trench_depth = 40;
    const CrossSection cs1 = build_cross_section(g);
    const CrossSection cs2 = build_cross_section(g);
    const Mesh m1 = generate_mesh(cs1, default_size_field(cs1));
    const Mesh m2 = generate_mesh(cs2, default_size_field(cs2));
    std::ostringstream s1, s2;
    write_mesh_ascii(s1, m1);
    write_mesh_ascii(s2, m2);
    REQUIRE(s1.str() == s2.str());

    std::vector<double> ind(m1.triangles.size());
    for (std::size_t i = 0; i < ind.size(); ++i) ind[i] = double((i * 31) % 97);
    std::ostringstream a1, a2;
    write_mesh_ascii(a1, adapt_mesh(m1, ind, 0.15));
    write_mesh_ascii(a2, adapt_mesh(m2, ind, 0.15));
    REQUIRE(a1.str() == a2.str());
}

TEST_CASE("mesh ASCII and VTK exports") {
    const CrossSection cs = square_fixture(30.0);
    const Mesh m = generate_mesh(cs, uniform_field(10.0));
    std::ostringstream os;
    write_mesh_ascii(os, m);
    std::istringstream is(os.str());
    std::string w;
    std::size_t n, t;
    is >> w >> n >> w >> t;
    REQUIRE(n == m.nodes.size());
    REQUIRE(t == m.triangles.size());

    std::ostringstream vtk;
    write_mesh_vtk(vtk, m);
    REQUIRE(vtk.str().find("UNSTRUCTURED_GRID") != std::string::npos);
}
