#pragma once

// Constrained Delaunay triangulation kernel: incremental Bowyer-Watson with
// exact predicates, edge recovery by flipping, outside carving and
// Lawson flip passes. Deterministic: fixed insertion order, no randomized
// point placement.

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "qsurf/errors.hpp"
#include "qsurf/geom2d.hpp"

namespace qsurf::detail {

class Delaunay {
public:
    struct Tri {
        std::array<int, 3> v;   // CCW
        std::array<int, 3> n;   // n[i] opposite v[i], -1 = hull
        std::array<bool, 3> c;  // constraint flag on edge opposite v[i]
        bool alive = true;
    };

    std::vector<Vec2> pts;
    std::vector<Tri> tris;

    Delaunay(const Vec2& lo, const Vec2& hi) {
        const double w = hi.x - lo.x;
        const double h = hi.y - lo.y;
        const double m = 4.0 * std::max(w, h) + 1.0;
        pts = {{lo.x - m, lo.y - m},
               {hi.x + m, lo.y - m},
               {hi.x + m, hi.y + m},
               {lo.x - m, hi.y + m}};
        tris.push_back({{0, 1, 2}, {-1, 1, -1}, {false, false, false}, true});
        tris.push_back({{0, 2, 3}, {-1, -1, 0}, {false, false, false}, true});
        v2t_ = {0, 0, 1, 1};
        last_ = 0;
    }

    static constexpr int kSuperVerts = 4;

    int locate(const Vec2& p, int hint = -1) const {
        int t = hint >= 0 && hint < (int)tris.size() && tris[hint].alive
                    ? hint
                    : last_alive();
        const std::size_t cap = 4 * tris.size() + 64;
        for (std::size_t step = 0; step < cap; ++step) {
            const Tri& tr = tris[t];
            bool moved = false;
            for (int i = 0; i < 3; ++i) {
                const Vec2& a = pts[tr.v[(i + 1) % 3]];
                const Vec2& b = pts[tr.v[(i + 2) % 3]];
                if (orient(a, b, p) < 0) {
                    const int nb = tr.n[i];
                    if (nb < 0) throw MeshFailure("locate: point outside hull");
                    t = nb;
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
        }
        throw MeshFailure("locate: walk did not terminate");
    }

    // Inserts p; returns the vertex id, the id of an existing coincident
    // vertex, or -1 when p lies exactly on a constrained/hull edge.
    int insert(const Vec2& p, int hint = -1) {
        const int t0 = locate(p, hint);
        {
            const Tri& tr0 = tris[t0];
            for (int i = 0; i < 3; ++i)
                if (pts[tr0.v[i]] == p) return tr0.v[i];
            for (int i = 0; i < 3; ++i) {
                const Vec2& a = pts[tr0.v[(i + 1) % 3]];
                const Vec2& b = pts[tr0.v[(i + 2) % 3]];
                if (orient(a, b, p) == 0 && (tr0.c[i] || tr0.n[i] < 0))
                    return -1;
            }
        }

        const int vid = (int)pts.size();
        pts.push_back(p);
        v2t_.push_back(-1);

        // grow the cavity of circumcircle-violating triangles
        std::vector<int> cavity{t0};
        std::vector<int> stack{t0};
        if (in_cavity_.size() < tris.size()) in_cavity_.resize(tris.size() + 64, 0);
        in_cavity_[t0] = 1;
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            for (int i = 0; i < 3; ++i) {
                const int nb = tris[t].n[i];
                if (nb < 0 || tris[t].c[i] || in_cavity_[nb]) continue;
                const Tri& tn = tris[nb];
                if (in_circle(pts[tn.v[0]], pts[tn.v[1]], pts[tn.v[2]], p) > 0) {
                    in_cavity_[nb] = 1;
                    cavity.push_back(nb);
                    stack.push_back(nb);
                }
            }
        }
        // a fan triangle against a boundary edge collinear with p would be
        // degenerate: pull the neighbor into the cavity, or reject when the
        // collinear edge is constrained/hull
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t ci = 0; ci < cavity.size(); ++ci) {
                const int t = cavity[ci];
                for (int i = 0; i < 3; ++i) {
                    const int nb = tris[t].n[i];
                    if (nb >= 0 && in_cavity_[nb]) continue;
                    const Vec2& a = pts[tris[t].v[(i + 1) % 3]];
                    const Vec2& b = pts[tris[t].v[(i + 2) % 3]];
                    if (orient(a, b, p) != 0) continue;
                    if (nb < 0 || tris[t].c[i]) {
                        for (int ct : cavity) in_cavity_[ct] = 0;
                        pts.pop_back();
                        v2t_.pop_back();
                        return -1;
                    }
                    in_cavity_[nb] = 1;
                    cavity.push_back(nb);
                    grew = true;
                }
            }
        }

        // cavity boundary edges, CCW as seen from the cavity interior
        struct BEdge {
            int a, b, outer;
            bool c;
        };
        std::vector<BEdge> edges;
        for (int t : cavity) {
            for (int i = 0; i < 3; ++i) {
                const int nb = tris[t].n[i];
                if (nb >= 0 && in_cavity_[nb]) continue;
                edges.push_back({tris[t].v[(i + 1) % 3], tris[t].v[(i + 2) % 3],
                                 nb, tris[t].c[i]});
            }
        }
        for (int t : cavity) {
            tris[t].alive = false;
            in_cavity_[t] = 0;
        }

        std::vector<int> fresh;
        fresh.reserve(edges.size());
        std::map<int, std::pair<int, int>> spokes;  // other vertex -> (tri, edge)
        for (const BEdge& e : edges) {
            Tri nt;
            nt.v = {vid, e.a, e.b};
            nt.n = {e.outer, -1, -1};
            nt.c = {e.c, false, false};
            const int id = make_tri(nt);
            fresh.push_back(id);
            if (e.outer >= 0) repoint(e.outer, id, e.a, e.b);
            // spoke edges: (vid, e.a) is edge index 2, (vid, e.b) is index 1
            for (auto [other, idx] : {std::pair{e.a, 2}, std::pair{e.b, 1}}) {
                auto [it, inserted] = spokes.try_emplace(other, std::pair{id, idx});
                if (!inserted) {
                    auto [jd, ji] = it->second;
                    tris[id].n[idx] = jd;
                    tris[jd].n[ji] = id;
                }
            }
        }
        for (int id : fresh)
            for (int k = 0; k < 3; ++k) v2t_[tris[id].v[k]] = id;
        if (!fresh.empty()) last_ = fresh.front();
        return vid;
    }

    // Mark (recovering by flips when needed) the edge a-b as constrained.
    void constrain(int a, int b) {
        for (std::size_t guard = 0, cap = 4 * tris.size() + 1024;; ++guard) {
            if (guard > cap) throw MeshFailure("constrain: edge recovery stuck");
            auto [t, i] = find_edge(a, b);
            if (t >= 0) {
                set_constraint(t, i, true);
                return;
            }
            auto [ct, ci] = crossing_edge_from(a, b);
            if (ct < 0) throw MeshFailure("constrain: no crossing edge found");
            if (!flip(ct, ci)) {
                // rotate: try the next crossing edge along the segment
                const int nb = tris[ct].n[ci];
                bool advanced = false;
                if (nb >= 0) {
                    for (int k = 0; k < 3 && !advanced; ++k) {
                        const int u = tris[nb].v[(k + 1) % 3];
                        const int w = tris[nb].v[(k + 2) % 3];
                        if (tris[nb].n[k] == ct) continue;
                        if (segments_intersect(pts[a], pts[b], pts[u], pts[w]))
                            advanced = flip(nb, k);
                    }
                }
                if (!advanced)
                    throw MeshFailure("constrain: unflippable crossing edge");
            }
        }
    }

    // Remove everything reachable from the super vertices without crossing
    // constrained edges; the constraint loops must be closed.
    void carve_outside() {
        std::vector<std::uint8_t> outside(tris.size(), 0);
        std::vector<int> stack;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive || outside[t]) continue;
            for (int i = 0; i < 3; ++i)
                if (tris[t].v[i] < kSuperVerts) {
                    outside[t] = 1;
                    stack.push_back((int)t);
                    break;
                }
        }
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            for (int i = 0; i < 3; ++i) {
                const int nb = tris[t].n[i];
                if (nb < 0 || tris[t].c[i] || outside[nb] || !tris[nb].alive)
                    continue;
                outside[nb] = 1;
                stack.push_back(nb);
            }
        }
        for (std::size_t t = 0; t < tris.size(); ++t)
            if (tris[t].alive && outside[t]) tris[t].alive = false;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive) continue;
            for (int i = 0; i < 3; ++i) {
                const int nb = tris[t].n[i];
                if (nb >= 0 && !tris[nb].alive) tris[t].n[i] = -1;
            }
            for (int i = 0; i < 3; ++i) v2t_[tris[t].v[i]] = (int)t;
        }
        last_ = -1;
    }

    // Lawson flip of the edge opposite vertex i of triangle t; false when the
    // quad is not strictly convex or the edge is constrained.
    bool flip(int t, int i) {
        const int nb = tris[t].n[i];
        if (nb < 0 || tris[t].c[i]) return false;
        int j = -1;
        for (int k = 0; k < 3; ++k)
            if (tris[nb].n[k] == t) j = k;
        if (j < 0) throw MeshFailure("flip: broken adjacency");

        const int p = tris[t].v[i];
        const int u = tris[t].v[(i + 1) % 3];
        const int w = tris[t].v[(i + 2) % 3];
        const int q = tris[nb].v[j];
        if (orient(pts[p], pts[u], pts[q]) <= 0) return false;
        if (orient(pts[q], pts[w], pts[p]) <= 0) return false;

        const int tn_u = tris[t].n[(i + 2) % 3];  // across (p,u)
        const int tn_w = tris[t].n[(i + 1) % 3];  // across (w,p)
        const bool tc_u = tris[t].c[(i + 2) % 3];
        const bool tc_w = tris[t].c[(i + 1) % 3];
        // nb is (q, w, u) up to rotation with v[j] = q: v[j+1] = w, v[j+2] = u.
        // Edge opposite v[j+1]=w is (u,q); opposite v[j+2]=u is (q,w).
        const int e_uq_nb = tris[nb].n[(j + 1) % 3];
        const bool c_uq_nb = tris[nb].c[(j + 1) % 3];
        const int e_qw_nb = tris[nb].n[(j + 2) % 3];
        const bool c_qw_nb = tris[nb].c[(j + 2) % 3];

        tris[t].v = {p, u, q};
        tris[t].n = {e_uq_nb, nb, tn_u};
        tris[t].c = {c_uq_nb, false, tc_u};
        tris[nb].v = {p, q, w};
        tris[nb].n = {e_qw_nb, tn_w, t};
        tris[nb].c = {c_qw_nb, tc_w, false};

        repoint(e_uq_nb, t, u, q);
        repoint(tn_w, nb, w, p);
        v2t_[p] = t;
        v2t_[u] = t;
        v2t_[q] = t;
        v2t_[w] = nb;
        return true;
    }

    // Global Lawson pass restoring the (constrained) Delaunay property.
    void delaunay_pass() {
        bool changed = true;
        int rounds = 0;
        while (changed && rounds++ < 64) {
            changed = false;
            for (std::size_t t = 0; t < tris.size(); ++t) {
                if (!tris[t].alive) continue;
                for (int i = 0; i < 3; ++i) {
                    const int nb = tris[t].n[i];
                    if (nb < 0 || tris[t].c[i] || nb < (int)t) continue;
                    int j = -1;
                    for (int k = 0; k < 3; ++k)
                        if (tris[nb].n[k] == (int)t) j = k;
                    if (j < 0) continue;
                    const Tri& a = tris[t];
                    if (in_circle(pts[a.v[0]], pts[a.v[1]], pts[a.v[2]],
                                  pts[tris[nb].v[j]]) > 0) {
                        if (flip((int)t, i)) changed = true;
                    }
                }
            }
        }
    }

    void audit() const {
        for (std::size_t t = 0; t < tris.size(); ++t) {
            const Tri& tr = tris[t];
            if (!tr.alive) continue;
            if (orient(pts[tr.v[0]], pts[tr.v[1]], pts[tr.v[2]]) <= 0)
                throw MeshFailure("audit: non-positive triangle");
            for (int i = 0; i < 3; ++i) {
                const int nb = tr.n[i];
                if (nb < 0) continue;
                if (!tris[nb].alive) throw MeshFailure("audit: dead neighbor");
                bool back = false;
                for (int k = 0; k < 3; ++k)
                    if (tris[nb].n[k] == (int)t) {
                        back = true;
                        if (tris[nb].c[k] != tr.c[i])
                            throw MeshFailure("audit: constraint mismatch");
                    }
                if (!back) throw MeshFailure("audit: asymmetric adjacency");
            }
        }
    }

    int vertex_triangle(int v) const { return v2t_[v]; }

private:
    std::vector<int> v2t_;
    mutable int last_ = 0;
    std::vector<std::uint8_t> in_cavity_;

    int last_alive() const {
        if (last_ >= 0 && last_ < (int)tris.size() && tris[last_].alive)
            return last_;
        for (int i = (int)tris.size() - 1; i >= 0; --i)
            if (tris[i].alive) return i;
        throw MeshFailure("no alive triangles");
    }

    int make_tri(const Tri& t) {
        tris.push_back(t);
        if (in_cavity_.size() < tris.size()) in_cavity_.push_back(0);
        return (int)tris.size() - 1;
    }

    // In triangle `t`, make the edge {a, b} point to `to`.
    void repoint(int t, int to, int a, int b) {
        if (t < 0) return;
        for (int k = 0; k < 3; ++k) {
            const int u = tris[t].v[(k + 1) % 3];
            const int w = tris[t].v[(k + 2) % 3];
            if ((u == a && w == b) || (u == b && w == a)) {
                tris[t].n[k] = to;
                return;
            }
        }
        throw MeshFailure("repoint: edge not found");
    }

    template <typename F>
    bool for_star(int a, F&& visit) const {
        // visit(t, ia) over alive triangles around vertex a; returns true if
        // the full star was covered.
        const int start = v2t_[a];
        if (start < 0 || !tris[start].alive) return false;
        int t = start;
        int guard = 0;
        // forward sweep
        while (guard++ < 4096) {
            int ia = -1;
            for (int i = 0; i < 3; ++i)
                if (tris[t].v[i] == a) ia = i;
            if (ia < 0) return false;
            if (visit(t, ia)) return true;
            const int next = tris[t].n[(ia + 1) % 3];
            if (next < 0) break;
            t = next;
            if (t == start) return true;
        }
        // hull hit: sweep the other way from start
        t = start;
        while (guard++ < 8192) {
            int ia = -1;
            for (int i = 0; i < 3; ++i)
                if (tris[t].v[i] == a) ia = i;
            if (ia < 0) return false;
            const int next = tris[t].n[(ia + 2) % 3];
            if (next < 0) return true;
            t = next;
            int ia2 = -1;
            for (int i = 0; i < 3; ++i)
                if (tris[t].v[i] == a) ia2 = i;
            if (ia2 < 0) return false;
            if (visit(t, ia2)) return true;
        }
        return false;
    }

    std::pair<int, int> find_edge(int a, int b) const {
        int ft = -1, fi = -1;
        for_star(a, [&](int t, int) {
            for (int i = 0; i < 3; ++i) {
                const int u = tris[t].v[(i + 1) % 3];
                const int w = tris[t].v[(i + 2) % 3];
                if ((u == a && w == b) || (u == b && w == a)) {
                    ft = t;
                    fi = i;
                    return true;
                }
            }
            return false;
        });
        return {ft, fi};
    }

    // The star triangle of `a` whose opposite edge is crossed by segment a-b.
    std::pair<int, int> crossing_edge_from(int a, int b) const {
        const Vec2& pa = pts[a];
        const Vec2& pb = pts[b];
        int ft = -1, fi = -1;
        for_star(a, [&](int t, int ia) {
            const int u = tris[t].v[(ia + 1) % 3];
            const int w = tris[t].v[(ia + 2) % 3];
            if (orient(pa, pb, pts[u]) > 0 && orient(pa, pb, pts[w]) < 0 &&
                segments_intersect(pa, pb, pts[u], pts[w])) {
                ft = t;
                fi = ia;
                return true;
            }
            return false;
        });
        return {ft, fi};
    }

    void set_constraint(int t, int i, bool val) {
        tris[t].c[i] = val;
        const int nb = tris[t].n[i];
        if (nb >= 0)
            for (int k = 0; k < 3; ++k)
                if (tris[nb].n[k] == t) tris[nb].c[k] = val;
    }
};

}  // namespace qsurf::detail
