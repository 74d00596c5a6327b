#pragma once

// Robust 2D geometric predicates: orientation and in-circle tests with a
// floating-point filter and an exact expansion-arithmetic fallback
// (Shewchuk-style nonoverlapping expansions, products via FMA).

#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

namespace qsurf::detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;

// |a| >= |b| is NOT required; full two-sum.
inline void two_sum(double a, double b, double& hi, double& lo) {
    hi = a + b;
    const double bv = hi - a;
    const double av = hi - bv;
    lo = (a - av) + (b - bv);
}

inline void two_diff(double a, double b, double& hi, double& lo) {
    two_sum(a, -b, hi, lo);
}

inline void two_product(double a, double b, double& hi, double& lo) {
    hi = a * b;
    lo = std::fma(a, b, -hi);
}

// Expansion: components in increasing magnitude, nonoverlapping.
using Expansion = std::vector<double>;

inline Expansion expansion_from(double hi, double lo) {
    Expansion e;
    if (lo != 0.0) e.push_back(lo);
    e.push_back(hi);
    return e;
}

// grow-expansion then compress zeros (Shewchuk GROW-EXPANSION-ZEROELIM).
inline Expansion grow_expansion(const Expansion& e, double b) {
    Expansion h;
    h.reserve(e.size() + 1);
    double q = b;
    for (double ei : e) {
        double sum, err;
        two_sum(q, ei, sum, err);
        if (err != 0.0) h.push_back(err);
        q = sum;
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

inline Expansion expansion_sum(const Expansion& e, const Expansion& f) {
    Expansion h = e;
    for (double fi : f) h = grow_expansion(h, fi);
    return h;
}

inline Expansion scale_expansion(const Expansion& e, double b) {
    Expansion h;
    h.reserve(2 * e.size());
    for (double ei : e) {
        double phi, plo;
        two_product(ei, b, phi, plo);
        if (plo != 0.0) h.push_back(plo);
        h = grow_expansion(h, phi);
    }
    if (h.empty()) h.push_back(0.0);
    return h;
}

inline Expansion negate(Expansion e) {
    for (double& v : e) v = -v;
    return e;
}

inline double estimate(const Expansion& e) {
    double s = 0.0;
    for (double v : e) s += v;
    return s;
}

inline int sign_of(const Expansion& e) {
    // Most significant component carries the sign.
    for (auto it = e.rbegin(); it != e.rend(); ++it) {
        if (*it > 0.0) return 1;
        if (*it < 0.0) return -1;
    }
    return 0;
}

// Exact product of two 2-term expansions (a1,a0)*(b1,b0).
inline Expansion product22(double a1, double a0, double b1, double b0) {
    double hi, lo;
    two_product(a0, b0, hi, lo);
    Expansion r = expansion_from(hi, lo);
    two_product(a0, b1, hi, lo);
    r = expansion_sum(r, expansion_from(hi, lo));
    two_product(a1, b0, hi, lo);
    r = expansion_sum(r, expansion_from(hi, lo));
    two_product(a1, b1, hi, lo);
    r = expansion_sum(r, expansion_from(hi, lo));
    return r;
}

inline int orient2d_exact(double ax, double ay, double bx, double by,
                          double cx, double cy) {
    double acx1, acx0, acy1, acy0, bcx1, bcx0, bcy1, bcy0;
    two_diff(ax, cx, acx1, acx0);
    two_diff(ay, cy, acy1, acy0);
    two_diff(bx, cx, bcx1, bcx0);
    two_diff(by, cy, bcy1, bcy0);
    Expansion t1 = product22(acx1, acx0, bcy1, bcy0);
    Expansion t2 = product22(acy1, acy0, bcx1, bcx0);
    return sign_of(expansion_sum(t1, negate(std::move(t2))));
}

// > 0 if a,b,c counterclockwise; < 0 clockwise; 0 collinear.
inline int orient2d(double ax, double ay, double bx, double by, double cx,
                    double cy) {
    const double detl = (ax - cx) * (by - cy);
    const double detr = (ay - cy) * (bx - cx);
    const double det = detl - detr;
    double detsum;
    if (detl > 0.0) {
        if (detr <= 0.0) return det > 0 ? 1 : (det < 0 ? -1 : 0);
        detsum = detl + detr;
    } else if (detl < 0.0) {
        if (detr >= 0.0) return det > 0 ? 1 : (det < 0 ? -1 : 0);
        detsum = -detl - detr;
    } else {
        return det > 0 ? 1 : (det < 0 ? -1 : 0);
    }
    const double errbound = (3.0 + 16.0 * kEps) * kEps * detsum;
    if (det > errbound || -det > errbound) return det > 0 ? 1 : -1;
    return orient2d_exact(ax, ay, bx, by, cx, cy);
}

inline int incircle_exact(double ax, double ay, double bx, double by,
                          double cx, double cy, double dx, double dy) {
    double adx1, adx0, ady1, ady0;
    double bdx1, bdx0, bdy1, bdy0;
    double cdx1, cdx0, cdy1, cdy0;
    two_diff(ax, dx, adx1, adx0);
    two_diff(ay, dy, ady1, ady0);
    two_diff(bx, dx, bdx1, bdx0);
    two_diff(by, dy, bdy1, bdy0);
    two_diff(cx, dx, cdx1, cdx0);
    two_diff(cy, dy, cdy1, cdy0);

    auto lift = [](double x1, double x0, double y1, double y0) {
        return expansion_sum(product22(x1, x0, x1, x0),
                             product22(y1, y0, y1, y0));
    };
    auto cross = [](double px1, double px0, double py1, double py0,
                    double qx1, double qx0, double qy1, double qy0) {
        return expansion_sum(
            product22(px1, px0, qy1, qy0),
            negate(product22(py1, py0, qx1, qx0)));
    };
    auto mul = [](const Expansion& e, const Expansion& f) {
        Expansion r{0.0};
        for (double fi : f) r = expansion_sum(r, scale_expansion(e, fi));
        return r;
    };

    const Expansion la = lift(adx1, adx0, ady1, ady0);
    const Expansion lb = lift(bdx1, bdx0, bdy1, bdy0);
    const Expansion lc = lift(cdx1, cdx0, cdy1, cdy0);
    const Expansion xbc =
        cross(bdx1, bdx0, bdy1, bdy0, cdx1, cdx0, cdy1, cdy0);
    const Expansion xca =
        cross(cdx1, cdx0, cdy1, cdy0, adx1, adx0, ady1, ady0);
    const Expansion xab =
        cross(adx1, adx0, ady1, ady0, bdx1, bdx0, bdy1, bdy0);

    Expansion det = mul(la, xbc);
    det = expansion_sum(det, mul(lb, xca));
    det = expansion_sum(det, mul(lc, xab));
    return sign_of(det);
}

// > 0 if d strictly inside the circumcircle of CCW triangle (a,b,c).
inline int incircle(double ax, double ay, double bx, double by, double cx,
                    double cy, double dx, double dy) {
    const double adx = ax - dx, ady = ay - dy;
    const double bdx = bx - dx, bdy = by - dy;
    const double cdx = cx - dx, cdy = cy - dy;

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double alift = adx * adx + ady * ady;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double blift = bdx * bdx + bdy * bdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double clift = cdx * cdx + cdy * cdy;

    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                       clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double errbound = (10.0 + 96.0 * kEps) * kEps * permanent;
    if (det > errbound || -det > errbound) return det > 0 ? 1 : -1;
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy);
}

}  // namespace qsurf::detail
