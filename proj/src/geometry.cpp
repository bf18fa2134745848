#include "flg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flg::geom {

Vec2 direction(double theta) { return {std::cos(theta), std::sin(theta)}; }

double signed_area(std::span<const Vec2> poly) {
    double acc = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) acc += cross(poly[i], poly[(i + 1) % n]);
    return acc / 2.0;
}

Vec2 centroid(std::span<const Vec2> poly) {
    const double a = signed_area(poly);
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2 p = poly[i], q = poly[(i + 1) % n];
        const double c = cross(p, q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

bool is_convex_ccw(std::span<const Vec2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n], c = poly[(i + 2) % n];
        if (cross(b - a, c - b) <= 0.0) return false;
    }
    return signed_area(poly) > 0.0;
}

Polygon translated(std::span<const Vec2> poly, Vec2 offset) {
    Polygon out(poly.begin(), poly.end());
    for (auto& p : out) p = p + offset;
    return out;
}

Polygon oriented_rect(Vec2 center, double half_u, double half_v, double yaw) {
    return frame_rect(center, direction(yaw), -half_u, half_u, -half_v, half_v);
}

Polygon frame_rect(Vec2 origin, Vec2 u, double u0, double u1, double v0, double v1) {
    const Vec2 v = left_normal(u);
    return {origin + u0 * u + v0 * v, origin + u1 * u + v0 * v, origin + u1 * u + v1 * v,
            origin + u0 * u + v1 * v};
}

Interval project(std::span<const Vec2> poly, Vec2 axis) {
    Interval r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : poly) {
        const double s = dot(p, axis);
        r.lo = std::min(r.lo, s);
        r.hi = std::max(r.hi, s);
    }
    return r;
}

Box bounding_box(std::span<const Vec2> poly) {
    const Interval xs = project(poly, {1.0, 0.0});
    const Interval ys = project(poly, {0.0, 1.0});
    return {xs.lo, ys.lo, xs.hi, ys.hi};
}

bool contains(std::span<const Vec2> poly, Vec2 p, double tol) {
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n];
        const Vec2 e = b - a;
        const double len = std::hypot(e.x, e.y);
        if (cross(e, p - a) < -tol * len) return false;
    }
    return true;
}

namespace {

double min_overlap_on_edges(std::span<const Vec2> a, std::span<const Vec2> b, double best) {
    for (std::size_t i = 0, n = a.size(); i < n; ++i) {
        const Vec2 e = a[(i + 1) % n] - a[i];
        const double len = std::hypot(e.x, e.y);
        if (len == 0.0) continue;
        const Vec2 axis{-e.y / len, e.x / len};
        const Interval pa = project(a, axis);
        const Interval pb = project(b, axis);
        best = std::min(best, std::min(pa.hi, pb.hi) - std::max(pa.lo, pb.lo));
    }
    return best;
}

}  // namespace

double penetration(std::span<const Vec2> a, std::span<const Vec2> b) {
    double best = std::numeric_limits<double>::infinity();
    best = min_overlap_on_edges(a, b, best);
    best = min_overlap_on_edges(b, a, best);
    return best;
}

std::optional<Interval> chord(std::span<const Vec2> poly, Vec2 dir, Vec2 normal, double lateral) {
    bool hit = false;
    Interval r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    auto add = [&](double s) {
        hit = true;
        r.lo = std::min(r.lo, s);
        r.hi = std::max(r.hi, s);
    };
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2 p = poly[i], q = poly[(i + 1) % n];
        const double lp = dot(p, normal) - lateral;
        const double lq = dot(q, normal) - lateral;
        if (lp * lq > 0.0) continue;
        if (lp == lq) {
            add(dot(p, dir));
            add(dot(q, dir));
            continue;
        }
        const double t = lp / (lp - lq);
        add(dot(p, dir) + t * (dot(q, dir) - dot(p, dir)));
    }
    if (!hit) return std::nullopt;
    return r;
}

double separation_along(std::span<const Vec2> obstacle, std::span<const Vec2> mover, Vec2 dir,
                        double eps) {
    const Vec2 n = left_normal(dir);
    const Interval a = project(obstacle, n);
    const Interval b = project(mover, n);
    const double lo = std::max(a.lo, b.lo);
    const double hi = std::min(a.hi, b.hi);
    if (hi - lo <= eps) return 0.0;

    std::vector<double> samples{lo, hi};
    for (const auto& p : obstacle) {
        const double l = dot(p, n);
        if (l > lo && l < hi) samples.push_back(l);
    }
    for (const auto& p : mover) {
        const double l = dot(p, n);
        if (l > lo && l < hi) samples.push_back(l);
    }

    double t = 0.0;
    for (double x : samples) {
        const auto ca = chord(obstacle, dir, n, x);
        const auto cb = chord(mover, dir, n, x);
        if (ca && cb) t = std::max(t, ca->hi - cb->lo);
    }
    return t;
}

Polygon convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(),
              [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    Polygon hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

Polygon swept_hull(std::span<const Vec2> poly, Vec2 dir, double dist) {
    std::vector<Vec2> pts(poly.begin(), poly.end());
    for (const auto& p : poly) pts.push_back(p + dist * dir);
    return convex_hull(std::move(pts));
}

}  // namespace flg::geom
