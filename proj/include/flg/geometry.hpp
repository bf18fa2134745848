#pragma once

#include <optional>
#include <span>
#include <vector>

namespace flg::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// Unit vector at angle theta and its left normal.
Vec2 direction(double theta);
inline Vec2 left_normal(Vec2 d) { return {-d.y, d.x}; }

/// Convex polygon, counter-clockwise, no repeated closing vertex.
using Polygon = std::vector<Vec2>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct Box {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    Vec2 center() const { return {(xmin + xmax) / 2, (ymin + ymax) / 2}; }
    friend bool operator==(const Box&, const Box&) = default;
};

double signed_area(std::span<const Vec2> poly);
Vec2 centroid(std::span<const Vec2> poly);
bool is_convex_ccw(std::span<const Vec2> poly);

Polygon translated(std::span<const Vec2> poly, Vec2 offset);

/// Rectangle centered at `center` with half extents along the local axes
/// (cos yaw, sin yaw) and its left normal.
Polygon oriented_rect(Vec2 center, double half_u, double half_v, double yaw);

/// Rectangle given by local-frame bounds [u0,u1] x [v0,v1] around `origin`
/// with the u axis pointing along `u`.
Polygon frame_rect(Vec2 origin, Vec2 u, double u0, double u1, double v0, double v1);

Interval project(std::span<const Vec2> poly, Vec2 axis);
Box bounding_box(std::span<const Vec2> poly);

/// Closed containment test for a convex CCW polygon.
bool contains(std::span<const Vec2> poly, Vec2 p, double tol = 0.0);

/// Separating-axis penetration depth: the smallest overlap over all edge
/// normals of both polygons. Positive means interiors intersect by that
/// depth; zero or negative means touching or separated.
double penetration(std::span<const Vec2> a, std::span<const Vec2> b);

/// Intersection of the polygon with the line {p : dot(p, normal) = lateral},
/// returned in coordinates along `dir`. Empty when the line misses.
std::optional<Interval> chord(std::span<const Vec2> poly, Vec2 dir, Vec2 normal, double lateral);

/// Smallest t >= 0 such that `mover` translated by t*dir no longer overlaps
/// `obstacle` in the interior. Assumes the mover lies ahead of or across the
/// obstacle along dir; returns 0 when the lateral shadows do not overlap.
double separation_along(std::span<const Vec2> obstacle, std::span<const Vec2> mover, Vec2 dir,
                        double eps = 1e-12);

/// Andrew monotone chain; returns CCW hull without collinear points.
Polygon convex_hull(std::vector<Vec2> points);

/// Region covered by `poly` while translating it by `dist` along `dir`.
Polygon swept_hull(std::span<const Vec2> poly, Vec2 dir, double dist);

}  // namespace flg::geom
