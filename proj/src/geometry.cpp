#include "dnfomp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dnfomp {

std::array<Vec2, 4> OrientedBox::corners() const {
  const double c = std::cos(theta), s = std::sin(theta);
  const Vec2 ax{c * half_length, s * half_length};
  const Vec2 ay{-s * half_width, c * half_width};
  return {center + ax + ay, center + ax - ay, center - ax - ay,
          center - ax + ay};
}

namespace {

// Projects both hulls on the axis and reports whether a gap exists.
bool separated_on_axis(Vec2 axis, std::span<const Vec2> a,
                       std::span<const Vec2> b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  for (Vec2 p : a) {
    const double d = p.dot(axis);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
  for (Vec2 p : b) {
    const double d = p.dot(axis);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

bool edges_separate(std::span<const Vec2> edges_of, std::span<const Vec2> a,
                    std::span<const Vec2> b) {
  const std::size_t n = edges_of.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = edges_of[(i + 1) % n] - edges_of[i];
    const Vec2 axis{-e.y, e.x};
    if (axis.norm() < 1e-12) continue;
    if (separated_on_axis(axis, a, b)) return true;
  }
  return false;
}

}  // namespace

bool convex_overlap(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) return false;
  if (edges_separate(a, a, b)) return false;
  if (edges_separate(b, a, b)) return false;
  return true;
}

bool point_in_convex(Vec2 p, std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = poly[(i + 1) % n] - poly[i];
    if (e.cross(p - poly[i]) < 0.0) return false;  // CCW assumed
  }
  return true;
}

double point_convex_distance(Vec2 p, std::span<const Vec2> poly) {
  if (point_in_convex(p, poly)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, (p - (a + ab * t)).norm());
  }
  return best;
}

void normalize_polygon(ConvexPolygon& poly) {
  if (poly.pts.size() < 3) {
    throw InvalidInputError("polygon needs at least 3 vertices");
  }
  double area2 = 0.0;
  const std::size_t n = poly.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    area2 += poly.pts[i].cross(poly.pts[(i + 1) % n]);
  }
  if (std::abs(area2) < 1e-12) {
    throw InvalidInputError("polygon is degenerate (collinear vertices)");
  }
  if (area2 < 0.0) std::reverse(poly.pts.begin(), poly.pts.end());
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = poly.pts[(i + 1) % n] - poly.pts[i];
    const Vec2 e1 = poly.pts[(i + 2) % n] - poly.pts[(i + 1) % n];
    if (e0.cross(e1) < -1e-9) {
      throw InvalidInputError("polygon is not convex");
    }
  }
}

}  // namespace dnfomp
