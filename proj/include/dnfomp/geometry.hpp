#pragma once

#include <array>
#include <span>
#include <vector>

#include "dnfomp/common.hpp"

namespace dnfomp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct Aabb {
  Vec2 min;
  Vec2 max;
  bool contains(Vec2 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

/// Oriented rectangle; the half extents are along the local x (length) and
/// local y (width) axes.
struct OrientedBox {
  Vec2 center;
  double half_length = 0.0;
  double half_width = 0.0;
  double theta = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Convex polygon, counter-clockwise vertex order.
struct ConvexPolygon {
  std::vector<Vec2> pts;
};

/// Separating-axis overlap test for two convex point sets. Touching contact
/// counts as overlap.
bool convex_overlap(std::span<const Vec2> a, std::span<const Vec2> b);

bool point_in_convex(Vec2 p, std::span<const Vec2> poly);

/// Distance from a point to a convex polygon (0 inside).
double point_convex_distance(Vec2 p, std::span<const Vec2> poly);

/// Validates vertex count, area and convexity; reorients to CCW in place.
void normalize_polygon(ConvexPolygon& poly);

}  // namespace dnfomp
