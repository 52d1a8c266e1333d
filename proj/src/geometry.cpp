#include "polymp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "polymp/error.hpp"

namespace polymp::geometry {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <typename Fn>
LinearRing map_ring(const LinearRing& ring, Fn&& fn) {
  std::vector<Point2> out;
  out.reserve(ring.size());
  for (const Point2& p : ring.vertices()) out.push_back(fn(p));
  return LinearRing(std::move(out));
}

template <typename Fn>
Polygon map_polygon(const Polygon& poly, Fn&& fn) {
  std::vector<LinearRing> holes;
  holes.reserve(poly.holes.size());
  for (const LinearRing& h : poly.holes) holes.push_back(map_ring(h, fn));
  return Polygon{map_ring(poly.exterior, fn), std::move(holes)};
}

double line_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  return std::abs(dx * (p.y - a.y) - dy * (p.x - a.x)) / len;
}

}  // namespace

LinearRing::LinearRing(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    fail(ErrorCode::RingTooShort,
         "ring has " + std::to_string(vertices_.size()) + " vertices, need at least 3");
  }
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Point2& p = vertices_[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorCode::InvalidArgument, "non-finite coordinate at vertex " + std::to_string(i));
    }
    if (p == vertices_[(i + 1) % vertices_.size()]) {
      fail(ErrorCode::InvalidArgument, "consecutive duplicate vertex at " + std::to_string(i));
    }
  }
}

std::size_t Polygon::vertex_count() const noexcept {
  std::size_t n = exterior.size();
  for (const LinearRing& h : holes) n += h.size();
  return n;
}

std::string_view transform_code(TransformKind kind) {
  switch (kind) {
    case TransformKind::Original: return "O";
    case TransformKind::Rotated: return "R";
    case TransformKind::Scaled: return "SC";
    case TransformKind::Sheared: return "SH";
  }
  return "?";
}

TransformKind transform_from_code(std::string_view code) {
  if (code == "O") return TransformKind::Original;
  if (code == "R") return TransformKind::Rotated;
  if (code == "SC") return TransformKind::Scaled;
  if (code == "SH") return TransformKind::Sheared;
  fail(ErrorCode::InvalidArgument, "unknown transform tag '" + std::string(code) + "'");
}

BoundingBox bounding_box(const Polygon& poly) {
  BoundingBox box{poly.exterior[0].x, poly.exterior[0].y, poly.exterior[0].x,
                  poly.exterior[0].y};
  auto visit = [&box](const LinearRing& ring) {
    for (const Point2& p : ring.vertices()) {
      box.min_x = std::min(box.min_x, p.x);
      box.min_y = std::min(box.min_y, p.y);
      box.max_x = std::max(box.max_x, p.x);
      box.max_y = std::max(box.max_y, p.y);
    }
  };
  visit(poly.exterior);
  for (const LinearRing& h : poly.holes) visit(h);
  return box;
}

Point2 centroid(const Polygon& poly) {
  double sx = 0.0;
  double sy = 0.0;
  auto visit = [&](const LinearRing& ring) {
    for (const Point2& p : ring.vertices()) {
      sx += p.x;
      sy += p.y;
    }
  };
  visit(poly.exterior);
  for (const LinearRing& h : poly.holes) visit(h);
  const double n = static_cast<double>(poly.vertex_count());
  return {sx / n, sy / n};
}

Polygon rotate(const Polygon& poly, double degrees) {
  if (!std::isfinite(degrees)) fail(ErrorCode::InvalidArgument, "rotation angle not finite");
  const Point2 c = centroid(poly);
  const double cs = std::cos(degrees * kDegToRad);
  const double sn = std::sin(degrees * kDegToRad);
  return map_polygon(poly, [&](const Point2& p) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    return Point2{c.x + cs * dx - sn * dy, c.y + sn * dx + cs * dy};
  });
}

Polygon scale(const Polygon& poly, double fx, double fy) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    fail(ErrorCode::NonPositiveFactor,
         "scale factors must be positive, got " + std::to_string(fx) + ", " + std::to_string(fy));
  }
  const Point2 c = centroid(poly);
  return map_polygon(poly, [&](const Point2& p) {
    return Point2{c.x + fx * (p.x - c.x), c.y + fy * (p.y - c.y)};
  });
}

Polygon shear(const Polygon& poly, double ax_degrees, double ay_degrees) {
  if (!(std::abs(ax_degrees) < 90.0) || !(std::abs(ay_degrees) < 90.0)) {
    fail(ErrorCode::DegenerateShear, "shear angles must lie strictly inside (-90, 90)");
  }
  const Point2 c = centroid(poly);
  const double tx = std::tan(ax_degrees * kDegToRad);
  const double ty = std::tan(ay_degrees * kDegToRad);
  return map_polygon(poly, [&](const Point2& p) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double sx = dx + tx * dy;
    const double sy = dy + ty * sx;
    return Point2{c.x + sx, c.y + sy};
  });
}

Polygon normalize(const Polygon& poly) {
  const BoundingBox box = bounding_box(poly);
  const double w = box.max_x - box.min_x;
  const double h = box.max_y - box.min_y;
  const double extent = std::max(w, h);
  if (!(extent > 0.0)) fail(ErrorCode::ZeroExtent, "polygon bounding box is a single point");
  const double s = 2.0 / extent;
  const double cx = 0.5 * (box.min_x + box.max_x);
  const double cy = 0.5 * (box.min_y + box.max_y);
  return map_polygon(poly, [&](const Point2& p) {
    return Point2{std::clamp((p.x - cx) * s, -1.0, 1.0), std::clamp((p.y - cy) * s, -1.0, 1.0)};
  });
}

std::vector<std::size_t> simplify_ring_indices(std::span<const Point2> ring, double tolerance) {
  const std::size_t n = ring.size();
  if (n == 0) return {};
  // Closed walk 0..n with index n standing for vertex 0 again.
  auto at = [&](std::size_t i) -> const Point2& { return ring[i == n ? 0 : i]; };
  std::vector<char> keep(n + 1, 0);
  keep[0] = keep[n] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    double best = -1.0;
    std::size_t best_k = lo;
    for (std::size_t k = lo + 1; k < hi; ++k) {
      const double d = line_distance(at(k), at(lo), at(hi));
      if (d > best) {
        best = d;
        best_k = k;
      }
    }
    if (best_k != lo && best > tolerance) {
      keep[best_k] = 1;
      stack.emplace_back(lo, best_k);
      stack.emplace_back(best_k, hi);
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(i);
  }
  return out;
}

Polygon simplify_dp(const Polygon& poly, double tolerance) {
  if (!(tolerance >= 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be >= 0");
  auto simplify_ring = [tolerance](const LinearRing& ring) {
    std::vector<Point2> kept;
    for (std::size_t i : simplify_ring_indices(ring.vertices(), tolerance)) {
      kept.push_back(ring[i]);
    }
    return kept;
  };
  std::vector<Point2> exterior = simplify_ring(poly.exterior);
  if (exterior.size() < 3) {
    fail(ErrorCode::ExteriorCollapsed,
         "exterior ring collapsed to " + std::to_string(exterior.size()) + " vertices");
  }
  std::vector<LinearRing> holes;
  for (const LinearRing& h : poly.holes) {
    std::vector<Point2> kept = simplify_ring(h);
    if (kept.size() >= 3) holes.emplace_back(std::move(kept));
  }
  return Polygon{LinearRing(std::move(exterior)), std::move(holes)};
}

}  // namespace polymp::geometry
