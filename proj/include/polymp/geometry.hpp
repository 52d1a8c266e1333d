#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace polymp::geometry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Closed ring stored without repeating the first vertex at the end.
// Construction enforces: >= 3 vertices, finite coordinates, and no two
// consecutive vertices (including last -> first) identical.
class LinearRing {
 public:
  explicit LinearRing(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  const Point2& operator[](std::size_t i) const { return vertices_[i]; }

  friend bool operator==(const LinearRing&, const LinearRing&) = default;

 private:
  std::vector<Point2> vertices_;
};

struct Polygon {
  LinearRing exterior;
  std::vector<LinearRing> holes;

  std::size_t ring_count() const noexcept { return 1 + holes.size(); }
  std::size_t vertex_count() const noexcept;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

enum class TransformKind { Original, Rotated, Scaled, Sheared };

std::string_view transform_code(TransformKind kind);          // "O", "R", "SC", "SH"
TransformKind transform_from_code(std::string_view code);     // throws InvalidArgument

struct BoundingBox {
  double min_x, min_y, max_x, max_y;
};

BoundingBox bounding_box(const Polygon& poly);

// Unweighted mean of every stored vertex across all rings.
Point2 centroid(const Polygon& poly);

// Counter-clockwise positive, about centroid(poly).
Polygon rotate(const Polygon& poly, double degrees);

// Per-axis scale about centroid(poly). Throws NonPositiveFactor.
Polygon scale(const Polygon& poly, double fx, double fy);

// About centroid(poly): x-shear by tan(ax) first, then y-shear by tan(ay)
// using the already sheared x. Throws DegenerateShear when |angle| >= 90.
Polygon shear(const Polygon& poly, double ax_degrees, double ay_degrees);

// Uniform scale + translation fitting the bounding box into [-1, 1]^2 with the
// longer axis spanning it exactly. Throws ZeroExtent.
Polygon normalize(const Polygon& poly);

// Douglas-Peucker on each ring independently. The first stored vertex of a
// ring anchors the recursion. Holes that collapse below 3 vertices are dropped;
// a collapsed exterior throws ExteriorCollapsed.
Polygon simplify_dp(const Polygon& poly, double tolerance);

// Indices (ascending) of the vertices of `ring` kept by Douglas-Peucker.
std::vector<std::size_t> simplify_ring_indices(std::span<const Point2> ring,
                                               double tolerance);

// ---- text formats -------------------------------------------------------

// `POLYGON ((x y, ...), (x y, ...))`. A closing vertex equal to the first is
// stripped. Throws ParseError (with byte offset) or RingTooShort.
Polygon parse_wkt(std::string_view text);

// Shortest round-trip decimals, rings written closed.
std::string to_wkt(const Polygon& poly);

struct LabeledPolygon {
  Polygon polygon;
  std::string label;
};

// FeatureCollection of Polygon features. Numeric labels are converted to
// their decimal text. Throws ParseError, UnsupportedGeometry, MissingLabel.
std::vector<LabeledPolygon> parse_geojson_features(std::string_view text,
                                                   std::string_view label_key = "label");

std::string to_geojson(std::span<const LabeledPolygon> features,
                       std::string_view label_key = "label");

}  // namespace polymp::geometry
