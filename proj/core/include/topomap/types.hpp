#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace topomap {

using VertexId = std::uint32_t;
using SegmentId = std::uint32_t;
using PoiId = std::uint32_t;
using ArcId = std::uint32_t;

inline constexpr PoiId kNoPoi = std::numeric_limits<PoiId>::max();
inline constexpr ArcId kNoArc = std::numeric_limits<ArcId>::max();
inline constexpr VertexId kNoVertex = std::numeric_limits<VertexId>::max();
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Planar position in local meters (x east, y north).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

struct BoundingBox {
  double min_x = kInfinity;
  double min_y = kInfinity;
  double max_x = -kInfinity;
  double max_y = -kInfinity;

  void extend(Point p) {
    min_x = std::fmin(min_x, p.x);
    min_y = std::fmin(min_y, p.y);
    max_x = std::fmax(max_x, p.x);
    max_y = std::fmax(max_y, p.y);
  }
  bool empty() const { return min_x > max_x || min_y > max_y; }
  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

// Base for all errors raised by the engine. `kind()` is a short machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

}  // namespace topomap
