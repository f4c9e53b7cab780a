#pragma once

// Planar subdivision of the road network and nearest-intersection lookup.

#include <optional>
#include <span>
#include <vector>

#include "topomap/geodata.hpp"
#include "topomap/types.hpp"

namespace topomap::field {

// Thrown by extract_faces when two segment geometries cross away from a shared
// intersection.
class NonPlanarError : public Error {
 public:
  NonPlanarError(SegmentId a, SegmentId b);
  SegmentId first() const { return a_; }
  SegmentId second() const { return b_; }

 private:
  SegmentId a_;
  SegmentId b_;
};

struct Face {
  std::vector<VertexId> boundary;    // intersection cycle in traversal order
  std::vector<Point> polygon;        // full geometry including polyline interior points
  std::vector<VertexId> candidates;  // unique boundary intersections, ascending
  double signed_area = 0.0;
  BoundingBox box;
  bool bounded = false;
};

class FaceSet {
 public:
  FaceSet() = default;
  explicit FaceSet(std::vector<Face> faces);

  std::span<const Face> faces() const { return faces_; }
  const Face& face(std::size_t id) const { return faces_[id]; }
  std::size_t size() const { return faces_.size(); }
  std::size_t bounded_count() const;
  // Cycle with the most negative signed area, if any.
  std::optional<std::size_t> outer_face() const { return outer_; }

  // Smallest bounded face containing `p`; nullopt for the outer face.
  std::optional<std::size_t> locate(Point p) const;
  // Bounded faces that have `v` on their boundary.
  std::vector<std::size_t> faces_incident(VertexId v) const;

 private:
  std::vector<Face> faces_;
  std::optional<std::size_t> outer_;
  // Uniform bucket grid over bounded-face bounding boxes.
  BoundingBox grid_box_;
  double cell_ = 1.0;
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
};

bool point_in_polygon(Point p, std::span<const Point> polygon);
double signed_area(std::span<const Point> polygon);

// Half-edge traversal; at each vertex the walk continues on the outgoing edge
// that is next clockwise from the reverse of the incoming edge, so bounded
// faces come out counter-clockwise (positive area). Throws NonPlanarError.
FaceSet extract_faces(const geo::SegmentedNetwork& net);

// Throws NonPlanarError on the first offending pair.
void check_planar(const geo::SegmentedNetwork& net);

// Bucket grid over intersection positions for k-nearest queries.
class PointIndex {
 public:
  PointIndex() = default;
  explicit PointIndex(std::span<const Point> points);

  // Up to k points within max_radius of p, ordered by (distance, id).
  std::vector<VertexId> nearest(Point p, std::size_t k, double max_radius) const;
  void nearest(Point p, std::size_t k, double max_radius, std::vector<VertexId>& out,
               std::vector<std::pair<double, VertexId>>& scratch) const;

 private:
  std::vector<Point> points_;
  BoundingBox box_;
  double cell_ = 1.0;
  long cols_ = 0;
  long rows_ = 0;
  std::vector<std::vector<VertexId>> cells_;
};

}  // namespace topomap::field
