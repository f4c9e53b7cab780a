#pragma once

// Kernels, planar KDE / network KDE baselines and the topology density field.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topomap/faces.hpp"
#include "topomap/geodata.hpp"
#include "topomap/netgraph.hpp"
#include "topomap/types.hpp"

namespace topomap::field {

enum class Kernel { kGaussian, kSigmoid, kParabolic, kNegExp };

// K(0) = 1, non-increasing and non-negative on [0, inf).
// Throws std::domain_error for negative or non-finite u.
double kernel_eval(Kernel k, double u);
std::string_view to_string(Kernel k);
std::optional<Kernel> parse_kernel(std::string_view name);

enum class DensityMode {
  kAmplitudeDecay,  // Acc(v) * K(|v - p| / r), credited to v's winning POI
  kEq4Literal,      // (1/r_a) * K(T(P,H)^-alpha / r_a)
};
enum class Aggregate { kMax, kSum };

std::string_view to_string(DensityMode m);
std::optional<DensityMode> parse_mode(std::string_view name);
std::string_view to_string(Aggregate a);
std::optional<Aggregate> parse_aggregate(std::string_view name);

struct FieldParams {
  Kernel kernel = Kernel::kGaussian;
  double bandwidth_m = 300.0;     // walk-decay radius for amplitude-decay mode
  double bandwidth_acc = 0.003;   // r_a, accessibility units, eq4-literal mode
  double alpha = 1.0;
  double walk_speed = geo::kDefaultWalkSpeed;  // m/s
  DensityMode mode = DensityMode::kAmplitudeDecay;
  Aggregate aggregate = Aggregate::kMax;
  double cutoff_multiple = 3.0;
  std::size_t fallback_k = 8;

  double max_radius() const { return cutoff_multiple * bandwidth_m; }
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  friend bool operator==(const FieldParams&, const FieldParams&) = default;
};

// --- Baselines -------------------------------------------------------------

// sum_i 1/(pi r^2) K(|x_i - s| / r)
double planar_kde(std::span<const Point> events, Point s, Kernel k, double r, double cutoff_multiple = 3.0);

struct NetworkAnchor {
  SegmentId segment = 0;
  double offset_m = 0.0;  // arc length from the segment's `from` end
};

struct EventSet {
  std::vector<Point> points;
  std::vector<std::optional<NetworkAnchor>> anchors;  // parallel to points when snapped
};

// Anchors every event to the closest point on any unblocked segment polyline.
EventSet snap_events(const geo::SegmentedNetwork& net, std::span<const Point> points);

struct NkdeSample {
  SegmentId segment = 0;
  double offset_m = 0.0;
  Point pos;
  double density = 0.0;
};

// Samples every `spacing_m` along each unblocked segment plus its far endpoint;
// density = sum_i 1/r K(d_G(x_i, s) / r) with d_G the network distance in
// meters (directed unless `directed` is false). Throws std::invalid_argument
// for unanchored events.
std::vector<NkdeSample> nkde(const net::DirectedRoadGraph& g, const geo::SegmentedNetwork& net,
                             const EventSet& events, double spacing_m, Kernel k, double r,
                             bool directed = true);

// --- Topology density --------------------------------------------------------

// Read-only view over everything the density evaluation needs. The referenced
// objects must outlive the model.
struct FieldModel {
  std::span<const Point> positions;
  const net::AssignmentTable* assignment = nullptr;
  std::span<const net::AccessTree* const> trees;  // ascending poi id
  const FaceSet* faces = nullptr;
  const PointIndex* index = nullptr;
};

// Boundary intersections of the bounded face containing p, otherwise the
// fallback_k nearest intersections within max_radius.
std::vector<VertexId> candidate_intersections(Point p, const FaceSet& faces, const PointIndex& index,
                                              std::size_t fallback_k, double max_radius);

struct PoiDensity {
  PoiId poi = kNoPoi;
  double density = 0.0;
  VertexId via = kNoVertex;
  double access_time_s = kInfinity;  // eq4-literal only: min over candidates of tree time + walk

  friend bool operator==(const PoiDensity&, const PoiDensity&) = default;
};

struct PointDensity {
  std::vector<PoiDensity> per_poi;  // ascending poi id
  // amplitude-decay: largest density; eq4-literal: shortest access time.
  // kNoPoi when no density is positive.
  PoiId dominant = kNoPoi;
  VertexId via = kNoVertex;  // via-intersection of the dominant POI
  // kMax: the dominant POI's density; kSum: sum over per_poi.
  double value = 0.0;

  const PoiDensity* find(PoiId poi) const;
};

PointDensity topo_density_at(Point p, const FieldModel& model, std::span<const VertexId> candidates,
                             const FieldParams& params);
// Convenience: computes candidates first.
PointDensity topo_density_at(Point p, const FieldModel& model, const FieldParams& params);

// Access time from every POI to p: min over candidates v of tree time(v) + |v - p| / walk.
std::vector<std::pair<PoiId, double>> access_times_at(Point p, const FieldModel& model,
                                                      std::span<const VertexId> candidates,
                                                      double walk_speed);

struct Viewport {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 1.0;
  double max_y = 1.0;
  std::uint32_t width = 1;
  std::uint32_t height = 1;

  // Row 0 is the top (max_y) edge.
  Point pixel_center(std::uint32_t col, std::uint32_t row) const {
    return {min_x + (col + 0.5) * (max_x - min_x) / width, max_y - (row + 0.5) * (max_y - min_y) / height};
  }
  // Continuous pixel coordinates of a world point.
  Point to_pixel(Point p) const {
    return {(p.x - min_x) / (max_x - min_x) * width, (max_y - p.y) / (max_y - min_y) * height};
  }
  std::size_t pixel_count() const { return std::size_t{width} * height; }
  void validate() const;
  friend bool operator==(const Viewport&, const Viewport&) = default;
};

inline constexpr std::size_t kDefaultMaxPixels = 64u * 1024u * 1024u;

struct DensityRaster {
  Viewport viewport;
  FieldParams params;
  std::vector<double> value;   // row-major
  std::vector<PoiId> dominant;  // row-major, kNoPoi when none

  double at(std::uint32_t col, std::uint32_t row) const { return value[std::size_t{row} * viewport.width + col]; }
  PoiId dominant_at(std::uint32_t col, std::uint32_t row) const {
    return dominant[std::size_t{row} * viewport.width + col];
  }
  friend bool operator==(const DensityRaster&, const DensityRaster&) = default;
};

// Worker count from TOPOMAP_THREADS (default: hardware concurrency).
unsigned default_workers();

// Evaluates topo_density_at at every pixel center, rows partitioned across
// `workers` threads. Throws std::length_error above `max_pixels`.
DensityRaster rasterize(const FieldModel& model, const Viewport& viewport, const FieldParams& params,
                        unsigned workers = 0, std::size_t max_pixels = kDefaultMaxPixels);

struct PixelRect {
  std::uint32_t col_begin = 0;
  std::uint32_t row_begin = 0;
  std::uint32_t col_end = 0;  // exclusive
  std::uint32_t row_end = 0;  // exclusive

  bool empty() const { return col_begin >= col_end || row_begin >= row_end; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Re-evaluates, inside `rect`, every pixel whose candidate set satisfies
// `affected`; other pixels keep their current value. Returns the number of
// pixels re-evaluated. Uses raster.params and raster.viewport.
std::size_t rasterize_region(DensityRaster& raster, const FieldModel& model, PixelRect rect,
                             const std::function<bool(std::span<const VertexId>)>& affected,
                             unsigned workers = 0);

// Planar KDE over POI positions at each pixel center (benchmark baseline).
DensityRaster planar_kde_raster(std::span<const Point> events, const Viewport& viewport, Kernel k, double r,
                                unsigned workers = 0);

// TDM1 binary grid: "TDM1", u32 width, u32 height, u32 flags, f32 values, u16 dominant ordinals.
std::string encode_tdm1(const DensityRaster& raster, std::uint32_t flags = 0);
struct DecodedGrid {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t flags = 0;
  std::vector<float> value;
  std::vector<std::uint16_t> dominant;
};
DecodedGrid decode_tdm1(std::string_view bytes);

}  // namespace topomap::field
