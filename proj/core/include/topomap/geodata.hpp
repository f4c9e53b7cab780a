#pragma once

// Dataset ingestion: parsing, projection, road segmentation and POI attachment.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topomap/types.hpp"

namespace topomap::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDefaultWalkSpeed = 1.4;  // m/s

enum class Crs { kLocalMeters, kWgs84Degrees };

// Raised for malformed or inconsistent datasets. `field()` names the offending
// location in the document (e.g. "ways[3].nodes[1]"), `offset()` is the byte
// offset for syntax errors.
class DatasetError : public Error {
 public:
  DatasetError(std::string kind, std::string field, const std::string& message,
               std::optional<std::size_t> offset = std::nullopt)
      : Error(std::move(kind), message), field_(std::move(field)), offset_(offset) {}
  const std::string& field() const { return field_; }
  std::optional<std::size_t> offset() const { return offset_; }

 private:
  std::string field_;
  std::optional<std::size_t> offset_;
};

// Time-of-day window in minutes since midnight, "HH:MM-HH:MM".
struct TimeWindow {
  int start_min = 0;
  int end_min = 0;

  static TimeWindow parse(std::string_view text);
  std::string to_string() const;
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct RawNode {
  std::string id;
  Point pos;  // (x, y) in meters, or (lon, lat) in degrees
};

struct RawWay {
  std::string id;
  std::vector<std::size_t> nodes;  // ordinals into RawDataset::nodes
  bool oneway = false;
  double default_speed_kmh = 0.0;
};

struct SpeedOverride {
  std::size_t way = 0;            // ordinal into RawDataset::ways
  std::size_t segment_index = 0;  // segment ordinal along the way after segmentation
  TimeWindow period;
  double speed_kmh = 0.0;
};

struct RawPoi {
  std::string id;
  std::string name;
  Point pos;
};

struct RawDataset {
  Crs crs = Crs::kLocalMeters;
  std::vector<RawNode> nodes;
  std::vector<RawWay> ways;
  std::vector<SpeedOverride> speed_overrides;
  std::vector<RawPoi> pois;
  std::optional<TimeWindow> period;  // default active period, if the file names one
  // Projection origin (lon0, lat0) when converted from wgs84.
  std::optional<Point> origin;

  std::unordered_map<std::string, std::size_t> node_index;
  std::unordered_map<std::string, std::size_t> way_index;

  // Re-checks all invariants; throws DatasetError.
  void validate() const;
  void rebuild_indices();
};

std::string_view to_string(Crs crs);

// Parses the JSON dataset format. Throws DatasetError.
RawDataset parse_dataset(std::string_view text);
std::string serialize_dataset(const RawDataset& raw);

// Best-effort conversion of an OSM XML extract (nodes + highway ways) into a
// wgs84 RawDataset. Untagged speeds fall back to a per-highway-class table.
RawDataset import_osm_xml(std::string_view xml);

// Equirectangular projection about the node centroid. Requires wgs84 input.
RawDataset project(const RawDataset& raw);
Point project_point(Point lonlat, Point origin);
Point unproject_point(Point meters, Point origin);

struct Segment {
  SegmentId id = 0;
  VertexId from = 0;
  VertexId to = 0;
  std::vector<Point> polyline;  // from..to inclusive
  double length_m = 0.0;
  double speed_kmh = 0.0;
  bool oneway = false;
  std::size_t way = 0;
  std::size_t index_in_way = 0;

  double speed_mps() const { return speed_kmh / 3.6; }
};

struct SegmentedNetwork {
  std::vector<Point> intersections;          // indexed by VertexId
  std::vector<std::size_t> intersection_node;  // raw node ordinal per vertex
  std::vector<Segment> segments;             // indexed by SegmentId
  std::optional<TimeWindow> period;
  std::vector<std::string> warnings;

  std::size_t vertex_count() const { return intersections.size(); }
  BoundingBox bounds() const;
};

SegmentedNetwork segment_roads(const RawDataset& raw,
                               std::optional<TimeWindow> period = std::nullopt);

// Inverse of segmentation: one way per segment. Used for round-trip checks.
RawDataset to_raw(const SegmentedNetwork& net);

struct PoiAttachment {
  VertexId intersection = kNoVertex;
  double connector_length_m = 0.0;
  double connector_time_s = 0.0;

  friend bool operator==(const PoiAttachment&, const PoiAttachment&) = default;
};

// Nearest intersection by Euclidean distance; distances within 1e-9 m are
// ties and resolve to the lowest intersection id.
PoiAttachment attach_point(const SegmentedNetwork& net, Point p, double walk_speed);
std::vector<PoiAttachment> attach_pois(const SegmentedNetwork& net,
                                       std::span<const RawPoi> pois,
                                       double walk_speed = kDefaultWalkSpeed);

}  // namespace topomap::geo
