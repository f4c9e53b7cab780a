#pragma once

// Directed traffic-weighted road graph, per-POI shortest-path trees and
// per-intersection POI assignment.

#include <functional>
#include <span>
#include <vector>

#include "topomap/geodata.hpp"
#include "topomap/types.hpp"

namespace topomap::net {

inline constexpr double kMinAccessTime = 1.0;  // seconds; clamp for Acc(T) at T -> 0

struct Arc {
  VertexId from = 0;
  VertexId to = 0;
  double time_s = 0.0;
  SegmentId segment = 0;
  bool forward = true;  // traverses the segment polyline from -> to
};

// Per-segment state the graph was derived from; kept so edits can re-derive arcs.
struct SegmentState {
  VertexId from = 0;
  VertexId to = 0;
  double length_m = 0.0;
  double speed_kmh = 0.0;
  bool oneway = false;
  bool blocked = false;
};

// Immutable snapshot. Edits return new graphs.
class DirectedRoadGraph {
 public:
  DirectedRoadGraph() = default;
  DirectedRoadGraph(std::size_t vertex_count, std::vector<SegmentState> segments);

  std::size_t vertex_count() const { return vertex_count_; }
  std::span<const Arc> arcs() const { return arcs_; }
  const Arc& arc(ArcId id) const { return arcs_[id]; }
  // Arc ids leaving `v`, in ascending id order.
  std::span<const ArcId> out_arcs(VertexId v) const {
    return {out_index_.data() + out_offset_[v], out_index_.data() + out_offset_[v + 1]};
  }
  std::span<const SegmentState> segments() const { return segments_; }
  // Arcs derived from `segment` (0, 1 or 2).
  std::vector<ArcId> arcs_of(SegmentId segment) const;

  friend bool operator==(const DirectedRoadGraph& a, const DirectedRoadGraph& b);

 private:
  std::size_t vertex_count_ = 0;
  std::vector<SegmentState> segments_;
  std::vector<Arc> arcs_;
  std::vector<std::size_t> out_offset_;
  std::vector<ArcId> out_index_;
};

bool operator==(const Arc& a, const Arc& b);
bool operator==(const SegmentState& a, const SegmentState& b);

// Arc time = length / speed. Two-way segments produce two arcs.
DirectedRoadGraph build_graph(const geo::SegmentedNetwork& net);

// Both throw std::out_of_range for unknown segment ids.
DirectedRoadGraph remove_segment(const DirectedRoadGraph& g, SegmentId segment);
DirectedRoadGraph set_segment_speed(const DirectedRoadGraph& g, SegmentId segment, double speed_kmh);

struct AccessTree {
  PoiId poi = kNoPoi;
  VertexId root = kNoVertex;
  double root_offset_s = 0.0;
  std::vector<double> time_to;      // kInfinity when unreachable
  std::vector<ArcId> parent_arc;    // kNoArc for the root and unreachable vertices

  friend bool operator==(const AccessTree&, const AccessTree&) = default;
};

// Generic single-source Dijkstra over `g` with an arbitrary non-negative arc
// weight; seeds are (vertex, initial cost) pairs.
struct SearchResult {
  std::vector<double> cost;
  std::vector<ArcId> parent_arc;
};
SearchResult dijkstra(const DirectedRoadGraph& g, std::span<const std::pair<VertexId, double>> seeds,
                      const std::function<double(const Arc&)>& weight);

AccessTree shortest_path_tree(const DirectedRoadGraph& g, PoiId poi, const geo::PoiAttachment& attach);

// Acc(T) = max(T, 1 s)^-alpha. Throws std::domain_error on negative or non-finite T
// and on non-positive alpha.
double accessibility(double time_s, double alpha);

struct Assignment {
  PoiId poi = kNoPoi;
  double best_time_s = kInfinity;
  double accessibility = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct AssignmentTable {
  std::vector<Assignment> entries;  // indexed by VertexId

  const Assignment& operator[](VertexId v) const { return entries[v]; }
  std::size_t size() const { return entries.size(); }
  friend bool operator==(const AssignmentTable&, const AssignmentTable&) = default;
};

// Per vertex, the POI with least access time (ties: lowest poi id).
// Throws std::invalid_argument on an empty tree list.
AssignmentTable assign_intersections(std::span<const AccessTree> trees, double alpha);
AssignmentTable assign_intersections(std::span<const AccessTree* const> trees, double alpha);
// All-unassigned table, for scenarios without POIs.
AssignmentTable empty_assignment(std::size_t vertex_count);

}  // namespace topomap::net
