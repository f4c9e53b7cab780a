#include "topomap/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace topomap::net {

bool operator==(const Arc& a, const Arc& b) {
  return a.from == b.from && a.to == b.to && a.time_s == b.time_s && a.segment == b.segment &&
         a.forward == b.forward;
}

bool operator==(const SegmentState& a, const SegmentState& b) {
  return a.from == b.from && a.to == b.to && a.length_m == b.length_m && a.speed_kmh == b.speed_kmh &&
         a.oneway == b.oneway && a.blocked == b.blocked;
}

bool operator==(const DirectedRoadGraph& a, const DirectedRoadGraph& b) {
  return a.vertex_count_ == b.vertex_count_ && a.segments_ == b.segments_ && a.arcs_ == b.arcs_;
}

DirectedRoadGraph::DirectedRoadGraph(std::size_t vertex_count, std::vector<SegmentState> segments)
    : vertex_count_(vertex_count), segments_(std::move(segments)) {
  for (SegmentId s = 0; s < segments_.size(); ++s) {
    const SegmentState& st = segments_[s];
    if (st.blocked) continue;
    if (st.from >= vertex_count_ || st.to >= vertex_count_) {
      throw std::out_of_range("segment " + std::to_string(s) + " references a missing vertex");
    }
    // length [m] * 3.6 / speed [km/h] = seconds
    const double time = st.length_m * 3.6 / st.speed_kmh;
    if (!(time > 0.0) || !std::isfinite(time)) {
      throw std::invalid_argument("segment " + std::to_string(s) + " has non-positive travel time");
    }
    arcs_.push_back({st.from, st.to, time, s, true});
    if (!st.oneway) arcs_.push_back({st.to, st.from, time, s, false});
  }
  out_offset_.assign(vertex_count_ + 1, 0);
  for (const Arc& a : arcs_) ++out_offset_[a.from + 1];
  for (std::size_t v = 0; v < vertex_count_; ++v) out_offset_[v + 1] += out_offset_[v];
  out_index_.resize(arcs_.size());
  std::vector<std::size_t> fill(out_offset_.begin(), out_offset_.end() - 1);
  for (ArcId id = 0; id < arcs_.size(); ++id) out_index_[fill[arcs_[id].from]++] = id;
}

std::vector<ArcId> DirectedRoadGraph::arcs_of(SegmentId segment) const {
  std::vector<ArcId> out;
  for (ArcId id = 0; id < arcs_.size(); ++id) {
    if (arcs_[id].segment == segment) out.push_back(id);
  }
  return out;
}

DirectedRoadGraph build_graph(const geo::SegmentedNetwork& net) {
  std::vector<SegmentState> states;
  states.reserve(net.segments.size());
  for (const geo::Segment& s : net.segments) {
    states.push_back({s.from, s.to, s.length_m, s.speed_kmh, s.oneway, false});
  }
  return DirectedRoadGraph(net.vertex_count(), std::move(states));
}

namespace {

std::vector<SegmentState> checked_copy(const DirectedRoadGraph& g, SegmentId segment) {
  if (segment >= g.segments().size()) {
    throw std::out_of_range("unknown segment id " + std::to_string(segment));
  }
  return {g.segments().begin(), g.segments().end()};
}

}  // namespace

DirectedRoadGraph remove_segment(const DirectedRoadGraph& g, SegmentId segment) {
  auto states = checked_copy(g, segment);
  states[segment].blocked = true;
  return DirectedRoadGraph(g.vertex_count(), std::move(states));
}

DirectedRoadGraph set_segment_speed(const DirectedRoadGraph& g, SegmentId segment, double speed_kmh) {
  auto states = checked_copy(g, segment);
  if (!(speed_kmh > 0.0) || !std::isfinite(speed_kmh)) {
    throw std::invalid_argument("speed must be > 0 km/h");
  }
  states[segment].speed_kmh = speed_kmh;
  return DirectedRoadGraph(g.vertex_count(), std::move(states));
}

SearchResult dijkstra(const DirectedRoadGraph& g, std::span<const std::pair<VertexId, double>> seeds,
                      const std::function<double(const Arc&)>& weight) {
  SearchResult r;
  r.cost.assign(g.vertex_count(), kInfinity);
  r.parent_arc.assign(g.vertex_count(), kNoArc);
  using Entry = std::pair<double, VertexId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (auto [v, c] : seeds) {
    if (v >= g.vertex_count()) throw std::out_of_range("seed vertex out of range");
    if (c < r.cost[v]) {
      r.cost[v] = c;
      queue.push({c, v});
    }
  }
  std::vector<bool> settled(g.vertex_count(), false);
  while (!queue.empty()) {
    auto [c, v] = queue.top();
    queue.pop();
    if (settled[v]) continue;
    settled[v] = true;
    for (ArcId id : g.out_arcs(v)) {
      const Arc& a = g.arc(id);
      const double next = c + weight(a);
      if (next < r.cost[a.to]) {
        r.cost[a.to] = next;
        r.parent_arc[a.to] = id;
        queue.push({next, a.to});
      }
    }
  }
  return r;
}

AccessTree shortest_path_tree(const DirectedRoadGraph& g, PoiId poi, const geo::PoiAttachment& attach) {
  if (attach.intersection >= g.vertex_count()) {
    throw std::out_of_range("attachment references a missing vertex");
  }
  const std::pair<VertexId, double> seed{attach.intersection, attach.connector_time_s};
  SearchResult r = dijkstra(g, {&seed, 1}, [](const Arc& a) { return a.time_s; });
  return {poi, attach.intersection, attach.connector_time_s, std::move(r.cost), std::move(r.parent_arc)};
}

double accessibility(double time_s, double alpha) {
  if (!std::isfinite(time_s) || time_s < 0.0) {
    throw std::domain_error("accessibility: access time must be finite and >= 0");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::domain_error("accessibility: alpha must be > 0");
  return std::pow(std::max(time_s, kMinAccessTime), -alpha);
}

AssignmentTable assign_intersections(std::span<const AccessTree* const> trees, double alpha) {
  if (trees.empty()) throw std::invalid_argument("assign_intersections: no access trees");
  const std::size_t n = trees.front()->time_to.size();
  AssignmentTable table;
  table.entries.assign(n, Assignment{});
  for (const AccessTree* tree : trees) {
    if (tree->time_to.size() != n) throw std::invalid_argument("access trees span different graphs");
    for (VertexId v = 0; v < n; ++v) {
      const double t = tree->time_to[v];
      if (!std::isfinite(t)) continue;
      Assignment& e = table.entries[v];
      if (t < e.best_time_s || (t == e.best_time_s && tree->poi < e.poi)) {
        e.poi = tree->poi;
        e.best_time_s = t;
      }
    }
  }
  for (Assignment& e : table.entries) {
    if (e.poi != kNoPoi) e.accessibility = accessibility(e.best_time_s, alpha);
  }
  return table;
}

AssignmentTable assign_intersections(std::span<const AccessTree> trees, double alpha) {
  std::vector<const AccessTree*> ptrs;
  ptrs.reserve(trees.size());
  for (const AccessTree& t : trees) ptrs.push_back(&t);
  return assign_intersections(std::span<const AccessTree* const>(ptrs), alpha);
}

AssignmentTable empty_assignment(std::size_t vertex_count) {
  AssignmentTable table;
  table.entries.assign(vertex_count, Assignment{});
  return table;
}

}  // namespace topomap::net
