#include "fixtures.hpp"

#include <stdexcept>

namespace fixtures {

using topomap::geo::RawNode;
using topomap::geo::RawPoi;
using topomap::geo::RawWay;

RawDataset make_raw(const std::vector<NodeSpec>& nodes, const std::vector<WaySpec>& ways,
                    const std::vector<PoiSpec>& pois) {
  RawDataset raw;
  for (const auto& n : nodes) raw.nodes.push_back(RawNode{n.id, {n.x, n.y}});
  raw.rebuild_indices();
  for (const auto& w : ways) {
    RawWay way{w.id, {}, w.oneway, w.speed_kmh};
    for (const auto& id : w.nodes) {
      auto it = raw.node_index.find(id);
      if (it == raw.node_index.end()) throw std::invalid_argument("fixture: unknown node " + id);
      way.nodes.push_back(it->second);
    }
    raw.ways.push_back(std::move(way));
  }
  for (const auto& p : pois) raw.pois.push_back(RawPoi{p.id, p.id, {p.x, p.y}});
  raw.rebuild_indices();
  raw.validate();
  return raw;
}

RawDataset square_two_poi() {
  return make_raw({{"A", 0, 0}, {"B", 300, 0}, {"C", 300, 300}, {"D", 0, 300}},
                  {{"AB", {"A", "B"}, 60}, {"BC", {"B", "C"}, 20}, {"CD", {"C", "D"}, 60}, {"DA", {"D", "A"}, 20}},
                  {{"H1", -20, -20}, {"H2", 320, 320}});
}

namespace {

std::string node_id(int i, int j) { return "n" + std::to_string(i) + "_" + std::to_string(j); }

void add_grid(std::vector<NodeSpec>& nodes, std::vector<WaySpec>& ways, int cols, int rows, double spacing,
              const auto& speed) {
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < cols; ++i) nodes.push_back({node_id(i, j), i * spacing, j * spacing});
  }
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i + 1 < cols; ++i) {
      const std::string id = "h" + std::to_string(i) + "_" + std::to_string(j);
      ways.push_back({id, {node_id(i, j), node_id(i + 1, j)}, speed(id)});
    }
  }
  for (int i = 0; i < cols; ++i) {
    for (int j = 0; j + 1 < rows; ++j) {
      const std::string id = "v" + std::to_string(i) + "_" + std::to_string(j);
      ways.push_back({id, {node_id(i, j), node_id(i, j + 1)}, speed(id)});
    }
  }
}

bool is_corridor(const std::string& way_id) { return way_id.rfind("v4_", 0) == 0 || way_id.ends_with("_4") && way_id[0] == 'h'; }

}  // namespace

RawDataset grid_corridor() {
  std::vector<NodeSpec> nodes;
  std::vector<WaySpec> ways;
  add_grid(nodes, ways, 5, 5, 100.0, [](const std::string& id) { return is_corridor(id) ? 90.0 : 30.0; });
  return make_raw(nodes, ways, {{"H1", 0, 0}, {"H2", 400, 0}});
}

std::vector<topomap::SegmentId> corridor_segments(const topomap::geo::SegmentedNetwork& net) {
  const RawDataset raw = grid_corridor();
  std::vector<topomap::SegmentId> out;
  for (const auto& s : net.segments) {
    if (is_corridor(raw.ways.at(s.way).id)) out.push_back(s.id);
  }
  return out;
}

RawDataset corner_square() {
  return make_raw({{"A", 0, 0}, {"B", 200, 0}, {"C", 200, 200}, {"D", 0, 200}},
                  {{"AB", {"A", "B"}}, {"BC", {"B", "C"}}, {"CD", {"C", "D"}}, {"DA", {"D", "A"}}},
                  {{"PA", 0, 0}, {"PB", 200, 0}, {"PC", 200, 200}, {"PD", 0, 200}});
}

RawDataset single_poi_grid() {
  std::vector<NodeSpec> nodes;
  std::vector<WaySpec> ways;
  add_grid(nodes, ways, 5, 5, 100.0, [](const std::string&) { return 30.0; });
  return make_raw(nodes, ways, {{"H", 200, 200}});
}

RawDataset placement_scene() {
  std::vector<NodeSpec> nodes;
  std::vector<WaySpec> ways;
  add_grid(nodes, ways, 9, 5, 100.0, [](const std::string&) { return 30.0; });
  return make_raw(nodes, ways, {{"H1", 0, 100}, {"H2", 100, 300}});
}

topomap::scenario::ScenarioPtr base_scenario(const RawDataset& raw, const topomap::field::FieldParams& params) {
  return topomap::scenario::Scenario::create("base", topomap::scenario::build_world(raw), params);
}

}  // namespace fixtures
