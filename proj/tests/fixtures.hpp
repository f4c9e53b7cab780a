#pragma once

// Scene builders shared by unit tests and the acceptance runner.

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "topomap/geodata.hpp"
#include "topomap/scenario.hpp"

namespace fixtures {

using topomap::geo::RawDataset;

struct NodeSpec {
  std::string id;
  double x;
  double y;
};

struct WaySpec {
  std::string id;
  std::vector<std::string> nodes;
  double speed_kmh = 30.0;
  bool oneway = false;
};

struct PoiSpec {
  std::string id;
  double x;
  double y;
};

RawDataset make_raw(const std::vector<NodeSpec>& nodes, const std::vector<WaySpec>& ways,
                    const std::vector<PoiSpec>& pois = {});

// Square A(0,0) B(300,0) C(300,300) D(0,300); AB and CD at 60 km/h, BC and DA at
// 20 km/h; H1 at (-20,-20) beside A and H2 at (320,320) beside C.
RawDataset square_two_poi();

// 5x5 grid, 100 m spacing, 30 km/h. Column x=400 and row y=400 form a
// 90 km/h corridor. H1 sits on (0,0), H2 on (400,0). Node ids "n<i>_<j>"
// with i the column and j the row; way ids "h<i>_<j>" (i..i+1 along row j)
// and "v<i>_<j>" (j..j+1 along column i).
RawDataset grid_corridor();

// Segment ids of the corridor in the segmented grid_corridor network.
std::vector<topomap::SegmentId> corridor_segments(const topomap::geo::SegmentedNetwork& net);

// Unit square (200 m) with one POI exactly on each corner.
RawDataset corner_square();

// 5x5 grid, 100 m spacing, 30 km/h, one POI at the center intersection.
RawDataset single_poi_grid();

// 9x5 grid (800 x 400 m) with two POIs clustered on the west edge.
RawDataset placement_scene();

topomap::scenario::ScenarioPtr base_scenario(const RawDataset& raw, const topomap::field::FieldParams& params = {});

}  // namespace fixtures
