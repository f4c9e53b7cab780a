#pragma once

// Seeded synthetic road grids for benchmarks and tests.

#include <cstdint>

#include "topomap/geodata.hpp"

namespace topomap::geo {

struct SyntheticSpec {
  int cols = 21;  // 21 x 13 = 273 intersections
  int rows = 13;
  double spacing_m = 100.0;
  double min_speed_kmh = 20.0;
  double max_speed_kmh = 60.0;
  int poi_count = 10;
  std::uint64_t seed = 1;
};

// Two-way grid with uniform random speeds and POIs at uniform random
// positions inside the grid. Deterministic for a given spec.
RawDataset synthetic_grid(const SyntheticSpec& spec);

}  // namespace topomap::geo
