#include "topomap/synthetic.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace topomap::geo {

RawDataset synthetic_grid(const SyntheticSpec& spec) {
  if (spec.cols < 2 || spec.rows < 2) throw std::invalid_argument("synthetic grid needs at least 2x2 intersections");
  if (!(spec.spacing_m > 0) || !(spec.min_speed_kmh > 0) || spec.max_speed_kmh < spec.min_speed_kmh) {
    throw std::invalid_argument("synthetic grid: bad spacing or speed range");
  }
  if (spec.poi_count < 0) throw std::invalid_argument("synthetic grid: negative poi count");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> speed(spec.min_speed_kmh, spec.max_speed_kmh);
  RawDataset raw;
  auto ordinal = [&](int i, int j) { return static_cast<std::size_t>(j) * spec.cols + i; };
  for (int j = 0; j < spec.rows; ++j) {
    for (int i = 0; i < spec.cols; ++i) {
      raw.nodes.push_back({"n" + std::to_string(i) + "_" + std::to_string(j), {i * spec.spacing_m, j * spec.spacing_m}});
    }
  }
  for (int j = 0; j < spec.rows; ++j) {
    for (int i = 0; i + 1 < spec.cols; ++i) {
      raw.ways.push_back({"h" + std::to_string(i) + "_" + std::to_string(j), {ordinal(i, j), ordinal(i + 1, j)}, false,
                          speed(rng)});
    }
  }
  for (int i = 0; i < spec.cols; ++i) {
    for (int j = 0; j + 1 < spec.rows; ++j) {
      raw.ways.push_back({"v" + std::to_string(i) + "_" + std::to_string(j), {ordinal(i, j), ordinal(i, j + 1)}, false,
                          speed(rng)});
    }
  }
  std::uniform_real_distribution<double> ux(0.0, (spec.cols - 1) * spec.spacing_m);
  std::uniform_real_distribution<double> uy(0.0, (spec.rows - 1) * spec.spacing_m);
  for (int k = 0; k < spec.poi_count; ++k) {
    const double x = ux(rng);
    const double y = uy(rng);
    raw.pois.push_back({"p" + std::to_string(k), "poi " + std::to_string(k), {x, y}});
  }
  raw.rebuild_indices();
  return raw;
}

}  // namespace topomap::geo
