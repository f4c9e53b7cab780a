#include <benchmark/benchmark.h>

#include "topomap/field.hpp"
#include "topomap/netgraph.hpp"
#include "topomap/scenario.hpp"
#include "topomap/synthetic.hpp"

using namespace topomap;

namespace {

scenario::ScenarioPtr grid_scene(int pois) {
  geo::SyntheticSpec spec;
  spec.poi_count = pois;
  return scenario::Scenario::create("bench", scenario::build_world(geo::synthetic_grid(spec)));
}

field::Viewport sized(const scenario::Scenario& sc, std::uint32_t w, std::uint32_t h) {
  field::Viewport vp = scenario::default_viewport(sc.net(), 1);
  vp.width = w;
  vp.height = h;
  return vp;
}

void BM_TopologyRaster(benchmark::State& state) {
  auto sc = grid_scene(static_cast<int>(state.range(0)));
  const auto vp = sized(*sc, static_cast<std::uint32_t>(state.range(1)), static_cast<std::uint32_t>(state.range(2)));
  for (auto _ : state) {
    auto r = field::rasterize(sc->model(), vp, sc->params());
    benchmark::DoNotOptimize(r.value.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vp.pixel_count()));
}
BENCHMARK(BM_TopologyRaster)
    ->ArgsProduct({{10, 50, 100}, {640}, {400}})
    ->Args({10, 1280, 800})
    ->Unit(benchmark::kMillisecond);

void BM_PlanarKdeRaster(benchmark::State& state) {
  auto sc = grid_scene(static_cast<int>(state.range(0)));
  const auto vp = sized(*sc, static_cast<std::uint32_t>(state.range(1)), static_cast<std::uint32_t>(state.range(2)));
  std::vector<Point> events;
  for (const auto& p : sc->pois()) events.push_back(p.pos);
  for (auto _ : state) {
    auto r = field::planar_kde_raster(events, vp, field::Kernel::kGaussian, 300.0);
    benchmark::DoNotOptimize(r.value.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vp.pixel_count()));
}
BENCHMARK(BM_PlanarKdeRaster)->ArgsProduct({{10, 50, 100}, {640}, {400}})->Unit(benchmark::kMillisecond);

void BM_ShortestPathTree(benchmark::State& state) {
  geo::SyntheticSpec spec;
  spec.cols = static_cast<int>(state.range(0));
  spec.rows = static_cast<int>(state.range(0));
  spec.poi_count = 1;
  const auto raw = geo::synthetic_grid(spec);
  const auto net = geo::segment_roads(raw);
  const auto g = net::build_graph(net);
  const auto attach = geo::attach_point(net, raw.pois[0].pos, geo::kDefaultWalkSpeed);
  for (auto _ : state) {
    auto t = net::shortest_path_tree(g, 0, attach);
    benchmark::DoNotOptimize(t.time_to.data());
  }
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_ShortestPathTree)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_IncrementalAddPoi(benchmark::State& state) {
  auto base = grid_scene(10);
  const auto vp = sized(*base, 640, 400);
  const auto parent = field::rasterize(base->model(), vp, base->params());
  auto child = scenario::apply_edit(base, scenario::AddPoi{{1000, 600}, "new"}, "child");
  for (auto _ : state) {
    auto r = scenario::incremental_raster(parent, *base, *child, vp, base->params());
    benchmark::DoNotOptimize(r.raster.value.data());
  }
}
BENCHMARK(BM_IncrementalAddPoi)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
