#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "topomap/field.hpp"
#include "topomap/scenario.hpp"
#include "topomap/synthetic.hpp"

using namespace topomap;
using field::Kernel;

namespace {

double kernel_oracle(Kernel k, double u) {
  switch (k) {
    case Kernel::kGaussian: return std::exp(-u * u / 2);
    case Kernel::kSigmoid: return 2 / (1 + std::exp(u));
    case Kernel::kParabolic: return u < 1 ? 1 - u * u : 0.0;
    case Kernel::kNegExp: return std::exp(-u);
  }
  return 0;
}

constexpr Kernel kAllKernels[] = {Kernel::kGaussian, Kernel::kSigmoid, Kernel::kParabolic, Kernel::kNegExp};

}  // namespace

TEST(Kernel, KnownValues) {
  for (Kernel k : kAllKernels) {
    EXPECT_DOUBLE_EQ(field::kernel_eval(k, 0.0), 1.0);
    for (double u : {0.1, 0.5, 1.0, 2.0, 7.5}) EXPECT_NEAR(field::kernel_eval(k, u), kernel_oracle(k, u), 1e-15);
    EXPECT_THROW(field::kernel_eval(k, -0.1), std::domain_error);
    EXPECT_THROW(field::kernel_eval(k, std::nan("")), std::domain_error);
  }
  EXPECT_DOUBLE_EQ(field::kernel_eval(Kernel::kGaussian, 1.0), std::exp(-0.5));
  EXPECT_EQ(field::kernel_eval(Kernel::kParabolic, 1.5), 0.0);
}

TEST(Kernel, NamesRoundTrip) {
  for (Kernel k : kAllKernels) EXPECT_EQ(field::parse_kernel(field::to_string(k)), k);
  EXPECT_FALSE(field::parse_kernel("box").has_value());
  EXPECT_EQ(field::parse_mode("eq4-literal"), field::DensityMode::kEq4Literal);
  EXPECT_EQ(field::parse_aggregate("sum"), field::Aggregate::kSum);
}

TEST(Params, Validation) {
  field::FieldParams p;
  EXPECT_NO_THROW(p.validate());
  p.bandwidth_m = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.fallback_k = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.alpha = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(PlanarKde, BruteForceSum) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0, 1000);
  std::vector<Point> events;
  for (int i = 0; i < 50; ++i) events.push_back({u(rng), u(rng)});
  for (Kernel k : kAllKernels) {
    for (int q = 0; q < 20; ++q) {
      const Point s{u(rng), u(rng)};
      const double r = 150;
      double expected = 0;
      for (Point e : events) expected += kernel_oracle(k, std::hypot(e.x - s.x, e.y - s.y) / r) / (std::numbers::pi * r * r);
      EXPECT_NEAR(field::planar_kde(events, s, k, r), expected, 1e-9);
    }
  }
}

TEST(Nkde, PathFixtureByHand) {
  // a --100m-- b --200m-- c     and a separate d --50m-- e
  auto raw = fixtures::make_raw({{"a", 0, 0}, {"b", 100, 0}, {"c", 300, 0}, {"d", 0, 500}, {"e", 50, 500}},
                                {{"ab", {"a", "b"}}, {"bc", {"b", "c"}}, {"de", {"d", "e"}}});
  auto net = geo::segment_roads(raw);
  auto g = net::build_graph(net);
  const std::vector<Point> ev{{0, 0}};
  auto events = field::snap_events(net, ev);
  const double r = 100;
  auto samples = field::nkde(g, net, events, 50.0, Kernel::kGaussian, r);
  auto at = [&](SegmentId s, double off) {
    for (const auto& smp : samples) {
      if (smp.segment == s && std::abs(smp.offset_m - off) < 1e-9) return smp.density;
    }
    ADD_FAILURE() << "no sample " << s << "@" << off;
    return -1.0;
  };
  EXPECT_NEAR(at(0, 0), 1.0 / r, 1e-12);
  EXPECT_NEAR(at(0, 100), std::exp(-0.5) / r, 1e-12);
  EXPECT_NEAR(at(1, 50), std::exp(-0.5 * 1.5 * 1.5) / r, 1e-12);
  EXPECT_NEAR(at(1, 200), std::exp(-0.5 * 9.0) / r, 1e-12);
  EXPECT_EQ(at(2, 0), 0.0);
  EXPECT_EQ(at(2, 50), 0.0);
}

TEST(Nkde, DirectedRespectsOneway) {
  auto raw = fixtures::make_raw({{"a", 0, 0}, {"b", 100, 0}, {"c", 200, 0}},
                                {{"ab", {"a", "b"}, 30, true}, {"bc", {"b", "c"}, 30, false}});
  auto net = geo::segment_roads(raw);
  auto g = net::build_graph(net);
  const std::vector<Point> ev{{200, 0}};
  auto events = field::snap_events(net, ev);
  auto directed = field::nkde(g, net, events, 100.0, Kernel::kGaussian, 100.0, true);
  auto undirected = field::nkde(g, net, events, 100.0, Kernel::kGaussian, 100.0, false);
  // point a is reachable from c only against the oneway
  for (std::size_t i = 0; i < directed.size(); ++i) {
    if (directed[i].segment == 0 && directed[i].offset_m == 0.0) {
      EXPECT_EQ(directed[i].density, 0.0);
      EXPECT_NEAR(undirected[i].density, std::exp(-0.5 * 4) / 100.0, 1e-12);
    }
  }
}

TEST(Nkde, MatchesExhaustiveNetworkDistance) {
  geo::SyntheticSpec spec;
  spec.cols = 4;
  spec.rows = 3;
  spec.poi_count = 0;
  auto net = geo::segment_roads(geo::synthetic_grid(spec));
  auto g = net::build_graph(net);
  const std::size_t n = net.vertex_count();
  // Floyd-Warshall on lengths
  std::vector<std::vector<double>> D(n, std::vector<double>(n, kInfinity));
  for (std::size_t i = 0; i < n; ++i) D[i][i] = 0;
  for (const auto& s : net.segments) {
    D[s.from][s.to] = std::min(D[s.from][s.to], s.length_m);
    D[s.to][s.from] = std::min(D[s.to][s.from], s.length_m);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);

  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ux(0, 300), uy(0, 200);
  std::vector<Point> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({ux(rng), uy(rng)});
  auto events = field::snap_events(net, pts);
  const double r = 120;
  auto samples = field::nkde(g, net, events, 37.0, Kernel::kNegExp, r, false);
  for (const auto& smp : samples) {
    const auto& ts = net.segments[smp.segment];
    double expected = 0;
    for (const auto& anchor : events.anchors) {
      const auto& es = net.segments[anchor->segment];
      const double a = anchor->offset_m, b = smp.offset_m;
      double d = anchor->segment == smp.segment ? std::abs(a - b) : kInfinity;
      for (auto [ev, ec] : {std::pair{es.from, a}, std::pair{es.to, es.length_m - a}}) {
        for (auto [tv, tc] : {std::pair{ts.from, b}, std::pair{ts.to, ts.length_m - b}}) {
          d = std::min(d, ec + D[ev][tv] + tc);
        }
      }
      expected += kernel_oracle(Kernel::kNegExp, d / r) / r;
    }
    EXPECT_NEAR(smp.density, expected, 1e-9);
  }
}

TEST(TopoDensity, SquareInteriorPointEq4) {
  field::FieldParams params;
  params.mode = field::DensityMode::kEq4Literal;
  params.bandwidth_acc = 0.01;
  auto sc = fixtures::base_scenario(fixtures::square_two_poi(), params);
  const Point p{250, 250};
  auto d = field::topo_density_at(p, sc->model(), params);
  EXPECT_EQ(d.dominant, 1u);
  // H2 reaches P through C: connector + walk C->P
  const double t = std::hypot(20.0, 20.0) / 1.4 + std::hypot(50.0, 50.0) / 1.4;
  const auto* h2 = d.find(1);
  ASSERT_NE(h2, nullptr);
  EXPECT_NEAR(h2->access_time_s, t, 1e-9);
  EXPECT_NEAR(h2->density, kernel_oracle(Kernel::kGaussian, (1.0 / t) / 0.01) / 0.01, 1e-9);
}

TEST(TopoDensity, AssignedIntersectionViaItself) {
  field::FieldParams params;
  params.mode = field::DensityMode::kEq4Literal;
  auto sc = fixtures::base_scenario(fixtures::square_two_poi(), params);
  for (VertexId v = 0; v < sc->net().vertex_count(); ++v) {
    auto d = field::topo_density_at(sc->net().intersections[v], sc->model(), params);
    EXPECT_EQ(d.via, v);
    EXPECT_EQ(d.dominant, sc->assignment()[v].poi);
    EXPECT_DOUBLE_EQ(d.find(d.dominant)->access_time_s, sc->assignment()[v].best_time_s);
  }
}

TEST(TopoDensity, AmplitudeAtIntersectionAtLeastOwnAccessibility) {
  auto sc = fixtures::base_scenario(fixtures::square_two_poi());
  for (VertexId v = 0; v < sc->net().vertex_count(); ++v) {
    auto d = field::topo_density_at(sc->net().intersections[v], sc->model(), sc->params());
    EXPECT_GE(d.value, sc->assignment()[v].accessibility);
    const auto* own = d.find(sc->assignment()[v].poi);
    ASSERT_NE(own, nullptr);
    EXPECT_GE(own->density, sc->assignment()[v].accessibility);
  }
}

TEST(TopoDensity, FarAwayIsZero) {
  auto sc = fixtures::base_scenario(fixtures::square_two_poi());
  auto d = field::topo_density_at({1e6, 1e6}, sc->model(), sc->params());
  EXPECT_EQ(d.dominant, kNoPoi);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.per_poi.empty());
}

namespace {

// Per-pixel oracle for amplitude-decay/max: brute-force face search and k-nearest.
field::DensityRaster oracle_raster(const scenario::Scenario& sc, const field::Viewport& vp, const field::FieldParams& p) {
  field::DensityRaster out{vp, p, std::vector<double>(vp.pixel_count()), std::vector<PoiId>(vp.pixel_count(), kNoPoi)};
  const auto& pos = sc.net().intersections;
  for (std::uint32_t row = 0; row < vp.height; ++row) {
    for (std::uint32_t col = 0; col < vp.width; ++col) {
      const Point c = vp.pixel_center(col, row);
      std::optional<std::size_t> face;
      for (std::size_t f = 0; f < sc.world().faces.size(); ++f) {
        const auto& F = sc.world().faces.face(f);
        if (!F.bounded || !field::point_in_polygon(c, F.polygon)) continue;
        if (!face || F.signed_area < sc.world().faces.face(*face).signed_area) face = f;
      }
      std::vector<VertexId> cands;
      if (face) {
        cands = sc.world().faces.face(*face).candidates;
      } else {
        std::vector<std::pair<double, VertexId>> all;
        for (VertexId v = 0; v < pos.size(); ++v) {
          const double d = distance(c, pos[v]);
          if (d <= p.max_radius()) all.push_back({d, v});
        }
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < std::min(p.fallback_k, all.size()); ++i) cands.push_back(all[i].second);
      }
      std::map<PoiId, double> best;
      for (VertexId v : cands) {
        const auto& a = sc.assignment()[v];
        if (a.poi == kNoPoi) continue;
        const double val = a.accessibility * kernel_oracle(p.kernel, distance(c, pos[v]) / p.bandwidth_m);
        best[a.poi] = std::max(best[a.poi], val);
      }
      double top = 0;
      PoiId dom = kNoPoi;
      for (auto [poi, val] : best) {
        if (val > top) {
          top = val;
          dom = poi;
        }
      }
      out.value[std::size_t{row} * vp.width + col] = top;
      out.dominant[std::size_t{row} * vp.width + col] = dom;
    }
  }
  return out;
}

}  // namespace

TEST(Rasterize, MatchesPerPixelOracle) {
  geo::SyntheticSpec spec;
  spec.cols = 6;
  spec.rows = 5;
  spec.poi_count = 4;
  spec.seed = 4;
  auto sc = fixtures::base_scenario(geo::synthetic_grid(spec));
  const field::Viewport vp{-200, -200, 700, 600, 90, 80};
  auto r = field::rasterize(sc->model(), vp, sc->params(), 1);
  auto o = oracle_raster(*sc, vp, sc->params());
  for (std::size_t i = 0; i < r.value.size(); ++i) {
    EXPECT_NEAR(r.value[i], o.value[i], 1e-15) << i;
    EXPECT_EQ(r.dominant[i], o.dominant[i]) << i;
  }
}

TEST(Rasterize, DeterministicAcrossWorkers) {
  geo::SyntheticSpec spec;
  spec.poi_count = 7;
  auto sc = fixtures::base_scenario(geo::synthetic_grid(spec));
  const field::Viewport vp{-100, -100, 2100, 1300, 220, 130};
  for (auto mode : {field::DensityMode::kAmplitudeDecay, field::DensityMode::kEq4Literal}) {
    field::FieldParams p = sc->params();
    p.mode = mode;
    auto one = field::rasterize(sc->model(), vp, p, 1);
    for (unsigned w : {2u, 3u, 4u, 7u}) EXPECT_TRUE(one == field::rasterize(sc->model(), vp, p, w));
  }
}

TEST(Rasterize, SumAggregateAtLeastMax) {
  auto sc = fixtures::base_scenario(fixtures::grid_corridor());
  const field::Viewport vp{-50, -50, 450, 450, 50, 50};
  field::FieldParams p = sc->params();
  auto mx = field::rasterize(sc->model(), vp, p, 1);
  p.aggregate = field::Aggregate::kSum;
  auto sm = field::rasterize(sc->model(), vp, p, 1);
  for (std::size_t i = 0; i < mx.value.size(); ++i) EXPECT_GE(sm.value[i], mx.value[i]);
  EXPECT_EQ(sm.dominant, mx.dominant);
}

TEST(Rasterize, PixelLimit) {
  auto sc = fixtures::base_scenario(fixtures::square_two_poi());
  const field::Viewport vp{0, 0, 300, 300, 100, 100};
  EXPECT_THROW(field::rasterize(sc->model(), vp, sc->params(), 1, 9999), std::length_error);
  field::Viewport bad = vp;
  bad.width = 0;
  EXPECT_THROW(field::rasterize(sc->model(), bad, sc->params(), 1), std::invalid_argument);
}

TEST(Rasterize, RegionWithAllAffectedEqualsFull) {
  auto sc = fixtures::base_scenario(fixtures::grid_corridor());
  const field::Viewport vp{-50, -50, 450, 450, 64, 64};
  auto full = field::rasterize(sc->model(), vp, sc->params(), 1);
  field::DensityRaster blank = full;
  std::fill(blank.value.begin(), blank.value.end(), -1.0);
  const auto n = field::rasterize_region(blank, sc->model(), {0, 0, 64, 64}, [](auto) { return true; }, 2);
  EXPECT_EQ(n, 64u * 64u);
  EXPECT_TRUE(blank == full);
}

TEST(Rasterize, PlanarKdeRasterMatchesPointwise) {
  const std::vector<Point> ev{{0, 0}, {100, 50}};
  const field::Viewport vp{-100, -100, 200, 200, 30, 30};
  auto r = field::planar_kde_raster(ev, vp, Kernel::kGaussian, 80, 2);
  for (std::uint32_t row = 0; row < 30; row += 7) {
    for (std::uint32_t col = 0; col < 30; col += 5) {
      EXPECT_DOUBLE_EQ(r.at(col, row), field::planar_kde(ev, vp.pixel_center(col, row), Kernel::kGaussian, 80));
    }
  }
}

TEST(Tdm1, RoundTrip) {
  auto sc = fixtures::base_scenario(fixtures::square_two_poi());
  const field::Viewport vp{-50, -50, 350, 350, 17, 9};
  auto r = field::rasterize(sc->model(), vp, sc->params(), 1);
  const std::string bytes = field::encode_tdm1(r, 3);
  EXPECT_EQ(bytes.substr(0, 4), "TDM1");
  EXPECT_EQ(bytes.size(), 16u + 17 * 9 * 6);
  auto g = field::decode_tdm1(bytes);
  EXPECT_EQ(g.width, 17u);
  EXPECT_EQ(g.height, 9u);
  EXPECT_EQ(g.flags, 3u);
  for (std::size_t i = 0; i < r.value.size(); ++i) {
    EXPECT_EQ(g.value[i], static_cast<float>(r.value[i]));
    EXPECT_EQ(g.dominant[i], r.dominant[i] == kNoPoi ? 0xFFFF : r.dominant[i]);
  }
  EXPECT_THROW(field::decode_tdm1("TDM0"), std::exception);
  EXPECT_THROW(field::decode_tdm1(bytes.substr(0, bytes.size() - 1)), std::exception);
}
