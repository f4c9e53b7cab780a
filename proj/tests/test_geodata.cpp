#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "topomap/geodata.hpp"

using namespace topomap;

namespace {

const char* kSquare = R"({
  "crs": "local-meters",
  "nodes": [{"id": "A", "x": 0, "y": 0}, {"id": "B", "x": 100, "y": 0},
            {"id": "C", "x": 100, "y": 100}, {"id": 4, "x": 0, "y": 100}],
  "ways": [{"id": "w1", "nodes": ["A", "B", "C"], "default_speed": 30},
           {"id": "w2", "nodes": ["C", 4, "A"], "default_speed": 30, "oneway": true}],
  "pois": [{"id": "h", "name": "Clinic", "x": 10, "y": 5}]
})";

geo::DatasetError parse_error(std::string_view text) {
  try {
    geo::parse_dataset(text);
  } catch (const geo::DatasetError& e) {
    return e;
  }
  ADD_FAILURE() << "expected DatasetError";
  return geo::DatasetError("none", "", "");
}

}  // namespace

TEST(Parse, MinimalSquare) {
  auto raw = geo::parse_dataset(kSquare);
  EXPECT_EQ(raw.nodes.size(), 4u);
  EXPECT_EQ(raw.ways.size(), 2u);
  EXPECT_EQ(raw.nodes[3].id, "4");
  EXPECT_TRUE(raw.ways[1].oneway);
  ASSERT_EQ(raw.pois.size(), 1u);
  EXPECT_EQ(raw.pois[0].name, "Clinic");
}

TEST(Parse, SyntaxErrorCarriesOffset) {
  auto e = parse_error(R"({"nodes": [ )");
  EXPECT_EQ(e.kind(), "syntax");
  ASSERT_TRUE(e.offset().has_value());
  EXPECT_GT(*e.offset(), 0u);
}

TEST(Parse, MissingFieldNamed) {
  auto e = parse_error(R"({"nodes": []})");
  EXPECT_EQ(e.kind(), "missing_field");
  EXPECT_EQ(e.field(), "ways");
  auto n = parse_error(R"({"nodes": [{"id": "a", "x": 1}], "ways": []})");
  EXPECT_EQ(n.field(), "nodes[0].y");
}

TEST(Parse, DanglingReference) {
  auto e = parse_error(R"({"nodes": [{"id": "a", "x": 0, "y": 0}],
    "ways": [{"id": "X", "nodes": ["a", 99], "default_speed": 30}]})");
  EXPECT_EQ(e.kind(), "dangling_reference");
  EXPECT_NE(std::string(e.what()).find("way X references missing node 99"), std::string::npos);
}

TEST(Parse, NonPositiveSpeedAndDuplicates) {
  EXPECT_EQ(parse_error(R"({"nodes": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 1, "y": 0}],
    "ways": [{"id": "w", "nodes": ["a", "b"], "default_speed": 0}]})").kind(), "non_positive_speed");
  EXPECT_EQ(parse_error(R"({"nodes": [{"id": "a", "x": 0, "y": 0}, {"id": "a", "x": 1, "y": 0}], "ways": []})").kind(),
            "duplicate_id");
}

TEST(Parse, SerializeRoundTrip) {
  auto raw = geo::parse_dataset(kSquare);
  auto again = geo::parse_dataset(geo::serialize_dataset(raw));
  ASSERT_EQ(again.nodes.size(), raw.nodes.size());
  for (std::size_t i = 0; i < raw.nodes.size(); ++i) {
    EXPECT_EQ(again.nodes[i].id, raw.nodes[i].id);
    EXPECT_EQ(again.nodes[i].pos, raw.nodes[i].pos);
  }
  EXPECT_EQ(again.ways[1].nodes, raw.ways[1].nodes);
  EXPECT_EQ(again.ways[1].oneway, true);
}

TEST(TimeWindowTest, ParseAndFormat) {
  auto w = geo::TimeWindow::parse("07:30-09:00");
  EXPECT_EQ(w.start_min, 450);
  EXPECT_EQ(w.end_min, 540);
  EXPECT_EQ(w.to_string(), "07:30-09:00");
  EXPECT_THROW(geo::TimeWindow::parse("7h-9h"), std::invalid_argument);
  EXPECT_THROW(geo::TimeWindow::parse("25:00-26:00"), std::invalid_argument);
}

TEST(Segmentation, SplitsAtSharedNodesOnly) {
  auto net = geo::segment_roads(geo::parse_dataset(kSquare));
  // A, C are shared endpoints; B and 4 are interior degree-2 nodes.
  EXPECT_EQ(net.vertex_count(), 2u);
  ASSERT_EQ(net.segments.size(), 2u);
  EXPECT_DOUBLE_EQ(net.segments[0].length_m, 200.0);
  EXPECT_EQ(net.segments[0].polyline.size(), 3u);
  EXPECT_TRUE(net.segments[1].oneway);
}

TEST(Segmentation, CrossingWaysShareIntersection) {
  auto raw = fixtures::make_raw({{"a", 0, 0}, {"m", 50, 0}, {"b", 100, 0}, {"c", 50, -50}, {"d", 50, 50}},
                                {{"h", {"a", "m", "b"}}, {"v", {"c", "m", "d"}}});
  auto net = geo::segment_roads(raw);
  EXPECT_EQ(net.vertex_count(), 5u);
  EXPECT_EQ(net.segments.size(), 4u);
  double total = 0;
  for (const auto& s : net.segments) total += s.length_m;
  EXPECT_DOUBLE_EQ(total, 200.0);
}

TEST(Segmentation, ZeroLengthDroppedWithWarning) {
  auto raw = fixtures::make_raw({{"a", 0, 0}, {"b", 0, 0}, {"c", 10, 0}}, {{"w", {"a", "b", "c"}}, {"x", {"b", "c"}}});
  auto net = geo::segment_roads(raw);
  EXPECT_EQ(net.segments.size(), 2u);
  EXPECT_FALSE(net.warnings.empty());
}

TEST(Segmentation, SpeedOverrideMatchesPeriod) {
  auto raw = fixtures::make_raw({{"a", 0, 0}, {"b", 100, 0}, {"c", 200, 0}, {"d", 100, 50}},
                                {{"w", {"a", "b", "c"}, 30}, {"x", {"b", "d"}, 30}});
  raw.speed_overrides.push_back({0, 1, geo::TimeWindow::parse("07:00-09:00"), 10});
  raw.speed_overrides.push_back({0, 7, geo::TimeWindow::parse("07:00-09:00"), 10});
  auto off_peak = geo::segment_roads(raw);
  EXPECT_EQ(off_peak.segments[1].speed_kmh, 30.0);
  auto peak = geo::segment_roads(raw, geo::TimeWindow::parse("07:00-09:00"));
  EXPECT_EQ(peak.segments[0].speed_kmh, 30.0);
  EXPECT_EQ(peak.segments[1].speed_kmh, 10.0);
  bool warned = false;
  for (const auto& w : peak.warnings) warned |= w.find("matches no segment") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Segmentation, ToRawRoundTrip) {
  auto net = geo::segment_roads(fixtures::grid_corridor());
  auto again = geo::segment_roads(geo::to_raw(net));
  ASSERT_EQ(again.segments.size(), net.segments.size());
  for (std::size_t i = 0; i < net.segments.size(); ++i) {
    EXPECT_EQ(again.segments[i].polyline, net.segments[i].polyline);
    EXPECT_EQ(again.segments[i].speed_kmh, net.segments[i].speed_kmh);
  }
}

TEST(Projection, EquirectangularDistances) {
  const Point origin{114.0, 22.5};
  const double k = geo::kEarthRadiusM * std::numbers::pi / 180.0;
  auto p = geo::project_point({114.0, 22.501}, origin);
  EXPECT_NEAR(p.y, 0.001 * k, 1e-9);
  auto q = geo::project_point({114.001, 22.5}, origin);
  EXPECT_NEAR(q.x, 0.001 * k * std::cos(22.5 * std::numbers::pi / 180.0), 1e-9);
  auto back = geo::unproject_point(q, origin);
  EXPECT_NEAR(back.x, 114.001, 1e-12);
  EXPECT_NEAR(back.y, 22.5, 1e-12);
}

TEST(Projection, RejectsBadLatitude) {
  geo::RawDataset raw;
  raw.crs = geo::Crs::kWgs84Degrees;
  raw.nodes.push_back({"a", {0, 95}});
  raw.rebuild_indices();
  try {
    geo::project(raw);
    FAIL();
  } catch (const geo::DatasetError& e) {
    EXPECT_EQ(e.kind(), "latitude_range");
  }
}

TEST(Attach, NearestWithLowestIdTie) {
  auto net = geo::segment_roads(fixtures::corner_square());
  auto a = geo::attach_point(net, {100, 100}, 1.4);  // equidistant from all corners
  EXPECT_EQ(a.intersection, 0u);
  EXPECT_NEAR(a.connector_length_m, std::hypot(100.0, 100.0), 1e-9);
  EXPECT_NEAR(a.connector_time_s, a.connector_length_m / 1.4, 1e-12);
  auto b = geo::attach_point(net, {190, 5}, 1.4);
  EXPECT_EQ(net.intersections[b.intersection], (Point{200, 0}));
}

TEST(Attach, EmptyNetworkThrows) {
  geo::SegmentedNetwork empty;
  std::vector<geo::RawPoi> pois;
  EXPECT_THROW(geo::attach_pois(empty, pois), geo::DatasetError);
}

TEST(OsmImport, HighwaysOnly) {
  const char* xml = R"(<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="22.50" lon="114.00"/>
  <node id="2" lat="22.50" lon="114.01"/>
  <node id="3" lat="22.51" lon="114.01"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way>
  <way id="11"><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/><tag k="oneway" v="yes"/><tag k="maxspeed" v="25"/></way>
  <way id="12"><nd ref="1"/><nd ref="3"/><tag k="building" v="yes"/></way>
</osm>)";
  auto raw = geo::import_osm_xml(xml);
  EXPECT_EQ(raw.crs, geo::Crs::kWgs84Degrees);
  ASSERT_EQ(raw.ways.size(), 2u);
  EXPECT_EQ(raw.ways[0].default_speed_kmh, 60.0);
  EXPECT_EQ(raw.ways[1].default_speed_kmh, 25.0);
  EXPECT_TRUE(raw.ways[1].oneway);
  auto net = geo::segment_roads(geo::project(raw));
  EXPECT_EQ(net.segments.size(), 2u);
  EXPECT_NEAR(net.segments[0].length_m, 0.01 * geo::kEarthRadiusM * std::numbers::pi / 180 *
                                             std::cos(22.505 * std::numbers::pi / 180), 2.0);
}
