#include "topomap/geodata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include "json.hpp"

namespace topomap::geo {
namespace {

using nlohmann::json;

[[noreturn]] void fail(std::string kind, std::string field, const std::string& msg) {
  throw DatasetError(std::move(kind), std::move(field), msg);
}

std::string id_string(const json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  fail("invalid_field", field, field + ": id must be a string or integer");
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    std::string field = path.empty() ? std::string(key) : path + "." + key;
    fail("missing_field", field, "missing field '" + field + "'");
  }
  return *it;
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) fail("invalid_field", field, field + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) fail("invalid_field", field, field + ": not finite");
  return d;
}

double speed(const json& v, const std::string& field) {
  double s = number(v, field);
  if (!(s > 0.0)) {
    fail("non_positive_speed", field, field + ": speed must be > 0 (got " + v.dump() + ")");
  }
  return s;
}

int parse_hhmm(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("missing ':'");
  int h = -1, m = -1;
  auto rh = std::from_chars(s.data(), s.data() + colon, h);
  auto rm = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
  if (rh.ec != std::errc{} || rh.ptr != s.data() + colon || rm.ec != std::errc{} ||
      rm.ptr != s.data() + s.size() || h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0)) {
    throw std::invalid_argument("bad time");
  }
  return h * 60 + m;
}

}  // namespace

TimeWindow TimeWindow::parse(std::string_view text) {
  auto dash = text.find('-');
  if (dash == std::string_view::npos) throw std::invalid_argument("period must be HH:MM-HH:MM");
  try {
    return {parse_hhmm(text.substr(0, dash)), parse_hhmm(text.substr(dash + 1))};
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("period must be HH:MM-HH:MM, got '" + std::string(text) + "'");
  }
}

std::string TimeWindow::to_string() const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", start_min / 60, start_min % 60,
                end_min / 60, end_min % 60);
  return buf;
}

std::string_view to_string(Crs crs) {
  return crs == Crs::kLocalMeters ? "local-meters" : "wgs84-degrees";
}

void RawDataset::rebuild_indices() {
  node_index.clear();
  way_index.clear();
  for (std::size_t i = 0; i < nodes.size(); ++i) node_index.emplace(nodes[i].id, i);
  for (std::size_t i = 0; i < ways.size(); ++i) way_index.emplace(ways[i].id, i);
}

void RawDataset::validate() const {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    if (!seen.emplace(nodes[i].id, i).second) {
      fail("duplicate_id", path + ".id", "duplicate node id " + nodes[i].id);
    }
    if (!std::isfinite(nodes[i].pos.x) || !std::isfinite(nodes[i].pos.y)) {
      fail("invalid_field", path, path + ": non-finite coordinate");
    }
  }
  seen.clear();
  for (std::size_t i = 0; i < ways.size(); ++i) {
    const std::string path = "ways[" + std::to_string(i) + "]";
    const RawWay& w = ways[i];
    if (!seen.emplace(w.id, i).second) fail("duplicate_id", path + ".id", "duplicate way id " + w.id);
    if (w.nodes.size() < 2) fail("invalid_field", path + ".nodes", path + ": a way needs >= 2 nodes");
    for (std::size_t n : w.nodes) {
      if (n >= nodes.size()) fail("dangling_reference", path + ".nodes", path + ": node ordinal out of range");
    }
    if (!(w.default_speed_kmh > 0.0)) {
      fail("non_positive_speed", path + ".default_speed", path + ": speed must be > 0");
    }
  }
  for (std::size_t i = 0; i < speed_overrides.size(); ++i) {
    const std::string path = "speed_overrides[" + std::to_string(i) + "]";
    if (speed_overrides[i].way >= ways.size()) {
      fail("dangling_reference", path + ".way_id", path + ": unknown way");
    }
    if (!(speed_overrides[i].speed_kmh > 0.0)) {
      fail("non_positive_speed", path + ".speed", path + ": speed must be > 0");
    }
  }
  seen.clear();
  for (std::size_t i = 0; i < pois.size(); ++i) {
    const std::string path = "pois[" + std::to_string(i) + "]";
    if (!seen.emplace(pois[i].id, i).second) fail("duplicate_id", path + ".id", "duplicate poi id " + pois[i].id);
  }
}

RawDataset parse_dataset(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DatasetError("syntax", "", std::string("syntax error at byte ") + std::to_string(e.byte) + ": " + e.what(),
                       e.byte);
  }
  if (!doc.is_object()) fail("syntax", "", "dataset must be an object");

  RawDataset raw;
  if (auto it = doc.find("crs"); it != doc.end()) {
    if (*it == "local-meters") {
      raw.crs = Crs::kLocalMeters;
    } else if (*it == "wgs84-degrees") {
      raw.crs = Crs::kWgs84Degrees;
    } else {
      fail("invalid_field", "crs", "crs must be 'local-meters' or 'wgs84-degrees'");
    }
  }
  if (auto it = doc.find("period"); it != doc.end() && !it->is_null()) {
    try {
      raw.period = TimeWindow::parse(it->get<std::string>());
    } catch (const std::exception& e) {
      fail("invalid_field", "period", e.what());
    }
  }

  const json& nodes = require(doc, "nodes", "");
  if (!nodes.is_array()) fail("invalid_field", "nodes", "nodes must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& n = nodes[i];
    if (!n.is_object()) fail("invalid_field", path, path + " must be an object");
    RawNode node;
    node.id = id_string(require(n, "id", path), path + ".id");
    node.pos = {number(require(n, "x", path), path + ".x"), number(require(n, "y", path), path + ".y")};
    if (!raw.node_index.emplace(node.id, raw.nodes.size()).second) {
      fail("duplicate_id", path + ".id", "duplicate node id " + node.id);
    }
    raw.nodes.push_back(std::move(node));
  }

  const json& ways = require(doc, "ways", "");
  if (!ways.is_array()) fail("invalid_field", "ways", "ways must be an array");
  for (std::size_t i = 0; i < ways.size(); ++i) {
    const std::string path = "ways[" + std::to_string(i) + "]";
    const json& w = ways[i];
    if (!w.is_object()) fail("invalid_field", path, path + " must be an object");
    RawWay way;
    way.id = id_string(require(w, "id", path), path + ".id");
    const json& refs = require(w, "nodes", path);
    if (!refs.is_array() || refs.size() < 2) {
      fail("invalid_field", path + ".nodes", path + ".nodes must list >= 2 node ids");
    }
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const std::string ref_path = path + ".nodes[" + std::to_string(k) + "]";
      std::string ref = id_string(refs[k], ref_path);
      auto found = raw.node_index.find(ref);
      if (found == raw.node_index.end()) {
        fail("dangling_reference", ref_path, "way " + way.id + " references missing node " + ref);
      }
      way.nodes.push_back(found->second);
    }
    if (auto it = w.find("oneway"); it != w.end()) {
      if (!it->is_boolean()) fail("invalid_field", path + ".oneway", path + ".oneway must be a boolean");
      way.oneway = it->get<bool>();
    }
    way.default_speed_kmh = speed(require(w, "default_speed", path), path + ".default_speed");
    if (!raw.way_index.emplace(way.id, raw.ways.size()).second) {
      fail("duplicate_id", path + ".id", "duplicate way id " + way.id);
    }
    raw.ways.push_back(std::move(way));
  }

  if (auto it = doc.find("speed_overrides"); it != doc.end()) {
    if (!it->is_array()) fail("invalid_field", "speed_overrides", "speed_overrides must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = "speed_overrides[" + std::to_string(i) + "]";
      const json& o = (*it)[i];
      if (!o.is_object()) fail("invalid_field", path, path + " must be an object");
      SpeedOverride ov;
      std::string way_id = id_string(require(o, "way_id", path), path + ".way_id");
      auto found = raw.way_index.find(way_id);
      if (found == raw.way_index.end()) {
        fail("dangling_reference", path + ".way_id", "speed override references missing way " + way_id);
      }
      ov.way = found->second;
      const json& idx = require(o, "segment_index", path);
      if (!idx.is_number_integer() || idx.get<long long>() < 0) {
        fail("invalid_field", path + ".segment_index", path + ".segment_index must be a non-negative integer");
      }
      ov.segment_index = idx.get<std::size_t>();
      const json& period = require(o, "period", path);
      if (!period.is_string()) fail("invalid_field", path + ".period", path + ".period must be a string");
      try {
        ov.period = TimeWindow::parse(period.get<std::string>());
      } catch (const std::exception& e) {
        fail("invalid_field", path + ".period", e.what());
      }
      ov.speed_kmh = speed(require(o, "speed", path), path + ".speed");
      raw.speed_overrides.push_back(ov);
    }
  }

  if (auto it = doc.find("pois"); it != doc.end()) {
    if (!it->is_array()) fail("invalid_field", "pois", "pois must be an array");
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = "pois[" + std::to_string(i) + "]";
      const json& p = (*it)[i];
      if (!p.is_object()) fail("invalid_field", path, path + " must be an object");
      RawPoi poi;
      poi.id = id_string(require(p, "id", path), path + ".id");
      if (auto name = p.find("name"); name != p.end() && name->is_string()) poi.name = name->get<std::string>();
      poi.pos = {number(require(p, "x", path), path + ".x"), number(require(p, "y", path), path + ".y")};
      if (!seen.emplace(poi.id, i).second) fail("duplicate_id", path + ".id", "duplicate poi id " + poi.id);
      raw.pois.push_back(std::move(poi));
    }
  }
  return raw;
}

std::string serialize_dataset(const RawDataset& raw) {
  json doc;
  doc["crs"] = std::string(to_string(raw.crs));
  if (raw.period) doc["period"] = raw.period->to_string();
  doc["nodes"] = json::array();
  for (const RawNode& n : raw.nodes) doc["nodes"].push_back({{"id", n.id}, {"x", n.pos.x}, {"y", n.pos.y}});
  doc["ways"] = json::array();
  for (const RawWay& w : raw.ways) {
    json refs = json::array();
    for (std::size_t n : w.nodes) refs.push_back(raw.nodes[n].id);
    doc["ways"].push_back({{"id", w.id}, {"nodes", refs}, {"oneway", w.oneway}, {"default_speed", w.default_speed_kmh}});
  }
  doc["speed_overrides"] = json::array();
  for (const SpeedOverride& o : raw.speed_overrides) {
    doc["speed_overrides"].push_back({{"way_id", raw.ways[o.way].id},
                                      {"segment_index", o.segment_index},
                                      {"period", o.period.to_string()},
                                      {"speed", o.speed_kmh}});
  }
  doc["pois"] = json::array();
  for (const RawPoi& p : raw.pois) {
    doc["pois"].push_back({{"id", p.id}, {"name", p.name}, {"x", p.pos.x}, {"y", p.pos.y}});
  }
  return doc.dump(2);
}

RawDataset import_osm_xml(std::string_view xml) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DatasetError("syntax", "", std::string("OSM XML: ") + e.what());
  }
  const auto osm = tree.get_child_optional("osm");
  if (!osm) throw DatasetError("syntax", "osm", "OSM XML: missing <osm> root");

  static const std::unordered_map<std::string, double> kClassSpeed = {
      {"motorway", 100}, {"trunk", 80},        {"primary", 60},  {"secondary", 50},
      {"tertiary", 40},  {"unclassified", 30}, {"residential", 30}, {"service", 20},
      {"living_street", 10}};

  RawDataset raw;
  raw.crs = Crs::kWgs84Degrees;
  std::unordered_map<std::string, Point> positions;
  for (const auto& [tag, child] : *osm) {
    if (tag != "node") continue;
    positions[child.get<std::string>("<xmlattr>.id")] = {child.get<double>("<xmlattr>.lon"),
                                                         child.get<double>("<xmlattr>.lat")};
  }
  for (const auto& [tag, child] : *osm) {
    if (tag != "way") continue;
    std::string highway;
    std::string oneway;
    std::optional<double> maxspeed;
    std::vector<std::string> refs;
    for (const auto& [sub, node] : child) {
      if (sub == "nd") {
        refs.push_back(node.get<std::string>("<xmlattr>.ref"));
      } else if (sub == "tag") {
        const auto k = node.get<std::string>("<xmlattr>.k");
        const auto v = node.get<std::string>("<xmlattr>.v");
        if (k == "highway") highway = v;
        if (k == "oneway") oneway = v;
        if (k == "maxspeed") {
          double s = 0;
          auto r = std::from_chars(v.data(), v.data() + v.size(), s);
          if (r.ec == std::errc{} && s > 0) maxspeed = s;
        }
      }
    }
    if (highway.empty()) continue;
    std::vector<std::size_t> ordinals;
    for (const std::string& ref : refs) {
      auto pos = positions.find(ref);
      if (pos == positions.end()) continue;  // clipped extracts reference nodes outside the bbox
      auto [it, inserted] = raw.node_index.emplace(ref, raw.nodes.size());
      if (inserted) raw.nodes.push_back({ref, pos->second});
      ordinals.push_back(it->second);
    }
    if (ordinals.size() < 2) continue;
    RawWay way;
    way.id = child.get<std::string>("<xmlattr>.id");
    way.nodes = std::move(ordinals);
    way.oneway = oneway == "yes" || oneway == "true" || oneway == "1";
    auto cls = kClassSpeed.find(highway);
    way.default_speed_kmh = maxspeed.value_or(cls != kClassSpeed.end() ? cls->second : 30.0);
    raw.way_index.emplace(way.id, raw.ways.size());
    raw.ways.push_back(std::move(way));
  }
  raw.validate();
  return raw;
}

Point project_point(Point lonlat, Point origin) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {kEarthRadiusM * std::cos(origin.y * kDeg) * (lonlat.x - origin.x) * kDeg,
          kEarthRadiusM * (lonlat.y - origin.y) * kDeg};
}

Point unproject_point(Point meters, Point origin) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {origin.x + meters.x / (kEarthRadiusM * std::cos(origin.y * kDeg) * kDeg),
          origin.y + meters.y / (kEarthRadiusM * kDeg)};
}

RawDataset project(const RawDataset& raw) {
  if (raw.crs != Crs::kWgs84Degrees) {
    throw DatasetError("invalid_crs", "crs", "project() requires wgs84-degrees input");
  }
  auto check_lat = [](double lat, const std::string& path) {
    if (!(lat >= -90.0 && lat <= 90.0)) {
      fail("latitude_range", path, path + ": latitude " + std::to_string(lat) + " outside [-90, 90]");
    }
  };
  Point centroid{0.0, 0.0};
  for (std::size_t i = 0; i < raw.nodes.size(); ++i) {
    check_lat(raw.nodes[i].pos.y, "nodes[" + std::to_string(i) + "].y");
    centroid.x += raw.nodes[i].pos.x;
    centroid.y += raw.nodes[i].pos.y;
  }
  for (std::size_t i = 0; i < raw.pois.size(); ++i) {
    check_lat(raw.pois[i].pos.y, "pois[" + std::to_string(i) + "].y");
  }
  if (!raw.nodes.empty()) {
    centroid.x /= static_cast<double>(raw.nodes.size());
    centroid.y /= static_cast<double>(raw.nodes.size());
  }
  RawDataset out = raw;
  out.crs = Crs::kLocalMeters;
  out.origin = centroid;
  for (RawNode& n : out.nodes) n.pos = project_point(n.pos, centroid);
  for (RawPoi& p : out.pois) p.pos = project_point(p.pos, centroid);
  return out;
}

BoundingBox SegmentedNetwork::bounds() const {
  BoundingBox box;
  for (Point p : intersections) box.extend(p);
  for (const Segment& s : segments) {
    for (Point p : s.polyline) box.extend(p);
  }
  return box;
}

SegmentedNetwork segment_roads(const RawDataset& raw, std::optional<TimeWindow> period) {
  if (raw.crs != Crs::kLocalMeters) {
    throw DatasetError("invalid_crs", "crs", "segment_roads() requires local-meters input; project() first");
  }
  SegmentedNetwork net;
  net.period = period ? period : raw.period;

  std::vector<int> occurrences(raw.nodes.size(), 0);
  std::vector<bool> is_intersection(raw.nodes.size(), false);
  for (const RawWay& w : raw.ways) {
    for (std::size_t n : w.nodes) ++occurrences[n];
    is_intersection[w.nodes.front()] = true;
    is_intersection[w.nodes.back()] = true;
  }
  std::vector<VertexId> vertex_of(raw.nodes.size(), kNoVertex);
  for (std::size_t n = 0; n < raw.nodes.size(); ++n) {
    if (occurrences[n] >= 2) is_intersection[n] = true;
    if (is_intersection[n]) {
      vertex_of[n] = static_cast<VertexId>(net.intersections.size());
      net.intersections.push_back(raw.nodes[n].pos);
      net.intersection_node.push_back(n);
    }
  }

  for (std::size_t wi = 0; wi < raw.ways.size(); ++wi) {
    const RawWay& way = raw.ways[wi];
    std::size_t index_in_way = 0;
    std::size_t start = 0;
    for (std::size_t i = 1; i < way.nodes.size(); ++i) {
      if (!is_intersection[way.nodes[i]]) continue;
      Segment seg;
      seg.from = vertex_of[way.nodes[start]];
      seg.to = vertex_of[way.nodes[i]];
      for (std::size_t k = start; k <= i; ++k) {
        Point p = raw.nodes[way.nodes[k]].pos;
        if (!seg.polyline.empty() && seg.polyline.back() == p) continue;
        if (!seg.polyline.empty()) seg.length_m += distance(seg.polyline.back(), p);
        seg.polyline.push_back(p);
      }
      seg.oneway = way.oneway;
      seg.way = wi;
      seg.index_in_way = index_in_way++;
      seg.speed_kmh = way.default_speed_kmh;
      if (net.period) {
        for (const SpeedOverride& ov : raw.speed_overrides) {
          if (ov.way == wi && ov.segment_index == seg.index_in_way && ov.period == *net.period) {
            seg.speed_kmh = ov.speed_kmh;
          }
        }
      }
      start = i;
      if (!(seg.length_m > 0.0)) {
        net.warnings.push_back("dropped zero-length segment " + std::to_string(seg.index_in_way) + " of way " +
                               way.id);
        continue;
      }
      seg.id = static_cast<SegmentId>(net.segments.size());
      net.segments.push_back(std::move(seg));
    }
  }
  for (const SpeedOverride& ov : raw.speed_overrides) {
    const RawWay& way = raw.ways[ov.way];
    std::size_t pieces = 0;
    for (std::size_t i = 1; i < way.nodes.size(); ++i) pieces += is_intersection[way.nodes[i]] ? 1 : 0;
    if (ov.segment_index >= pieces) {
      net.warnings.push_back("speed override for way " + way.id + " segment " + std::to_string(ov.segment_index) +
                             " matches no segment");
    }
  }
  return net;
}

RawDataset to_raw(const SegmentedNetwork& net) {
  RawDataset raw;
  raw.crs = Crs::kLocalMeters;
  raw.period = net.period;
  for (std::size_t v = 0; v < net.intersections.size(); ++v) {
    raw.nodes.push_back({"i" + std::to_string(v), net.intersections[v]});
  }
  for (const Segment& s : net.segments) {
    RawWay way;
    way.id = "s" + std::to_string(s.id);
    way.oneway = s.oneway;
    way.default_speed_kmh = s.speed_kmh;
    way.nodes.push_back(s.from);
    for (std::size_t k = 1; k + 1 < s.polyline.size(); ++k) {
      way.nodes.push_back(raw.nodes.size());
      raw.nodes.push_back({"s" + std::to_string(s.id) + "p" + std::to_string(k), s.polyline[k]});
    }
    way.nodes.push_back(s.to);
    raw.ways.push_back(std::move(way));
  }
  raw.rebuild_indices();
  return raw;
}

PoiAttachment attach_point(const SegmentedNetwork& net, Point p, double walk_speed) {
  if (net.intersections.empty()) {
    throw DatasetError("empty_network", "nodes", "cannot attach POIs to a network without intersections");
  }
  if (!(walk_speed > 0.0)) throw std::invalid_argument("walk speed must be > 0");
  VertexId best = 0;
  double best_d = distance(p, net.intersections[0]);
  for (VertexId v = 1; v < net.intersections.size(); ++v) {
    double d = distance(p, net.intersections[v]);
    if (d < best_d - 1e-9) {
      best = v;
      best_d = d;
    }
  }
  return {best, best_d, best_d / walk_speed};
}

std::vector<PoiAttachment> attach_pois(const SegmentedNetwork& net, std::span<const RawPoi> pois,
                                       double walk_speed) {
  if (net.intersections.empty()) {
    throw DatasetError("empty_network", "nodes", "cannot attach POIs to a network without intersections");
  }
  std::vector<PoiAttachment> out;
  out.reserve(pois.size());
  for (const RawPoi& poi : pois) out.push_back(attach_point(net, poi.pos, walk_speed));
  return out;
}

}  // namespace topomap::geo
