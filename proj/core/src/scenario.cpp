#include "topomap/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace topomap::scenario {

using nlohmann::json;

std::shared_ptr<const World> build_world(const geo::RawDataset& raw) {
  auto world = std::make_shared<World>();
  const geo::RawDataset projected = raw.crs == geo::Crs::kWgs84Degrees ? geo::project(raw) : raw;
  world->net = geo::segment_roads(projected, projected.period);
  world->origin = projected.origin;
  world->pois = projected.pois;
  try {
    world->faces = field::extract_faces(world->net);
  } catch (const field::NonPlanarError& e) {
    world->planar = false;
    world->planarity_issue = e.what();
    world->net.warnings.push_back(std::string("non-planar network, using nearest-intersection fallback: ") + e.what());
  }
  world->index = field::PointIndex(world->net.intersections);
  return world;
}

// --- edits -------------------------------------------------------------------

std::string_view edit_name(const Edit& e) {
  static constexpr std::string_view names[] = {"add_poi", "remove_poi", "block_segment", "set_speed", "set_params"};
  return names[e.index()];
}

namespace {

json params_json(const field::FieldParams& p) {
  return {{"kernel", field::to_string(p.kernel)},
          {"bandwidth", p.bandwidth_m},
          {"bandwidth_acc", p.bandwidth_acc},
          {"alpha", p.alpha},
          {"walk_speed", p.walk_speed},
          {"mode", field::to_string(p.mode)},
          {"aggregate", field::to_string(p.aggregate)},
          {"cutoff", p.cutoff_multiple},
          {"fallback_k", p.fallback_k}};
}

field::FieldParams merge_params(const json& j, field::FieldParams p) {
  if (!j.is_object()) throw Error("invalid_params", "params must be an object");
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error("invalid_params", std::string(key) + " must be a number");
    out = j[key].get<double>();
  };
  auto name = [&](const char* key) -> std::string {
    if (!j[key].is_string()) throw Error("invalid_params", std::string(key) + " must be a string");
    return j[key].get<std::string>();
  };
  if (j.contains("kernel")) {
    auto k = field::parse_kernel(name("kernel"));
    if (!k) throw Error("invalid_params", "unknown kernel '" + name("kernel") + "'");
    p.kernel = *k;
  }
  if (j.contains("mode")) {
    auto m = field::parse_mode(name("mode"));
    if (!m) throw Error("invalid_params", "unknown mode '" + name("mode") + "'");
    p.mode = *m;
  }
  if (j.contains("aggregate")) {
    auto a = field::parse_aggregate(name("aggregate"));
    if (!a) throw Error("invalid_params", "unknown aggregate '" + name("aggregate") + "'");
    p.aggregate = *a;
  }
  number("bandwidth", p.bandwidth_m);
  number("bandwidth_acc", p.bandwidth_acc);
  number("alpha", p.alpha);
  number("walk_speed", p.walk_speed);
  number("cutoff", p.cutoff_multiple);
  if (j.contains("fallback_k")) {
    if (!j["fallback_k"].is_number_unsigned()) throw Error("invalid_params", "fallback_k must be a positive integer");
    p.fallback_k = j["fallback_k"].get<std::size_t>();
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw Error("invalid_params", e.what());
  }
  return p;
}

json edit_json(const Edit& e) {
  json j{{"op", edit_name(e)}};
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AddPoi>) {
          j["x"] = v.pos.x;
          j["y"] = v.pos.y;
          j["name"] = v.name;
        } else if constexpr (std::is_same_v<T, RemovePoi>) {
          j["poi"] = v.poi;
        } else if constexpr (std::is_same_v<T, BlockSegment>) {
          j["segment"] = v.segment;
        } else if constexpr (std::is_same_v<T, SetSpeed>) {
          j["segment"] = v.segment;
          j["speed_kmh"] = v.speed_kmh;
        } else {
          j["params"] = params_json(v.params);
        }
      },
      e);
  return j;
}

Edit parse_edit(const json& j, const field::FieldParams& base) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) {
    throw Error("invalid_edit", "edit must be an object with a string 'op'");
  }
  const std::string op = j["op"].get<std::string>();
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw Error("invalid_edit", std::string(op) + ": '" + key + "' must be a number");
    return j[key].get<double>();
  };
  auto id = [&](const char* key) -> std::uint32_t {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 0 ||
        j[key].get<std::int64_t>() > 0xFFFFFFFEll) {
      throw Error("invalid_edit", op + ": '" + key + "' must be a non-negative integer");
    }
    return static_cast<std::uint32_t>(j[key].get<std::int64_t>());
  };
  if (op == "add_poi") {
    AddPoi a{{number("x"), number("y")}, ""};
    if (j.contains("name")) {
      if (!j["name"].is_string()) throw Error("invalid_edit", "add_poi: 'name' must be a string");
      a.name = j["name"].get<std::string>();
    }
    return a;
  }
  if (op == "remove_poi") return RemovePoi{id("poi")};
  if (op == "block_segment") return BlockSegment{id("segment")};
  if (op == "set_speed") return SetSpeed{id("segment"), number("speed_kmh")};
  if (op == "set_params") {
    if (!j.contains("params")) throw Error("invalid_edit", "set_params: missing 'params'");
    try {
      return SetParams{merge_params(j["params"], base)};
    } catch (const Error& e) {
      throw Error("invalid_edit", e.what());
    }
  }
  throw Error("invalid_edit", "unknown edit op '" + op + "'");
}

json parse_json(std::string_view text, const char* kind) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(kind, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string edit_to_json(const Edit& e) { return edit_json(e).dump(); }

Edit edit_from_json(std::string_view text, const field::FieldParams& base) {
  return parse_edit(parse_json(text, "invalid_edit"), base);
}

std::string params_to_json(const field::FieldParams& p) { return params_json(p).dump(); }

field::FieldParams params_from_json(std::string_view text, const field::FieldParams& base) {
  return merge_params(parse_json(text, "invalid_params"), base);
}

// --- scenario -------------------------------------------------------------------

ScenarioPtr Scenario::create(std::string id, std::shared_ptr<const World> world, std::span<const geo::RawPoi> pois,
                             const field::FieldParams& params) {
  params.validate();
  std::shared_ptr<Scenario> s(new Scenario());
  s->id_ = std::move(id);
  s->world_ = std::move(world);
  s->params_ = params;
  s->graph_ = std::make_shared<net::DirectedRoadGraph>(net::build_graph(s->world_->net));
  for (const geo::RawPoi& p : pois) {
    s->pois_.push_back({s->next_poi_id_++, p.id, p.name, p.pos,
                        geo::attach_point(s->world_->net, p.pos, params.walk_speed)});
  }
  s->rebuild_trees(nullptr);
  s->finish();
  return s;
}

ScenarioPtr Scenario::create(std::string id, std::shared_ptr<const World> world, const field::FieldParams& params) {
  const World& w = *world;
  return create(std::move(id), std::move(world), std::span<const geo::RawPoi>(w.pois), params);
}

const Poi* Scenario::find_poi(PoiId id) const {
  auto it = std::lower_bound(pois_.begin(), pois_.end(), id, [](const Poi& p, PoiId v) { return p.id < v; });
  return it != pois_.end() && it->id == id ? &*it : nullptr;
}

const net::AccessTree* Scenario::tree(PoiId poi) const {
  for (const net::AccessTree* t : tree_ptrs_) {
    if (t->poi == poi) return t;
  }
  return nullptr;
}

field::FieldModel Scenario::model() const {
  return {world_->net.intersections, assignment_.get(), tree_ptrs_, &world_->faces, &world_->index};
}

field::FieldParams Scenario::render_params(const field::FieldParams& request) const {
  field::FieldParams p = params_;
  p.kernel = request.kernel;
  p.bandwidth_m = request.bandwidth_m;
  p.bandwidth_acc = request.bandwidth_acc;
  p.mode = request.mode;
  p.aggregate = request.aggregate;
  p.cutoff_multiple = request.cutoff_multiple;
  p.fallback_k = request.fallback_k;
  return p;
}

void Scenario::rebuild_trees(const Scenario* reuse) {
  const bool same_graph = reuse && (reuse->graph_ == graph_ || *reuse->graph_ == *graph_);
  trees_.clear();
  for (const Poi& p : pois_) {
    std::shared_ptr<const net::AccessTree> tree;
    if (same_graph) {
      const Poi* old = reuse->find_poi(p.id);
      if (old && old->attach == p.attach) {
        for (const auto& t : reuse->trees_) {
          if (t->poi == p.id) tree = t;
        }
      }
    }
    if (!tree) tree = std::make_shared<net::AccessTree>(net::shortest_path_tree(*graph_, p.id, p.attach));
    trees_.push_back(std::move(tree));
  }
}

void Scenario::finish() {
  tree_ptrs_.clear();
  for (const auto& t : trees_) tree_ptrs_.push_back(t.get());
  assignment_ = std::make_shared<net::AssignmentTable>(
      tree_ptrs_.empty() ? net::empty_assignment(world_->net.vertex_count())
                         : net::assign_intersections(std::span<const net::AccessTree* const>(tree_ptrs_), params_.alpha));
}

ScenarioPtr apply_edit(const ScenarioPtr& parent, const Edit& e, std::string child_id) {
  if (!parent) throw std::invalid_argument("apply_edit: null parent");
  std::shared_ptr<Scenario> child(new Scenario(*parent));
  child->id_ = std::move(child_id);
  child->parent_id_ = parent->id_;
  child->depth_ = parent->depth_ + 1;
  child->edit_ = e;
  const std::size_t segment_count = parent->graph_->segments().size();
  auto check_segment = [&](SegmentId s) {
    if (s >= segment_count) throw Error("dangling_reference", "unknown segment id " + std::to_string(s));
  };
  auto keep_graph_if_equal = [&](net::DirectedRoadGraph g) {
    if (g == *parent->graph_) return;
    child->graph_ = std::make_shared<net::DirectedRoadGraph>(std::move(g));
  };

  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AddPoi>) {
          if (!std::isfinite(v.pos.x) || !std::isfinite(v.pos.y)) throw Error("invalid_edit", "add_poi: non-finite position");
          child->pois_.push_back({child->next_poi_id_++, "", v.name, v.pos,
                                  geo::attach_point(child->world_->net, v.pos, child->params_.walk_speed)});
        } else if constexpr (std::is_same_v<T, RemovePoi>) {
          auto it = std::find_if(child->pois_.begin(), child->pois_.end(), [&](const Poi& p) { return p.id == v.poi; });
          if (it == child->pois_.end()) throw Error("dangling_reference", "unknown poi id " + std::to_string(v.poi));
          child->pois_.erase(it);
        } else if constexpr (std::is_same_v<T, BlockSegment>) {
          check_segment(v.segment);
          keep_graph_if_equal(net::remove_segment(*parent->graph_, v.segment));
        } else if constexpr (std::is_same_v<T, SetSpeed>) {
          check_segment(v.segment);
          if (!(v.speed_kmh > 0.0) || !std::isfinite(v.speed_kmh)) {
            throw Error("invalid_edit", "set_speed: speed must be > 0 km/h");
          }
          keep_graph_if_equal(net::set_segment_speed(*parent->graph_, v.segment, v.speed_kmh));
        } else {
          try {
            v.params.validate();
          } catch (const std::invalid_argument& ex) {
            throw Error("invalid_edit", ex.what());
          }
          child->params_ = v.params;
          if (v.params.walk_speed != parent->params_.walk_speed) {
            for (Poi& p : child->pois_) p.attach = geo::attach_point(child->world_->net, p.pos, v.params.walk_speed);
          }
        }
      },
      e);

  child->rebuild_trees(parent.get());
  const bool trees_shared = child->trees_ == parent->trees_;
  child->tree_ptrs_.clear();
  if (trees_shared && child->params_.alpha == parent->params_.alpha) {
    for (const auto& t : child->trees_) child->tree_ptrs_.push_back(t.get());
  } else {
    child->finish();
  }
  return child;
}

bool equivalent(const Scenario& a, const Scenario& b) {
  if (a.world_ptr() != b.world_ptr()) return false;
  if (!(a.graph() == b.graph()) || a.pois() != b.pois() || a.next_poi_id() != b.next_poi_id() ||
      !(a.params() == b.params()) || !(a.assignment() == b.assignment())) {
    return false;
  }
  if (a.trees().size() != b.trees().size()) return false;
  for (std::size_t i = 0; i < a.trees().size(); ++i) {
    if (!(*a.trees()[i] == *b.trees()[i])) return false;
  }
  return true;
}

std::vector<bool> changed_vertices(const Scenario& a, const Scenario& b, field::DensityMode mode) {
  const std::size_t n = a.net().vertex_count();
  if (b.net().vertex_count() != n) throw Error("mismatch", "scenarios have different networks");
  std::vector<bool> changed(n, false);
  if (mode == field::DensityMode::kAmplitudeDecay) {
    for (VertexId v = 0; v < n; ++v) {
      const net::Assignment& x = a.assignment()[v];
      const net::Assignment& y = b.assignment()[v];
      changed[v] = x.poi != y.poi || x.accessibility != y.accessibility;
    }
    return changed;
  }
  std::set<PoiId> ids;
  for (const auto* t : a.trees()) ids.insert(t->poi);
  for (const auto* t : b.trees()) ids.insert(t->poi);
  for (PoiId id : ids) {
    const net::AccessTree* ta = a.tree(id);
    const net::AccessTree* tb = b.tree(id);
    if (ta == tb) continue;
    for (VertexId v = 0; v < n; ++v) {
      const double x = ta ? ta->time_to[v] : kInfinity;
      const double y = tb ? tb->time_to[v] : kInfinity;
      if (x != y) changed[v] = true;
    }
  }
  return changed;
}

namespace {

field::PixelRect world_box_to_pixels(const BoundingBox& box, const field::Viewport& vp) {
  if (box.empty()) return {};
  const double dx = (vp.max_x - vp.min_x) / vp.width;
  const double dy = (vp.max_y - vp.min_y) / vp.height;
  // pixel center c lies at min_x + (c + 0.5) dx; pad one pixel each side
  auto clamp_index = [](double v, std::uint32_t limit) {
    return static_cast<std::uint32_t>(std::clamp(v, 0.0, static_cast<double>(limit)));
  };
  field::PixelRect r;
  r.col_begin = clamp_index(std::floor((box.min_x - vp.min_x) / dx - 0.5) - 1, vp.width);
  r.col_end = clamp_index(std::ceil((box.max_x - vp.min_x) / dx - 0.5) + 2, vp.width);
  r.row_begin = clamp_index(std::floor((vp.max_y - box.max_y) / dy - 0.5) - 1, vp.height);
  r.row_end = clamp_index(std::ceil((vp.max_y - box.min_y) / dy - 0.5) + 2, vp.height);
  return r;
}

}  // namespace

IncrementalResult incremental_raster(const field::DensityRaster& parent_raster, const Scenario& parent,
                                     const Scenario& child, const field::Viewport& viewport,
                                     const field::FieldParams& params, unsigned workers) {
  if (!(parent_raster.viewport == viewport) || !(parent_raster.params == params)) {
    throw Error("mismatch", "parent raster was computed for a different viewport or params");
  }
  if (parent.world_ptr() != child.world_ptr()) throw Error("mismatch", "scenarios belong to different datasets");
  if (params.alpha != child.params().alpha || params.walk_speed != child.params().walk_speed ||
      params.alpha != parent.params().alpha || params.walk_speed != parent.params().walk_speed) {
    throw Error("mismatch", "alpha/walk_speed differ from the scenarios' access model");
  }
  IncrementalResult out{parent_raster, {}, 0, 0};
  const std::vector<bool> changed = changed_vertices(parent, child, params.mode);
  const World& w = child.world();
  BoundingBox box;
  const double radius = params.max_radius();
  for (VertexId v = 0; v < changed.size(); ++v) {
    if (!changed[v]) continue;
    ++out.changed_vertices;
    const Point p = w.net.intersections[v];
    box.extend({p.x - radius, p.y - radius});
    box.extend({p.x + radius, p.y + radius});
  }
  if (out.changed_vertices == 0) return out;
  for (const field::Face& f : w.faces.faces()) {
    if (!f.bounded) continue;
    if (std::any_of(f.candidates.begin(), f.candidates.end(), [&](VertexId v) { return changed[v]; })) {
      box.extend({f.box.min_x, f.box.min_y});
      box.extend({f.box.max_x, f.box.max_y});
    }
  }
  out.region = world_box_to_pixels(box, viewport);
  if (out.region.empty()) return out;
  const field::FieldModel model = child.model();
  out.recomputed = field::rasterize_region(
      out.raster, model, out.region,
      [&](std::span<const VertexId> cands) {
        return std::any_of(cands.begin(), cands.end(), [&](VertexId v) { return changed[v]; });
      },
      workers);
  return out;
}

// --- diff -----------------------------------------------------------------------

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (!(mean > 0.0)) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size())) / mean;
}

DiffSummary diff(const field::DensityRaster& a, const field::DensityRaster& b) {
  if (!(a.viewport == b.viewport) || a.value.size() != b.value.size() || a.dominant.size() != b.dominant.size()) {
    throw Error("shape_mismatch", "rasters cover different viewports");
  }
  DiffSummary d;
  const std::size_t n = a.value.size();
  std::map<PoiId, AreaShare> shares;
  for (std::size_t i = 0; i < n; ++i) {
    if (a.dominant[i] != kNoPoi) shares[a.dominant[i]].before += 1.0;
    if (b.dominant[i] != kNoPoi) shares[b.dominant[i]].after += 1.0;
  }
  for (auto& [poi, s] : shares) {
    s.poi = poi;
    s.before /= static_cast<double>(n);
    s.after /= static_cast<double>(n);
    d.shares.push_back(s);
  }
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a.value[i];
    sb += b.value[i];
  }
  d.mean_before = n ? sa / static_cast<double>(n) : 0.0;
  d.mean_after = n ? sb / static_cast<double>(n) : 0.0;
  d.balance_before = coefficient_of_variation(a.value);
  d.balance_after = coefficient_of_variation(b.value);
  const std::uint32_t width = a.viewport.width;
  field::PixelRect box{width, a.viewport.height, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (a.value[i] == b.value[i] && a.dominant[i] == b.dominant[i]) continue;
    ++d.changed_pixels;
    const auto col = static_cast<std::uint32_t>(i % width);
    const auto row = static_cast<std::uint32_t>(i / width);
    box.col_begin = std::min(box.col_begin, col);
    box.row_begin = std::min(box.row_begin, row);
    box.col_end = std::max(box.col_end, col + 1);
    box.row_end = std::max(box.row_end, row + 1);
  }
  if (d.changed_pixels) d.changed_box = box;
  return d;
}

DiffSummary diff(const Scenario& a, const Scenario& b, const field::DensityRaster& ra,
                 const field::DensityRaster& rb) {
  if (a.world_ptr() != b.world_ptr()) throw Error("lineage_mismatch", "scenarios belong to different datasets");
  DiffSummary d = diff(ra, rb);
  const auto changed = changed_vertices(a, b, field::DensityMode::kAmplitudeDecay);
  d.changed_intersections = static_cast<std::size_t>(std::count(changed.begin(), changed.end(), true));
  return d;
}

field::Viewport default_viewport(const geo::SegmentedNetwork& net, std::uint32_t long_side) {
  BoundingBox b = net.bounds();
  if (b.empty()) b = {0.0, 0.0, 1.0, 1.0};
  const double cx = (b.min_x + b.max_x) / 2, cy = (b.min_y + b.max_y) / 2;
  const double span = std::max({b.max_x - b.min_x, b.max_y - b.min_y, 1.0});
  const double margin = 0.05 * span;
  double w = b.max_x - b.min_x + 2 * margin;
  double h = b.max_y - b.min_y + 2 * margin;
  field::Viewport vp;
  long_side = std::max<std::uint32_t>(long_side, 1);
  if (w >= h) {
    vp.width = long_side;
    vp.height = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(long_side * h / w)));
    h = w * vp.height / vp.width;
  } else {
    vp.height = long_side;
    vp.width = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(long_side * w / h)));
    w = h * vp.width / vp.height;
  }
  vp.min_x = cx - w / 2;
  vp.max_x = cx + w / 2;
  vp.min_y = cy - h / 2;
  vp.max_y = cy + h / 2;
  return vp;
}

// --- store -----------------------------------------------------------------------

ScenarioStore::ScenarioStore(std::string dataset_id, ScenarioPtr base, std::optional<std::filesystem::path> log_path)
    : dataset_id_(std::move(dataset_id)), base_(std::move(base)), log_path_(std::move(log_path)) {
  by_id_.emplace(base_->id(), base_);
  order_.push_back(base_);
  if (log_path_ && std::filesystem::exists(*log_path_)) {
    std::ifstream in(*log_path_);
    replay(in);
  }
}

ScenarioPtr ScenarioStore::get(std::string_view scenario_id) const {
  std::shared_lock lock(read_mutex_);
  auto it = by_id_.find(scenario_id);
  return it == by_id_.end() ? nullptr : it->second;
}

std::vector<ScenarioPtr> ScenarioStore::list() const {
  std::shared_lock lock(read_mutex_);
  return order_;
}

ScenarioPtr ScenarioStore::apply_locked(std::string_view parent_id, const Edit& e) {
  ScenarioPtr parent = get(parent_id);
  if (!parent) throw Error("not_found", "unknown scenario '" + std::string(parent_id) + "'");
  ScenarioPtr child = apply_edit(parent, e, dataset_id_ + "." + std::to_string(counter_ + 1));
  ++counter_;
  std::unique_lock lock(read_mutex_);
  by_id_.emplace(child->id(), child);
  order_.push_back(child);
  return child;
}

ScenarioPtr ScenarioStore::apply(std::string_view parent_id, const Edit& e) {
  std::lock_guard writer(write_mutex_);
  ScenarioPtr child = apply_locked(parent_id, e);
  if (log_path_) {
    std::ofstream out(*log_path_, std::ios::app);
    out << log_line(*child) << '\n';
    if (!out) throw std::runtime_error("cannot append to edit log " + log_path_->string());
  }
  return child;
}

std::string ScenarioStore::log_line(const Scenario& child) {
  if (!child.edit()) throw std::invalid_argument("base scenario has no edit");
  return json{{"id", child.id()}, {"parent", child.parent_id()}, {"edit", edit_json(*child.edit())}}.dump();
}

void ScenarioStore::replay(std::istream& log) {
  std::lock_guard writer(write_mutex_);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(log, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_json(line, "log_mismatch");
    if (!j.contains("id") || !j.contains("parent") || !j.contains("edit")) {
      throw Error("log_mismatch", "edit log line " + std::to_string(lineno) + " lacks id/parent/edit");
    }
    const std::string parent_id = j["parent"].get<std::string>();
    ScenarioPtr parent = get(parent_id);
    if (!parent) throw Error("log_mismatch", "edit log line " + std::to_string(lineno) + ": unknown parent");
    ScenarioPtr child = apply_locked(parent_id, parse_edit(j["edit"], parent->params()));
    if (child->id() != j["id"].get<std::string>()) {
      throw Error("log_mismatch", "edit log line " + std::to_string(lineno) + " replays to id " + child->id());
    }
  }
}

}  // namespace topomap::scenario
