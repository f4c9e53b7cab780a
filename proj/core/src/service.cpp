#include "topomap/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <mutex>
#include <semaphore>
#include <shared_mutex>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "topomap/render.hpp"

namespace topomap::service {

namespace {

using json = nlohmann::json;
using scenario::ScenarioPtr;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json poi_or_null(PoiId p) { return p == kNoPoi ? json(nullptr) : json(p); }
json vertex_or_null(VertexId v) { return v == kNoVertex ? json(nullptr) : json(v); }

json bbox_json(const BoundingBox& b) {
  if (b.empty()) return nullptr;
  return {{"min_x", b.min_x}, {"min_y", b.min_y}, {"max_x", b.max_x}, {"max_y", b.max_y}};
}

json handle_json(const DatasetHandle& h) {
  return {{"id", h.id},
          {"name", h.name},
          {"intersections", h.intersections},
          {"segments", h.segments},
          {"pois", h.pois},
          {"bbox", bbox_json(h.bounds)},
          {"planar", h.planar},
          {"warnings", h.warnings}};
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view message,
                json extra = json::object()) {
  json err = {{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  send_json(res, status, {{"error", err}});
}

int status_for(const std::string& kind) {
  if (kind == "not_found") return 404;
  if (kind == "lineage_mismatch") return 409;
  if (kind == "too_large") return 413;
  return 422;
}

struct RequestError {
  std::string kind;
  std::string message;
};

double number_param(const httplib::Request& req, const char* name) {
  const std::string s = req.get_param_value(name);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw RequestError{"invalid_params", std::string(name) + ": expected a finite number"};
  }
  return v;
}

std::uint32_t size_param(const httplib::Request& req, const char* name) {
  const double v = number_param(req, name);
  if (v != std::floor(v) || v < 1 || v > 1e6) {
    throw RequestError{"invalid_params", std::string(name) + ": expected an integer in [1, 1000000]"};
  }
  return static_cast<std::uint32_t>(v);
}

// Rendering params from the query string, merged over the scenario's params.
field::FieldParams query_params(const httplib::Request& req, const scenario::Scenario& sc) {
  json overlay = json::object();
  for (const char* key : {"kernel", "mode", "aggregate"}) {
    if (req.has_param(key)) overlay[key] = req.get_param_value(key);
  }
  for (const char* key : {"bandwidth", "bandwidth_acc", "cutoff"}) {
    if (req.has_param(key)) overlay[key] = number_param(req, key);
  }
  if (req.has_param("fallback_k")) overlay["fallback_k"] = size_param(req, "fallback_k");
  try {
    return sc.render_params(scenario::params_from_json(overlay.dump(), sc.params()));
  } catch (const Error& e) {
    throw RequestError{"invalid_params", e.what()};
  }
}

field::Viewport query_viewport(const httplib::Request& req, const scenario::Scenario& sc, std::size_t max_pixels) {
  field::Viewport vp = scenario::default_viewport(sc.net(), 512);
  const bool has_box = req.has_param("minx") || req.has_param("miny") || req.has_param("maxx") || req.has_param("maxy");
  if (req.has_param("minx")) vp.min_x = number_param(req, "minx");
  if (req.has_param("miny")) vp.min_y = number_param(req, "miny");
  if (req.has_param("maxx")) vp.max_x = number_param(req, "maxx");
  if (req.has_param("maxy")) vp.max_y = number_param(req, "maxy");
  if (!(vp.max_x > vp.min_x) || !(vp.max_y > vp.min_y)) {
    throw RequestError{"invalid_params", "viewport: max must exceed min"};
  }
  const bool has_w = req.has_param("width"), has_h = req.has_param("height");
  if (has_w) vp.width = size_param(req, "width");
  if (has_h) vp.height = size_param(req, "height");
  const double aspect = (vp.max_y - vp.min_y) / (vp.max_x - vp.min_x);
  if (has_w && !has_h) vp.height = std::max<std::uint32_t>(1, std::uint32_t(std::lround(vp.width * aspect)));
  if (has_h && !has_w) vp.width = std::max<std::uint32_t>(1, std::uint32_t(std::lround(vp.height / aspect)));
  if (has_box && !has_w && !has_h) {
    const std::uint32_t long_side = 512;
    if (aspect <= 1) {
      vp.width = long_side;
      vp.height = std::max<std::uint32_t>(1, std::uint32_t(std::lround(long_side * aspect)));
    } else {
      vp.height = long_side;
      vp.width = std::max<std::uint32_t>(1, std::uint32_t(std::lround(long_side / aspect)));
    }
  }
  try {
    vp.validate();
  } catch (const std::exception& e) {
    throw RequestError{"invalid_params", e.what()};
  }
  if (vp.pixel_count() > max_pixels) {
    throw RequestError{"invalid_params", "width*height exceeds " + std::to_string(max_pixels) + " pixels"};
  }
  return vp;
}

std::string viewport_key(const field::Viewport& vp) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%u,%u", vp.min_x, vp.min_y, vp.max_x, vp.max_y, vp.width,
                vp.height);
  return buf;
}

json scenario_json(const scenario::Scenario& s, std::string_view dataset) {
  json j = {{"id", s.id()},
            {"dataset", dataset},
            {"parent", s.parent_id().empty() ? json(nullptr) : json(s.parent_id())},
            {"depth", s.depth()},
            {"edit", s.edit() ? json::parse(scenario::edit_to_json(*s.edit())) : json(nullptr)},
            {"params", json::parse(scenario::params_to_json(s.params()))}};
  json pois = json::array();
  for (const auto& p : s.pois()) {
    pois.push_back({{"id", p.id},
                    {"key", p.key},
                    {"name", p.name},
                    {"x", p.pos.x},
                    {"y", p.pos.y},
                    {"intersection", vertex_or_null(p.attach.intersection)}});
  }
  j["pois"] = std::move(pois);
  std::size_t blocked = 0;
  for (const auto& seg : s.graph().segments()) blocked += seg.blocked;
  j["blocked_segments"] = blocked;
  return j;
}

json diff_json(const scenario::DiffSummary& d) {
  json shares = json::array();
  for (const auto& s : d.shares) shares.push_back({{"poi", s.poi}, {"before", s.before}, {"after", s.after}});
  json box = nullptr;
  if (d.changed_box) {
    box = {{"col_begin", d.changed_box->col_begin},
           {"row_begin", d.changed_box->row_begin},
           {"col_end", d.changed_box->col_end},
           {"row_end", d.changed_box->row_end}};
  }
  return {{"changed_intersections", d.changed_intersections},
          {"shares", shares},
          {"mean_before", d.mean_before},
          {"mean_after", d.mean_after},
          {"balance_before", d.balance_before},
          {"balance_after", d.balance_after},
          {"changed_pixels", d.changed_pixels},
          {"changed_box", box}};
}

struct Dataset {
  DatasetHandle handle;
  std::unique_ptr<scenario::ScenarioStore> store;
};

}  // namespace

std::string to_json(const DatasetHandle& h) { return handle_json(h).dump(); }

struct Server::Impl {
  explicit Impl(ServiceConfig c) : config(std::move(c)), renders(std::max(1u, config.max_concurrent_renders)) {}

  ServiceConfig config;
  httplib::Server http;
  std::counting_semaphore<> renders;

  mutable std::shared_mutex datasets_mutex;
  std::map<std::string, std::shared_ptr<Dataset>, std::less<>> datasets;  // by id
  std::vector<std::string> dataset_order;
  std::size_t dataset_counter = 0;

  // LRU raster cache keyed by scenario, viewport and params.
  std::mutex cache_mutex;
  std::list<std::pair<std::string, std::shared_ptr<const field::DensityRaster>>> cache_lru;
  std::unordered_map<std::string, decltype(cache_lru)::iterator> cache_index;

  unsigned workers() const { return config.render_workers ? config.render_workers : field::default_workers(); }

  std::shared_ptr<Dataset> dataset_of(std::string_view scenario_id) const {
    const std::string_view ds = scenario_id.substr(0, scenario_id.find('.'));
    std::shared_lock lock(datasets_mutex);
    auto it = datasets.find(ds);
    return it == datasets.end() ? nullptr : it->second;
  }

  ScenarioPtr scenario(std::string_view id) const {
    auto ds = dataset_of(id);
    return ds ? ds->store->get(id) : nullptr;
  }

  std::shared_ptr<Dataset> register_dataset(const std::string& id, std::string name, const geo::RawDataset& raw) {
    auto world = scenario::build_world(raw);
    auto ds = std::make_shared<Dataset>();
    ds->handle = {id,
                  std::move(name),
                  world->net.vertex_count(),
                  world->net.segments.size(),
                  world->pois.size(),
                  world->net.bounds(),
                  world->planar,
                  world->net.warnings};
    std::optional<std::filesystem::path> log;
    if (config.data_dir) log = *config.data_dir / id / "edits.jsonl";
    ds->store = std::make_unique<scenario::ScenarioStore>(id, scenario::Scenario::create(id, world), log);
    std::unique_lock lock(datasets_mutex);
    datasets.emplace(id, ds);
    dataset_order.push_back(id);
    return ds;
  }

  DatasetHandle ingest(std::string_view body, std::string name) {
    const geo::RawDataset raw = geo::parse_dataset(body);
    std::string id;
    {
      std::unique_lock lock(datasets_mutex);
      id = "d" + std::to_string(++dataset_counter);
    }
    if (config.data_dir) {
      const auto dir = *config.data_dir / id;
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "dataset.json", std::ios::binary) << body;
      std::ofstream(dir / "meta.json") << json{{"name", name}}.dump();
    }
    return register_dataset(id, std::move(name), raw)->handle;
  }

  void load_data_dir() {
    if (!config.data_dir) return;
    std::filesystem::create_directories(*config.data_dir);
    std::vector<std::pair<std::size_t, std::string>> found;
    for (const auto& entry : std::filesystem::directory_iterator(*config.data_dir)) {
      const std::string id = entry.path().filename().string();
      if (!entry.is_directory() || id.size() < 2 || id[0] != 'd') continue;
      std::size_t n = 0;
      const auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), n);
      if (ec != std::errc() || ptr != id.data() + id.size()) continue;
      if (std::filesystem::exists(entry.path() / "dataset.json")) found.emplace_back(n, id);
    }
    std::sort(found.begin(), found.end());
    for (const auto& [n, id] : found) {
      const auto dir = *config.data_dir / id;
      std::ifstream in(dir / "dataset.json", std::ios::binary);
      std::stringstream body;
      body << in.rdbuf();
      std::string name = "dataset";
      if (std::ifstream meta(dir / "meta.json"); meta) {
        const json m = json::parse(meta, nullptr, false);
        if (m.is_object() && m.contains("name") && m["name"].is_string()) name = m["name"];
      }
      register_dataset(id, name, geo::parse_dataset(body.str()));
      dataset_counter = std::max(dataset_counter, n);
    }
  }

  std::shared_ptr<const field::DensityRaster> cache_get(const std::string& key) {
    std::lock_guard lock(cache_mutex);
    auto it = cache_index.find(key);
    if (it == cache_index.end()) return nullptr;
    cache_lru.splice(cache_lru.begin(), cache_lru, it->second);
    return it->second->second;
  }

  void cache_put(const std::string& key, std::shared_ptr<const field::DensityRaster> r) {
    std::lock_guard lock(cache_mutex);
    if (auto it = cache_index.find(key); it != cache_index.end()) {
      cache_lru.splice(cache_lru.begin(), cache_lru, it->second);
      return;
    }
    cache_lru.emplace_front(key, std::move(r));
    cache_index[key] = cache_lru.begin();
    while (cache_lru.size() > std::max<std::size_t>(1, config.raster_cache_entries)) {
      cache_index.erase(cache_lru.back().first);
      cache_lru.pop_back();
    }
  }

  static std::string raster_key(const std::string& scenario_id, const field::Viewport& vp,
                                const field::FieldParams& p) {
    return scenario_id + "|" + viewport_key(vp) + "|" + scenario::params_to_json(p);
  }

  // Cached raster; a cached parent raster is patched incrementally.
  std::shared_ptr<const field::DensityRaster> raster(const scenario::Scenario& sc, const field::Viewport& vp,
                                                     const field::FieldParams& p) {
    const std::string key = raster_key(sc.id(), vp, p);
    if (auto hit = cache_get(key)) return hit;
    std::shared_ptr<const field::DensityRaster> out;
    {
      renders.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{renders};
      if (!sc.parent_id().empty()) {
        auto parent = scenario(sc.parent_id());
        auto parent_raster = parent ? cache_get(raster_key(parent->id(), vp, p)) : nullptr;
        if (parent_raster) {
          try {
            out = std::make_shared<const field::DensityRaster>(
                scenario::incremental_raster(*parent_raster, *parent, sc, vp, p, workers()).raster);
          } catch (const Error&) {
            out = nullptr;
          }
        }
      }
      if (!out) {
        out = std::make_shared<const field::DensityRaster>(
            field::rasterize(sc.model(), vp, p, workers(), config.max_pixels));
      }
    }
    cache_put(key, out);
    return out;
  }

  ScenarioPtr require_scenario(const std::string& id) {
    auto sc = scenario(id);
    if (!sc) throw RequestError{"not_found", "unknown scenario '" + id + "'"};
    return sc;
  }

  void routes();
  void render_endpoint(const httplib::Request& req, httplib::Response& res, bool png);
};

void Server::Impl::render_endpoint(const httplib::Request& req, httplib::Response& res, bool png) {
  auto sc = require_scenario(req.matches[1]);
  const field::Viewport vp = query_viewport(req, *sc, config.max_pixels);
  const field::FieldParams p = query_params(req, *sc);
  char etag[32];
  std::snprintf(etag, sizeof etag, "\"%016llx\"",
                static_cast<unsigned long long>(fnv1a((png ? "map|" : "grid|") + raster_key(sc->id(), vp, p))));
  res.set_header("ETag", etag);
  res.set_header("Cache-Control", "no-cache");
  const std::string inm = req.get_header_value("If-None-Match");
  if (!inm.empty() && (inm == etag || inm == "*" || inm.find(etag) != std::string::npos)) {
    res.status = 304;
    return;
  }
  auto r = raster(*sc, vp, p);
  if (!png) {
    res.set_content(field::encode_tdm1(*r), "application/octet-stream");
    return;
  }
  std::vector<render::MapPoi> pois;
  for (const auto& poi : sc->pois()) pois.push_back({poi.id, poi.pos});
  const render::MapLayers layers{&sc->net(), &sc->graph(), &sc->assignment(), pois};
  res.set_content(render::compose_map(layers, *r, {}, render::Palette::standard()), "image/png");
}

void Server::Impl::routes() {
  http.set_payload_max_length(config.max_body_bytes);
  http.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                            {"Access-Control-Expose-Headers", "ETag"}});
  http.Options(R"(.*)", [this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, If-None-Match");
    res.set_header("Access-Control-Max-Age", "600");
    res.status = 204;
  });

  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const RequestError& e) {
      send_error(res, status_for(e.kind), e.kind, e.message);
    } catch (const geo::DatasetError& e) {
      send_error(res, 400, e.kind(), e.what(), {{"field", e.field()}});
    } catch (const Error& e) {
      send_error(res, status_for(e.kind()), e.kind(), e.what());
    } catch (const std::length_error& e) {
      send_error(res, 422, "invalid_params", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 422, "invalid_params", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  http.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
    if (req.body.size() > config.max_body_bytes) {
      send_error(res, 413, "too_large", "dataset exceeds the upload limit");
      return;
    }
    const std::string name = req.has_param("name") ? req.get_param_value("name") : "dataset";
    send_json(res, 201, handle_json(ingest(req.body, name)));
  });

  http.Get("/datasets", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    std::shared_lock lock(datasets_mutex);
    for (const auto& id : dataset_order) out.push_back(handle_json(datasets.at(id)->handle));
    send_json(res, 200, out);
  });

  http.Get(R"(/datasets/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(datasets_mutex);
    auto it = datasets.find(std::string(req.matches[1]));
    if (it == datasets.end()) throw RequestError{"not_found", "unknown dataset"};
    send_json(res, 200, handle_json(it->second->handle));
  });

  http.Get("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<std::shared_ptr<Dataset>> list;
    {
      std::shared_lock lock(datasets_mutex);
      for (const auto& id : dataset_order) list.push_back(datasets.at(id));
    }
    const std::string only = req.get_param_value("dataset");
    json out = json::array();
    for (const auto& ds : list) {
      if (!only.empty() && ds->handle.id != only) continue;
      for (const auto& s : ds->store->list()) {
        out.push_back({{"id", s->id()},
                       {"dataset", ds->handle.id},
                       {"parent", s->parent_id().empty() ? json(nullptr) : json(s->parent_id())},
                       {"depth", s->depth()}});
      }
    }
    send_json(res, 200, out);
  });

  http.Get(R"(/scenarios/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto sc = require_scenario(req.matches[1]);
    send_json(res, 200, scenario_json(*sc, dataset_of(sc->id())->handle.id));
  });

  http.Get(R"(/scenarios/([^/]+)/map)",
           [this](const httplib::Request& req, httplib::Response& res) { render_endpoint(req, res, true); });
  http.Get(R"(/scenarios/([^/]+)/grid)",
           [this](const httplib::Request& req, httplib::Response& res) { render_endpoint(req, res, false); });

  http.Post(R"(/scenarios/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
    auto parent = require_scenario(req.matches[1]);
    auto ds = dataset_of(parent->id());
    const scenario::Edit e = scenario::edit_from_json(req.body, parent->params());
    auto child = ds->store->apply(parent->id(), e);
    send_json(res, 201, scenario_json(*child, ds->handle.id));
  });

  http.Get(R"(/scenarios/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
    auto sc = require_scenario(req.matches[1]);
    if (!req.has_param("x") || !req.has_param("y")) throw RequestError{"invalid_params", "x and y are required"};
    const Point p{number_param(req, "x"), number_param(req, "y")};
    const field::FieldParams params = query_params(req, *sc);
    const auto model = sc->model();
    const auto cand = field::candidate_intersections(p, sc->world().faces, sc->world().index, params.fallback_k,
                                                     params.max_radius());
    const field::PointDensity pd = field::topo_density_at(p, model, cand, params);
    const auto times = field::access_times_at(p, model, cand, params.walk_speed);
    json pois = json::array();
    for (const auto& poi : sc->pois()) {
      double t = kInfinity;
      for (const auto& [id, time] : times) {
        if (id == poi.id) t = time;
      }
      const field::PoiDensity* d = pd.find(poi.id);
      pois.push_back({{"poi", poi.id},
                      {"key", poi.key},
                      {"name", poi.name},
                      {"access_time_s", finite_or_null(t)},
                      {"density", d ? d->density : 0.0},
                      {"via", d ? vertex_or_null(d->via) : json(nullptr)}});
    }
    double walk_s = 0.0;
    if (pd.via != kNoVertex) walk_s = distance(p, sc->net().intersections[pd.via]) / params.walk_speed;
    send_json(res, 200,
              {{"x", p.x},
               {"y", p.y},
               {"dominant", poi_or_null(pd.dominant)},
               {"via", vertex_or_null(pd.via)},
               {"walk_time_s", walk_s},
               {"value", pd.value},
               {"candidates", cand},
               {"pois", pois}});
  });

  http.Get(R"(/scenarios/([^/]+)/assignments)", [this](const httplib::Request& req, httplib::Response& res) {
    auto sc = require_scenario(req.matches[1]);
    json out = json::array();
    for (VertexId v = 0; v < sc->net().vertex_count(); ++v) {
      const auto& a = sc->assignment()[v];
      out.push_back({{"intersection", v},
                     {"x", sc->net().intersections[v].x},
                     {"y", sc->net().intersections[v].y},
                     {"poi", poi_or_null(a.poi)},
                     {"best_time_s", finite_or_null(a.best_time_s)},
                     {"accessibility", a.accessibility}});
    }
    send_json(res, 200, out);
  });

  http.Get(R"(/scenarios/([^/]+)/diff/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto a = require_scenario(req.matches[1]);
    auto b = require_scenario(req.matches[2]);
    if (a->world_ptr() != b->world_ptr()) {
      throw RequestError{"lineage_mismatch", "scenarios belong to different datasets"};
    }
    const field::Viewport vp = scenario::default_viewport(a->net(), 256);
    auto ra = raster(*a, vp, a->params());
    auto rb = raster(*b, vp, b->params());
    send_json(res, 200, diff_json(scenario::diff(*a, *b, *ra, *rb)));
  });
}

Server::Server(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->load_data_dir();
  impl_->routes();
}

Server::~Server() { stop(); }

DatasetHandle Server::ingest(std::string_view dataset_json, std::string name) {
  return impl_->ingest(dataset_json, std::move(name));
}

std::vector<DatasetHandle> Server::datasets() const {
  std::shared_lock lock(impl_->datasets_mutex);
  std::vector<DatasetHandle> out;
  for (const auto& id : impl_->dataset_order) out.push_back(impl_->datasets.at(id)->handle);
  return out;
}

scenario::ScenarioPtr Server::find_scenario(std::string_view id) const { return impl_->scenario(id); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::run() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace topomap::service
