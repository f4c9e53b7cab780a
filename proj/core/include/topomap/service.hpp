#pragma once

// HTTP service: datasets, map/grid rendering, point queries, scenario edits
// and comparison. Built on cpp-httplib; the transport stays out of this header.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topomap/scenario.hpp"

namespace topomap::service {

struct ServiceConfig {
  std::optional<std::filesystem::path> data_dir;  // persists datasets and edit logs
  std::size_t max_body_bytes = 64u * 1024u * 1024u;
  std::size_t max_pixels = 16u * 1024u * 1024u;
  unsigned max_concurrent_renders = 32;
  unsigned render_workers = 0;  // 0: field::default_workers()
  std::size_t raster_cache_entries = 64;
  std::string cors_origin = "*";
};

struct DatasetHandle {
  std::string id;
  std::string name;
  std::size_t intersections = 0;
  std::size_t segments = 0;
  std::size_t pois = 0;
  BoundingBox bounds;
  bool planar = true;
  std::vector<std::string> warnings;
};

std::string to_json(const DatasetHandle& h);

class Server {
 public:
  explicit Server(ServiceConfig config = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Parses, segments and registers a dataset; the base scenario id equals the
  // dataset id. Throws geo::DatasetError.
  DatasetHandle ingest(std::string_view dataset_json, std::string name = "dataset");
  std::vector<DatasetHandle> datasets() const;
  scenario::ScenarioPtr find_scenario(std::string_view id) const;

  // Binds `host`; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Serves until stop(). bind() must have succeeded.
  bool run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topomap::service
