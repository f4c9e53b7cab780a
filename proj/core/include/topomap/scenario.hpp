#pragma once

// Immutable scenario snapshots, what-if edits, incremental rasters and
// scenario comparison.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "topomap/faces.hpp"
#include "topomap/field.hpp"
#include "topomap/geodata.hpp"
#include "topomap/netgraph.hpp"

namespace topomap::scenario {

// Geometry shared by every scenario of one dataset.
struct World {
  geo::SegmentedNetwork net;
  field::FaceSet faces;
  field::PointIndex index;
  bool planar = true;           // false: faces empty, every pixel uses the k-nearest fallback
  std::string planarity_issue;  // NonPlanarError message when !planar
  std::optional<Point> origin;  // lon/lat origin when projected from wgs84
  std::vector<geo::RawPoi> pois;  // dataset POIs, projected
};

// Segments, projects (wgs84) and extracts faces. Throws geo::DatasetError.
std::shared_ptr<const World> build_world(const geo::RawDataset& raw);

struct Poi {
  PoiId id = kNoPoi;
  std::string key;  // dataset id, empty for added POIs
  std::string name;
  Point pos;
  geo::PoiAttachment attach;

  friend bool operator==(const Poi&, const Poi&) = default;
};

struct AddPoi {
  Point pos;
  std::string name;
  friend bool operator==(const AddPoi&, const AddPoi&) = default;
};
struct RemovePoi {
  PoiId poi = kNoPoi;
  friend bool operator==(const RemovePoi&, const RemovePoi&) = default;
};
struct BlockSegment {
  SegmentId segment = 0;
  friend bool operator==(const BlockSegment&, const BlockSegment&) = default;
};
struct SetSpeed {
  SegmentId segment = 0;
  double speed_kmh = 0.0;
  friend bool operator==(const SetSpeed&, const SetSpeed&) = default;
};
struct SetParams {
  field::FieldParams params;
  friend bool operator==(const SetParams&, const SetParams&) = default;
};
using Edit = std::variant<AddPoi, RemovePoi, BlockSegment, SetSpeed, SetParams>;

std::string_view edit_name(const Edit& e);
// {"op": "add_poi", "x": .., "y": .., "name": ..} etc. SetParams carries a
// "params" object that is merged onto `base` when parsed.
std::string edit_to_json(const Edit& e);
// Throws Error("invalid_edit").
Edit edit_from_json(std::string_view text, const field::FieldParams& base);

std::string params_to_json(const field::FieldParams& p);
// Keys: kernel, bandwidth, bandwidth_acc, alpha, walk_speed, mode, aggregate,
// cutoff, fallback_k. Missing keys keep `base`. Throws Error("invalid_params").
field::FieldParams params_from_json(std::string_view text, const field::FieldParams& base);

class Scenario;
using ScenarioPtr = std::shared_ptr<const Scenario>;

class Scenario {
 public:
  // Base scenario: dataset POIs get ids 0..n-1 in file order.
  static ScenarioPtr create(std::string id, std::shared_ptr<const World> world, std::span<const geo::RawPoi> pois,
                            const field::FieldParams& params = {});
  // Uses world->pois.
  static ScenarioPtr create(std::string id, std::shared_ptr<const World> world, const field::FieldParams& params = {});

  const std::string& id() const { return id_; }
  const std::string& parent_id() const { return parent_id_; }  // empty for the base
  std::size_t depth() const { return depth_; }
  const std::optional<Edit>& edit() const { return edit_; }

  const World& world() const { return *world_; }
  const std::shared_ptr<const World>& world_ptr() const { return world_; }
  const geo::SegmentedNetwork& net() const { return world_->net; }
  const net::DirectedRoadGraph& graph() const { return *graph_; }
  const std::vector<Poi>& pois() const { return pois_; }
  const Poi* find_poi(PoiId id) const;
  PoiId next_poi_id() const { return next_poi_id_; }
  const field::FieldParams& params() const { return params_; }
  const net::AssignmentTable& assignment() const { return *assignment_; }
  std::span<const net::AccessTree* const> trees() const { return tree_ptrs_; }
  const net::AccessTree* tree(PoiId poi) const;

  field::FieldModel model() const;

  // Copies scenario params, overriding only rendering fields (kernel,
  // bandwidths, mode, aggregate, cutoff, fallback_k) from `request`.
  field::FieldParams render_params(const field::FieldParams& request) const;

 private:
  friend ScenarioPtr apply_edit(const ScenarioPtr& parent, const Edit& e, std::string child_id);
  Scenario() = default;
  void rebuild_trees(const Scenario* reuse);
  void finish();

  std::string id_;
  std::string parent_id_;
  std::size_t depth_ = 0;
  std::optional<Edit> edit_;
  std::shared_ptr<const World> world_;
  std::shared_ptr<const net::DirectedRoadGraph> graph_;
  std::vector<Poi> pois_;
  PoiId next_poi_id_ = 0;
  field::FieldParams params_;
  std::vector<std::shared_ptr<const net::AccessTree>> trees_;  // ascending poi id
  std::vector<const net::AccessTree*> tree_ptrs_;
  std::shared_ptr<const net::AssignmentTable> assignment_;
};

// Child scenario; the parent is untouched. Throws Error("dangling_reference")
// for unknown POI/segment ids and Error("invalid_edit") for bad values.
ScenarioPtr apply_edit(const ScenarioPtr& parent, const Edit& e, std::string child_id);

// Value equality of inputs and derived caches, ignoring ids and lineage.
bool equivalent(const Scenario& a, const Scenario& b);

// Intersections whose contribution to the density field may differ between
// the scenarios under `mode`: (poi, accessibility) for amplitude-decay, any
// tree time for eq4-literal. Exact comparison.
std::vector<bool> changed_vertices(const Scenario& a, const Scenario& b, field::DensityMode mode);

struct IncrementalResult {
  field::DensityRaster raster;
  field::PixelRect region;         // pixels scanned
  std::size_t recomputed = 0;      // pixels re-evaluated
  std::size_t changed_vertices = 0;
};

// Patches `parent_raster` into the child's raster. Bitwise-equal to
// field::rasterize(child.model(), ...). Throws Error("mismatch") when the
// raster was made for another viewport/params or the scenarios live in
// different worlds.
IncrementalResult incremental_raster(const field::DensityRaster& parent_raster, const Scenario& parent,
                                     const Scenario& child, const field::Viewport& viewport,
                                     const field::FieldParams& params, unsigned workers = 0);

struct AreaShare {
  PoiId poi = kNoPoi;
  double before = 0.0;  // fraction of pixels dominated
  double after = 0.0;
};

struct DiffSummary {
  std::size_t changed_intersections = 0;
  std::vector<AreaShare> shares;  // ascending poi id
  double mean_before = 0.0;
  double mean_after = 0.0;
  double balance_before = 0.0;  // coefficient of variation, 0 for a zero mean
  double balance_after = 0.0;
  std::size_t changed_pixels = 0;
  std::optional<field::PixelRect> changed_box;
};

// stddev / mean of the values (population stddev); 0 when the mean is 0.
double coefficient_of_variation(std::span<const double> values);

// Throws Error("shape_mismatch") for rasters of different viewports.
DiffSummary diff(const field::DensityRaster& a, const field::DensityRaster& b);
// Also counts changed intersections (amplitude-decay rule of `a`'s params).
DiffSummary diff(const Scenario& a, const Scenario& b, const field::DensityRaster& ra,
                 const field::DensityRaster& rb);

// Viewport covering the network bounds with a 5% margin, long side `long_side` px.
field::Viewport default_viewport(const geo::SegmentedNetwork& net, std::uint32_t long_side = 512);

// Scenario tree of one dataset. Creation is serialized; lookups may run
// concurrently with creation.
class ScenarioStore {
 public:
  // Replays `log_path` when it exists, then appends every new edit to it.
  ScenarioStore(std::string dataset_id, ScenarioPtr base, std::optional<std::filesystem::path> log_path = {});

  const std::string& dataset_id() const { return dataset_id_; }
  ScenarioPtr base() const { return base_; }
  ScenarioPtr get(std::string_view scenario_id) const;
  std::vector<ScenarioPtr> list() const;  // creation order
  ScenarioPtr apply(std::string_view parent_id, const Edit& e);

  // Log line: {"id": .., "parent": .., "edit": {..}}
  static std::string log_line(const Scenario& child);
  // Rebuilds scenarios from log lines; recorded ids must match derivation.
  void replay(std::istream& log);

 private:
  ScenarioPtr apply_locked(std::string_view parent_id, const Edit& e);

  std::string dataset_id_;
  ScenarioPtr base_;
  std::optional<std::filesystem::path> log_path_;
  std::size_t counter_ = 0;
  mutable std::shared_mutex read_mutex_;
  std::mutex write_mutex_;
  std::map<std::string, ScenarioPtr, std::less<>> by_id_;
  std::vector<ScenarioPtr> order_;
};

}  // namespace topomap::scenario
