#include "topomap/field.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace topomap::field {

double kernel_eval(Kernel k, double u) {
  if (!(u >= 0.0) || !std::isfinite(u)) throw std::domain_error("kernel argument must be finite and >= 0");
  switch (k) {
    case Kernel::kGaussian:
      return std::exp(-0.5 * u * u);
    case Kernel::kSigmoid:
      return 2.0 / (1.0 + std::exp(u));
    case Kernel::kParabolic:
      return std::max(0.0, 1.0 - u * u);
    case Kernel::kNegExp:
      return std::exp(-u);
  }
  return 0.0;
}

std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::kGaussian: return "gaussian";
    case Kernel::kSigmoid: return "sigmoid";
    case Kernel::kParabolic: return "parabolic";
    case Kernel::kNegExp: return "negexp";
  }
  return "?";
}

std::optional<Kernel> parse_kernel(std::string_view name) {
  for (Kernel k : {Kernel::kGaussian, Kernel::kSigmoid, Kernel::kParabolic, Kernel::kNegExp}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(DensityMode m) {
  return m == DensityMode::kAmplitudeDecay ? "amplitude-decay" : "eq4-literal";
}

std::optional<DensityMode> parse_mode(std::string_view name) {
  if (name == "amplitude-decay") return DensityMode::kAmplitudeDecay;
  if (name == "eq4-literal") return DensityMode::kEq4Literal;
  return std::nullopt;
}

std::string_view to_string(Aggregate a) { return a == Aggregate::kMax ? "max" : "sum"; }

std::optional<Aggregate> parse_aggregate(std::string_view name) {
  if (name == "max") return Aggregate::kMax;
  if (name == "sum") return Aggregate::kSum;
  return std::nullopt;
}

void FieldParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
  };
  positive(bandwidth_m, "bandwidth");
  positive(bandwidth_acc, "bandwidth_acc");
  positive(alpha, "alpha");
  positive(walk_speed, "walk_speed");
  if (!(cutoff_multiple >= 1.0) || !std::isfinite(cutoff_multiple)) {
    throw std::invalid_argument("cutoff_multiple must be >= 1");
  }
  if (fallback_k == 0) throw std::invalid_argument("fallback_k must be >= 1");
}

void Viewport::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("viewport width and height must be positive");
  if (!(max_x > min_x) || !(max_y > min_y) || !std::isfinite(min_x) || !std::isfinite(max_x) ||
      !std::isfinite(min_y) || !std::isfinite(max_y)) {
    throw std::invalid_argument("viewport extent must satisfy min < max");
  }
}

// --- planar KDE ------------------------------------------------------------------

double planar_kde(std::span<const Point> events, Point s, Kernel k, double r, double cutoff_multiple) {
  if (!(r > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  const double norm = 1.0 / (std::numbers::pi * r * r);
  // Only drop the tail when the kernel is negligible at the cutoff.
  const bool may_drop = kernel_eval(k, cutoff_multiple) < 1e-12;
  const double cutoff = cutoff_multiple * r;
  double sum = 0.0;
  for (Point x : events) {
    const double d = distance(x, s);
    if (may_drop && d > cutoff) continue;
    sum += norm * kernel_eval(k, d / r);
  }
  return sum;
}

// --- NKDE --------------------------------------------------------------------------

namespace {

Point along(const std::vector<Point>& polyline, double offset) {
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const double len = distance(polyline[i], polyline[i + 1]);
    if (walked + len >= offset || i + 2 == polyline.size()) {
      const double t = len > 0.0 ? std::clamp((offset - walked) / len, 0.0, 1.0) : 0.0;
      return polyline[i] + (polyline[i + 1] - polyline[i]) * t;
    }
    walked += len;
  }
  return polyline.back();
}

}  // namespace

EventSet snap_events(const geo::SegmentedNetwork& net, std::span<const Point> points) {
  EventSet out;
  out.points.assign(points.begin(), points.end());
  for (Point p : points) {
    std::optional<NetworkAnchor> best;
    double best_d = kInfinity;
    for (const geo::Segment& s : net.segments) {
      double walked = 0.0;
      for (std::size_t i = 0; i + 1 < s.polyline.size(); ++i) {
        const Point a = s.polyline[i];
        const Point b = s.polyline[i + 1];
        const Point ab = b - a;
        const double len2 = ab.x * ab.x + ab.y * ab.y;
        const double t = len2 > 0.0 ? std::clamp(((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2, 0.0, 1.0) : 0.0;
        const double d = distance(p, a + ab * t);
        if (d < best_d) {
          best_d = d;
          best = NetworkAnchor{s.id, walked + std::sqrt(len2) * t};
        }
        walked += std::sqrt(len2);
      }
    }
    out.anchors.push_back(best);
  }
  return out;
}

std::vector<NkdeSample> nkde(const net::DirectedRoadGraph& g, const geo::SegmentedNetwork& net,
                             const EventSet& events, double spacing_m, Kernel k, double r, bool directed) {
  if (!(spacing_m > 0.0)) throw std::invalid_argument("sample spacing must be > 0");
  if (!(r > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  if (events.anchors.size() != events.points.size()) throw std::invalid_argument("events are not anchored");
  for (const auto& a : events.anchors) {
    if (!a) throw std::invalid_argument("event is not anchored to the network");
    if (a->segment >= g.segments().size()) throw std::invalid_argument("event anchored to unknown segment");
  }

  net::DirectedRoadGraph graph = g;
  if (!directed) {
    std::vector<net::SegmentState> states(g.segments().begin(), g.segments().end());
    for (auto& s : states) s.oneway = false;
    graph = net::DirectedRoadGraph(g.vertex_count(), std::move(states));
  }
  const auto segs = graph.segments();
  auto forward_ok = [&](SegmentId s) { return !segs[s].blocked; };
  auto backward_ok = [&](SegmentId s) { return !segs[s].blocked && !segs[s].oneway; };

  std::vector<NkdeSample> samples;
  for (const geo::Segment& s : net.segments) {
    if (segs[s.id].blocked) continue;
    for (double off = 0.0; off < s.length_m; off += spacing_m) {
      samples.push_back({s.id, off, along(s.polyline, off), 0.0});
    }
    samples.push_back({s.id, s.length_m, s.polyline.back(), 0.0});
  }

  for (const auto& anchor : events.anchors) {
    const SegmentId es = anchor->segment;
    const double a = anchor->offset_m;
    std::vector<std::pair<VertexId, double>> seeds;
    if (forward_ok(es)) seeds.emplace_back(segs[es].to, segs[es].length_m - a);
    if (backward_ok(es)) seeds.emplace_back(segs[es].from, a);
    const auto search = net::dijkstra(graph, seeds, [&](const net::Arc& arc) { return segs[arc.segment].length_m; });
    for (NkdeSample& smp : samples) {
      const SegmentId ts = smp.segment;
      const double b = smp.offset_m;
      double d = kInfinity;
      if (ts == es) {
        if (b >= a && forward_ok(es)) d = std::min(d, b - a);
        if (b <= a && backward_ok(es)) d = std::min(d, a - b);
        if (b == a) d = 0.0;
      }
      d = std::min(d, search.cost[segs[ts].from] + b);
      if (backward_ok(ts)) d = std::min(d, search.cost[segs[ts].to] + (segs[ts].length_m - b));
      if (std::isfinite(d)) smp.density += kernel_eval(k, d / r) / r;
    }
  }
  return samples;
}

// --- topology density -----------------------------------------------------------

std::vector<VertexId> candidate_intersections(Point p, const FaceSet& faces, const PointIndex& index,
                                              std::size_t fallback_k, double max_radius) {
  if (auto face = faces.locate(p)) return faces.face(*face).candidates;
  return index.nearest(p, fallback_k, max_radius);
}

const PoiDensity* PointDensity::find(PoiId poi) const {
  for (const PoiDensity& d : per_poi) {
    if (d.poi == poi) return &d;
  }
  return nullptr;
}

namespace {

// Reusable per-thread scratch so rasterization does not allocate per pixel.
class Evaluator {
 public:
  Evaluator(const FieldModel& model, const FieldParams& params) : model_(model), params_(params) {}

  std::span<const VertexId> candidates(Point p) {
    if (auto face = model_.faces->locate(p)) return model_.faces->face(*face).candidates;
    model_.index->nearest(p, params_.fallback_k, params_.max_radius(), fallback_, scratch_);
    return fallback_;
  }

  // Fills `out` (per_poi reused).
  void evaluate(Point p, std::span<const VertexId> candidates, PointDensity& out) const {
    out.per_poi.clear();
    out.dominant = kNoPoi;
    out.via = kNoVertex;
    out.value = 0.0;
    if (params_.mode == DensityMode::kAmplitudeDecay) {
      amplitude_decay(p, candidates, out.per_poi);
    } else {
      eq4_literal(p, candidates, out.per_poi);
    }
    double best = 0.0;
    double sum = 0.0;
    for (const PoiDensity& d : out.per_poi) sum += d.density;
    if (params_.mode == DensityMode::kAmplitudeDecay) {
      for (const PoiDensity& d : out.per_poi) {
        if (d.density > best) {
          best = d.density;
          out.dominant = d.poi;
          out.via = d.via;
        }
      }
    } else {
      // The winner is the POI with the shortest access time; its density is
      // the literal kernel value, which need not be the largest one.
      double fastest = kInfinity;
      for (const PoiDensity& d : out.per_poi) {
        if (d.access_time_s < fastest) {
          fastest = d.access_time_s;
          best = d.density;
          out.dominant = d.poi;
          out.via = d.via;
        }
      }
      if (!(sum > 0.0)) {
        out.dominant = kNoPoi;
        out.via = kNoVertex;
      }
    }
    out.value = params_.aggregate == Aggregate::kMax ? best : sum;
  }

 private:
  static PoiDensity& slot(std::vector<PoiDensity>& per_poi, PoiId poi, bool& created) {
    auto it = std::lower_bound(per_poi.begin(), per_poi.end(), poi,
                               [](const PoiDensity& d, PoiId id) { return d.poi < id; });
    created = it == per_poi.end() || it->poi != poi;
    if (created) it = per_poi.insert(it, PoiDensity{poi, 0.0, kNoVertex, kInfinity});
    return *it;
  }

  void amplitude_decay(Point p, std::span<const VertexId> candidates, std::vector<PoiDensity>& per_poi) const {
    const double r = params_.bandwidth_m;
    for (VertexId v : candidates) {
      const net::Assignment& a = (*model_.assignment)[v];
      if (a.poi == kNoPoi) continue;
      const double c = a.accessibility * kernel_eval(params_.kernel, distance(p, model_.positions[v]) / r);
      bool created = false;
      PoiDensity& d = slot(per_poi, a.poi, created);
      if (created || c > d.density) {
        d.density = c;
        d.via = v;
      }
    }
  }

  void eq4_literal(Point p, std::span<const VertexId> candidates, std::vector<PoiDensity>& per_poi) const {
    const double ra = params_.bandwidth_acc;
    for (const net::AccessTree* tree : model_.trees) {
      double best = kInfinity;
      VertexId via = kNoVertex;
      for (VertexId v : candidates) {
        const double t = tree->time_to[v];
        if (!std::isfinite(t)) continue;
        const double total = t + distance(p, model_.positions[v]) / params_.walk_speed;
        if (total < best) {
          best = total;
          via = v;
        }
      }
      if (via == kNoVertex) continue;
      const double density = kernel_eval(params_.kernel, net::accessibility(best, params_.alpha) / ra) / ra;
      per_poi.push_back({tree->poi, density, via, best});
    }
  }

  const FieldModel& model_;
  const FieldParams& params_;
  std::vector<VertexId> fallback_;
  std::vector<std::pair<double, VertexId>> scratch_;
};

template <typename RowFn>
void for_rows(std::uint32_t row_begin, std::uint32_t row_end, unsigned workers, RowFn&& fn) {
  const std::uint32_t rows = row_end > row_begin ? row_end - row_begin : 0;
  workers = std::max(1u, std::min<unsigned>(workers == 0 ? default_workers() : workers, std::max(rows, 1u)));
  if (workers == 1) {
    fn(row_begin, row_end);
    return;
  }
  std::vector<std::jthread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint32_t b = row_begin + static_cast<std::uint32_t>(std::uint64_t{rows} * w / workers);
    const std::uint32_t e = row_begin + static_cast<std::uint32_t>(std::uint64_t{rows} * (w + 1) / workers);
    threads.emplace_back([&, b, e, w] {
      try {
        fn(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  threads.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_model(const FieldModel& model) {
  if (!model.assignment || !model.faces || !model.index) throw std::invalid_argument("incomplete field model");
}

}  // namespace

PointDensity topo_density_at(Point p, const FieldModel& model, std::span<const VertexId> candidates,
                             const FieldParams& params) {
  check_model(model);
  Evaluator eval(model, params);
  PointDensity out;
  eval.evaluate(p, candidates, out);
  return out;
}

PointDensity topo_density_at(Point p, const FieldModel& model, const FieldParams& params) {
  check_model(model);
  Evaluator eval(model, params);
  PointDensity out;
  const auto candidates = eval.candidates(p);
  eval.evaluate(p, candidates, out);
  return out;
}

std::vector<std::pair<PoiId, double>> access_times_at(Point p, const FieldModel& model,
                                                      std::span<const VertexId> candidates, double walk_speed) {
  std::vector<std::pair<PoiId, double>> out;
  for (const net::AccessTree* tree : model.trees) {
    double best = kInfinity;
    for (VertexId v : candidates) {
      const double t = tree->time_to[v];
      if (std::isfinite(t)) best = std::min(best, t + distance(p, model.positions[v]) / walk_speed);
    }
    out.emplace_back(tree->poi, best);
  }
  return out;
}

unsigned default_workers() {
  if (const char* env = std::getenv("TOPOMAP_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return static_cast<unsigned>(std::min(n, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

DensityRaster rasterize(const FieldModel& model, const Viewport& viewport, const FieldParams& params,
                        unsigned workers, std::size_t max_pixels) {
  check_model(model);
  viewport.validate();
  params.validate();
  if (viewport.pixel_count() > max_pixels) {
    throw std::length_error("viewport of " + std::to_string(viewport.pixel_count()) + " pixels exceeds the " +
                            std::to_string(max_pixels) + " pixel limit");
  }
  DensityRaster raster;
  raster.viewport = viewport;
  raster.params = params;
  raster.value.assign(viewport.pixel_count(), 0.0);
  raster.dominant.assign(viewport.pixel_count(), kNoPoi);
  rasterize_region(raster, model, {0, 0, viewport.width, viewport.height},
                   [](std::span<const VertexId>) { return true; }, workers);
  return raster;
}

std::size_t rasterize_region(DensityRaster& raster, const FieldModel& model, PixelRect rect,
                             const std::function<bool(std::span<const VertexId>)>& affected, unsigned workers) {
  check_model(model);
  const Viewport& vp = raster.viewport;
  rect.col_end = std::min(rect.col_end, vp.width);
  rect.row_end = std::min(rect.row_end, vp.height);
  if (rect.empty()) return 0;
  std::atomic<std::size_t> count{0};
  for_rows(rect.row_begin, rect.row_end, workers, [&](std::uint32_t b, std::uint32_t e) {
    Evaluator eval(model, raster.params);
    PointDensity pd;
    std::size_t local = 0;
    for (std::uint32_t row = b; row < e; ++row) {
      for (std::uint32_t col = rect.col_begin; col < rect.col_end; ++col) {
        const Point p = vp.pixel_center(col, row);
        const auto candidates = eval.candidates(p);
        if (!affected(candidates)) continue;
        eval.evaluate(p, candidates, pd);
        const std::size_t i = std::size_t{row} * vp.width + col;
        raster.value[i] = pd.value;
        raster.dominant[i] = pd.dominant;
        ++local;
      }
    }
    count += local;
  });
  return count.load();
}

DensityRaster planar_kde_raster(std::span<const Point> events, const Viewport& viewport, Kernel k, double r,
                                unsigned workers) {
  viewport.validate();
  DensityRaster raster;
  raster.viewport = viewport;
  raster.params.kernel = k;
  raster.params.bandwidth_m = r;
  raster.value.assign(viewport.pixel_count(), 0.0);
  raster.dominant.assign(viewport.pixel_count(), kNoPoi);
  for_rows(0, viewport.height, workers, [&](std::uint32_t b, std::uint32_t e) {
    for (std::uint32_t row = b; row < e; ++row) {
      for (std::uint32_t col = 0; col < viewport.width; ++col) {
        raster.value[std::size_t{row} * viewport.width + col] = planar_kde(events, viewport.pixel_center(col, row), k, r);
      }
    }
  });
  return raster;
}

// --- TDM1 ----------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(in[at + i])} << (8 * i);
  return v;
}

}  // namespace

std::string encode_tdm1(const DensityRaster& raster, std::uint32_t flags) {
  const std::size_t n = raster.viewport.pixel_count();
  std::string out;
  out.reserve(16 + n * 6);
  out.append("TDM1");
  put_u32(out, raster.viewport.width);
  put_u32(out, raster.viewport.height);
  put_u32(out, flags);
  for (double v : raster.value) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (PoiId poi : raster.dominant) {
    std::uint16_t ord = 0xFFFF;
    if (poi != kNoPoi) {
      if (poi >= 0xFFFF) throw std::range_error("POI id does not fit the 16-bit grid format");
      ord = static_cast<std::uint16_t>(poi);
    }
    out.push_back(static_cast<char>(ord & 0xFF));
    out.push_back(static_cast<char>(ord >> 8));
  }
  return out;
}

DecodedGrid decode_tdm1(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "TDM1") throw std::invalid_argument("not a TDM1 grid");
  DecodedGrid g;
  g.width = get_u32(bytes, 4);
  g.height = get_u32(bytes, 8);
  g.flags = get_u32(bytes, 12);
  const std::size_t n = std::size_t{g.width} * g.height;
  if (bytes.size() != 16 + n * 6) throw std::invalid_argument("TDM1 grid has the wrong length");
  g.value.resize(n);
  g.dominant.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.value[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  const std::size_t base = 16 + 4 * n;
  for (std::size_t i = 0; i < n; ++i) {
    g.dominant[i] = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[base + 2 * i]) |
                                               (static_cast<unsigned char>(bytes[base + 2 * i + 1]) << 8));
  }
  return g;
}

}  // namespace topomap::field
