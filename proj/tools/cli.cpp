#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "topomap/render.hpp"
#include "topomap/scenario.hpp"
#include "topomap/service.hpp"
#include "topomap/synthetic.hpp"

namespace topomap::cli {

namespace {

using json = nlohmann::json;

// Bad flag values or input that fails validation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParamFlags {
  std::string kernel = "gaussian";
  std::string mode = "amplitude-decay";
  std::string aggregate = "max";
  double bandwidth = 300.0;
  double bandwidth_acc = 0.003;
  double alpha = 1.0;
  double walk_speed = geo::kDefaultWalkSpeed;
  double cutoff = 3.0;
  std::size_t fallback_k = 8;
};

void add_param_flags(CLI::App* app, ParamFlags& f) {
  app->add_option("--kernel", f.kernel, "gaussian|sigmoid|parabolic|negexp")->capture_default_str();
  app->add_option("--bandwidth", f.bandwidth, "Walk-decay radius r in meters")->capture_default_str();
  app->add_option("--bandwidth-acc", f.bandwidth_acc, "r_a for eq4-literal mode")->capture_default_str();
  app->add_option("--alpha", f.alpha, "Accessibility attenuation")->capture_default_str();
  app->add_option("--walk-speed", f.walk_speed, "Walking speed, m/s")->capture_default_str();
  app->add_option("--mode", f.mode, "amplitude-decay|eq4-literal")->capture_default_str();
  app->add_option("--aggregate", f.aggregate, "max|sum")->capture_default_str();
  app->add_option("--cutoff", f.cutoff, "Kernel tail cutoff, multiples of r")->capture_default_str();
  app->add_option("--fallback-k", f.fallback_k, "Nearest intersections outside faces")->capture_default_str();
}

field::FieldParams to_params(const ParamFlags& f) {
  field::FieldParams p;
  auto k = field::parse_kernel(f.kernel);
  if (!k) throw UsageError("unknown kernel '" + f.kernel + "'");
  auto m = field::parse_mode(f.mode);
  if (!m) throw UsageError("unknown mode '" + f.mode + "'");
  auto a = field::parse_aggregate(f.aggregate);
  if (!a) throw UsageError("unknown aggregate '" + f.aggregate + "'");
  p.kernel = *k;
  p.mode = *m;
  p.aggregate = *a;
  p.bandwidth_m = f.bandwidth;
  p.bandwidth_acc = f.bandwidth_acc;
  p.alpha = f.alpha;
  p.walk_speed = f.walk_speed;
  p.cutoff_multiple = f.cutoff;
  p.fallback_k = f.fallback_k;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

struct ViewFlags {
  std::optional<double> minx, miny, maxx, maxy;
  std::optional<std::uint32_t> width, height;
};

void add_view_flags(CLI::App* app, ViewFlags& v) {
  app->add_option("--minx", v.minx, "Viewport, dataset meters");
  app->add_option("--miny", v.miny);
  app->add_option("--maxx", v.maxx);
  app->add_option("--maxy", v.maxy);
  app->add_option("--width", v.width, "Image width in pixels (default 512 on the long side)");
  app->add_option("--height", v.height, "Image height in pixels");
}

field::Viewport to_viewport(const ViewFlags& v, const geo::SegmentedNetwork& net) {
  const bool has_box = v.minx || v.miny || v.maxx || v.maxy;
  std::uint32_t long_side = 512;
  if (!has_box && v.width && !v.height) long_side = *v.width;
  field::Viewport vp = scenario::default_viewport(net, long_side);
  if (v.minx) vp.min_x = *v.minx;
  if (v.miny) vp.min_y = *v.miny;
  if (v.maxx) vp.max_x = *v.maxx;
  if (v.maxy) vp.max_y = *v.maxy;
  if (!(vp.max_x > vp.min_x) || !(vp.max_y > vp.min_y)) throw UsageError("viewport: max must exceed min");
  const double aspect = (vp.max_y - vp.min_y) / (vp.max_x - vp.min_x);
  if (v.width) vp.width = *v.width;
  if (v.height) vp.height = *v.height;
  if (v.width && !v.height && has_box) vp.height = std::max<std::uint32_t>(1, std::uint32_t(std::lround(*v.width * aspect)));
  if (v.height && !v.width) vp.width = std::max<std::uint32_t>(1, std::uint32_t(std::lround(*v.height / aspect)));
  if (has_box && !v.width && !v.height) {
    vp.width = aspect <= 1 ? 512 : std::max<std::uint32_t>(1, std::uint32_t(std::lround(512 / aspect)));
    vp.height = aspect <= 1 ? std::max<std::uint32_t>(1, std::uint32_t(std::lround(512 * aspect))) : 512;
  }
  try {
    vp.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return vp;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw std::runtime_error("cannot write " + path);
  }
}

bool is_osm(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".osm" || ext == ".xml";
}

geo::RawDataset load_dataset(const std::string& path) {
  const std::string text = read_file(path);
  return is_osm(path) ? geo::import_osm_xml(text) : geo::parse_dataset(text);
}

scenario::ScenarioPtr load_scenario(const std::string& path, const field::FieldParams& params) {
  return scenario::Scenario::create("base", scenario::build_world(load_dataset(path)), params);
}

std::vector<render::MapPoi> map_pois(const scenario::Scenario& sc) {
  std::vector<render::MapPoi> out;
  for (const auto& p : sc.pois()) out.push_back({p.id, p.pos});
  return out;
}

std::pair<std::uint32_t, std::uint32_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw UsageError("size '" + s + "' must look like 640x400");
  try {
    std::size_t used = 0;
    const unsigned long w = std::stoul(s.substr(0, x), &used);
    if (used != x) throw UsageError("bad size " + s);
    const std::string hs = s.substr(x + 1);
    const unsigned long h = std::stoul(hs, &used);
    if (used != hs.size() || w == 0 || h == 0 || w > 100000 || h > 100000) throw UsageError("bad size " + s);
    return {std::uint32_t(w), std::uint32_t(h)};
  } catch (const std::logic_error&) {
    throw UsageError("bad size " + s);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::atomic<service::Server*> g_server{nullptr};

extern "C" void on_stop_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology density maps for road networks"};
  app.name("topomap");
  app.require_subcommand(1);
  app.set_version_flag("--version", "topomap 0.1.0");

  unsigned workers = 0;
  app.add_option("--workers", workers, "Render threads (0: TOPOMAP_THREADS or hardware)")->capture_default_str();

  // render
  auto* render_cmd = app.add_subcommand("render", "Render a topology density map to PNG");
  std::string render_in, render_out, render_grid;
  ParamFlags render_params;
  ViewFlags render_view;
  render_cmd->add_option("dataset", render_in, "Dataset JSON or OSM XML")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("-o,--output", render_out, "PNG path")->required();
  render_cmd->add_option("--grid", render_grid, "Also write the TDM1 grid here");
  add_param_flags(render_cmd, render_params);
  add_view_flags(render_cmd, render_view);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Kernel x bandwidth montage");
  std::string sweep_in, sweep_out;
  std::vector<std::string> sweep_kernels{"gaussian", "sigmoid"};
  std::vector<double> sweep_bw{100, 200, 300, 400, 500};
  ParamFlags sweep_params;
  ViewFlags sweep_view;
  sweep_cmd->add_option("dataset", sweep_in)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("-o,--output", sweep_out, "Montage PNG path")->required();
  sweep_cmd->add_option("--kernels", sweep_kernels, "Comma-separated kernels (rows)")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--bandwidths", sweep_bw, "Comma-separated bandwidths (columns)")
      ->delimiter(',')
      ->capture_default_str();
  add_param_flags(sweep_cmd, sweep_params);
  add_view_flags(sweep_cmd, sweep_view);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time topology vs planar KDE on a synthetic grid");
  std::vector<std::string> bench_sizes{"640x400", "1280x800", "1920x1200"};
  std::vector<int> bench_pois{10, 50, 100};
  std::vector<std::string> bench_methods{"topology", "planar"};
  int bench_repeats = 5;
  std::uint64_t bench_seed = 1;
  std::string bench_out;
  bench_cmd->add_option("--sizes", bench_sizes)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--pois", bench_pois)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--methods", bench_methods)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--repeats", bench_repeats, "Timed runs per row (median reported)")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed)->capture_default_str();
  bench_cmd->add_option("-o,--output", bench_out, "CSV path (default stdout)");

  // query
  auto* query_cmd = app.add_subcommand("query", "Per-POI access times and densities at a point");
  std::string query_in;
  double qx = 0, qy = 0;
  ParamFlags query_params;
  query_cmd->add_option("dataset", query_in)->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--x", qx)->required();
  query_cmd->add_option("--y", qy)->required();
  add_param_flags(query_cmd, query_params);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  std::vector<std::string> preload;
  serve_cmd->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535))->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir, "Persist datasets and edit logs here");
  serve_cmd->add_option("--dataset", preload, "Datasets to ingest at startup")->check(CLI::ExistingFile);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse, validate and summarize a dataset");
  std::string ingest_in, ingest_out;
  bool ingest_validate = false;
  ingest_cmd->add_option("-i,--input", ingest_in)->required()->check(CLI::ExistingFile);
  ingest_cmd->add_flag("--validate", ingest_validate, "Only validate; print diagnostics");
  ingest_cmd->add_option("-o,--output", ingest_out, "Write the normalized dataset JSON here");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*render_cmd) {
      auto sc = load_scenario(render_in, to_params(render_params));
      const field::Viewport vp = to_viewport(render_view, sc->net());
      const auto raster = field::rasterize(sc->model(), vp, sc->params(), workers);
      const auto pois = map_pois(*sc);
      const render::MapLayers layers{&sc->net(), &sc->graph(), &sc->assignment(), pois};
      write_file(render_out, render::compose_map(layers, raster, {}, render::Palette::standard()));
      if (!render_grid.empty()) write_file(render_grid, field::encode_tdm1(raster));
      out << "wrote " << render_out << " (" << vp.width << "x" << vp.height << ")\n";
    } else if (*sweep_cmd) {
      if (sweep_kernels.empty() || sweep_bw.empty()) throw UsageError("sweep needs at least one kernel and bandwidth");
      std::vector<field::Kernel> kernels;
      for (const auto& k : sweep_kernels) {
        auto parsed = field::parse_kernel(k);
        if (!parsed) throw UsageError("unknown kernel '" + k + "'");
        kernels.push_back(*parsed);
      }
      for (double b : sweep_bw) {
        if (!(b > 0) || !std::isfinite(b)) throw UsageError("bandwidths must be positive");
      }
      auto sc = load_scenario(sweep_in, to_params(sweep_params));
      ViewFlags tile_view = sweep_view;
      if (!tile_view.width && !tile_view.height) tile_view.width = 256;
      const field::Viewport vp = to_viewport(tile_view, sc->net());
      const auto montage =
          render::render_sweep(sc->model(), vp, sc->params(), kernels, sweep_bw, render::Palette::standard(), workers);
      write_file(sweep_out, render::encode_png(montage.image));
      out << "kernel,bandwidth,mean_density\n";
      out << std::setprecision(10);
      for (const auto& t : montage.tiles) {
        out << field::to_string(t.kernel) << "," << t.bandwidth << "," << t.mean_density << "\n";
      }
    } else if (*bench_cmd) {
      std::vector<std::pair<std::uint32_t, std::uint32_t>> sizes;
      for (const auto& s : bench_sizes) sizes.push_back(parse_size(s));
      for (const auto& m : bench_methods) {
        if (m != "topology" && m != "planar") throw UsageError("unknown method '" + m + "'");
      }
      for (int n : bench_pois) {
        if (n < 1) throw UsageError("--pois values must be >= 1");
      }
      std::ostringstream csv;
      csv << "method,width,height,pois,ms\n" << std::fixed << std::setprecision(3);
      for (const auto& method : bench_methods) {
        for (const auto& [w, h] : sizes) {
          for (int n : bench_pois) {
            geo::SyntheticSpec spec;
            spec.poi_count = n;
            spec.seed = bench_seed;
            auto sc = scenario::Scenario::create("bench", scenario::build_world(geo::synthetic_grid(spec)));
            field::Viewport vp = scenario::default_viewport(sc->net(), 1);
            vp.width = w;
            vp.height = h;
            std::vector<Point> events;
            for (const auto& p : sc->pois()) events.push_back(p.pos);
            auto once = [&] {
              const auto t0 = std::chrono::steady_clock::now();
              if (method == "topology") {
                auto r = field::rasterize(sc->model(), vp, sc->params(), workers);
              } else {
                auto r = field::planar_kde_raster(events, vp, sc->params().kernel, sc->params().bandwidth_m, workers);
              }
              return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            };
            once();  // warmup
            std::vector<double> times;
            for (int i = 0; i < bench_repeats; ++i) times.push_back(once());
            csv << method << "," << w << "," << h << "," << n << "," << std::max(median(times), 1e-3) << "\n";
          }
        }
      }
      if (bench_out.empty()) {
        out << csv.str();
      } else {
        write_file(bench_out, csv.str());
      }
    } else if (*query_cmd) {
      auto sc = load_scenario(query_in, to_params(query_params));
      const Point p{qx, qy};
      const auto& params = sc->params();
      const auto model = sc->model();
      const auto cand = field::candidate_intersections(p, sc->world().faces, sc->world().index, params.fallback_k,
                                                       params.max_radius());
      const auto pd = field::topo_density_at(p, model, cand, params);
      const auto times = field::access_times_at(p, model, cand, params.walk_speed);
      json pois = json::array();
      for (const auto& poi : sc->pois()) {
        double t = kInfinity;
        for (const auto& [id, time] : times) {
          if (id == poi.id) t = time;
        }
        const auto* d = pd.find(poi.id);
        pois.push_back({{"poi", poi.id},
                        {"key", poi.key},
                        {"access_time_s", finite_or_null(t)},
                        {"density", d ? d->density : 0.0}});
      }
      out << json{{"x", p.x},
                  {"y", p.y},
                  {"dominant", pd.dominant == kNoPoi ? json(nullptr) : json(pd.dominant)},
                  {"via", pd.via == kNoVertex ? json(nullptr) : json(pd.via)},
                  {"value", pd.value},
                  {"pois", pois}}
                 .dump(2)
          << "\n";
    } else if (*serve_cmd) {
      service::ServiceConfig cfg;
      if (!data_dir.empty()) cfg.data_dir = data_dir;
      cfg.render_workers = workers;
      service::Server server(cfg);
      for (const auto& path : preload) {
        const auto h = server.ingest(read_file(path), std::filesystem::path(path).stem().string());
        out << "dataset " << h.id << " <- " << path << "\n";
      }
      const int bound = server.bind(host, port);
      if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
      out << "listening on http://" << host << ":" << bound << std::endl;
      g_server = &server;
      auto prev_int = std::signal(SIGINT, on_stop_signal);
      auto prev_term = std::signal(SIGTERM, on_stop_signal);
      const bool ok = server.run();
      std::signal(SIGINT, prev_int);
      std::signal(SIGTERM, prev_term);
      g_server = nullptr;
      if (!ok) throw std::runtime_error("server stopped with an error");
    } else if (*ingest_cmd) {
      const geo::RawDataset raw = load_dataset(ingest_in);
      auto world = scenario::build_world(raw);
      const auto b = world->net.bounds();
      out << "nodes " << raw.nodes.size() << "\nways " << raw.ways.size() << "\nintersections "
          << world->net.vertex_count() << "\nsegments " << world->net.segments.size() << "\npois "
          << raw.pois.size() << "\n";
      if (!b.empty()) out << "bounds " << b.min_x << " " << b.min_y << " " << b.max_x << " " << b.max_y << "\n";
      for (const auto& w : world->net.warnings) out << "warning: " << w << "\n";
      if (!ingest_validate && !ingest_out.empty()) write_file(ingest_out, geo::serialize_dataset(raw));
      out << (ingest_validate ? "valid\n" : "ok\n");
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const geo::DatasetError& e) {
    err << "invalid dataset [" << e.kind() << "]";
    if (!e.field().empty()) err << " at " << e.field();
    err << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace topomap::cli
