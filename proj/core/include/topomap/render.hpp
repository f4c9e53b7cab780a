#pragma once

// Color mapping, tapered road strokes, NKDE line widths, sweep montages and
// final map composition. All functions are read-only over their inputs.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topomap/field.hpp"
#include "topomap/geodata.hpp"
#include "topomap/image.hpp"
#include "topomap/netgraph.hpp"

namespace topomap::render {

struct Palette {
  std::vector<Rgba> hues;  // cycled by poi id
  Rgba background{250, 250, 247, 255};
  Rgba network{150, 150, 150, 255};
  Rgba blocked{190, 60, 60, 255};
  Rgba marker_outline{30, 30, 30, 255};
  Rgba label_text{20, 20, 20, 255};
  Rgba label_box{255, 255, 255, 210};

  Rgba hue(PoiId poi) const;
  // 12 categorical hues.
  static Palette standard();
};

struct TaperStyle {
  double w_max = 6.0;
  double w_min = 1.0;
  double marker_radius = 5.0;

  // Throws std::invalid_argument unless w_max > w_min >= 1.
  void validate() const;
};

// w(t) = w_max + (w_min - w_max) t for t in [0, 1].
double taper_width(const TaperStyle& style, double t);

// Hue of the dominant POI with alpha = value / max (per-image max unless
// `norm_max` is given). Zero density and no-dominant pixels are transparent.
Image colorize(const field::DensityRaster& raster, const Palette& palette,
               std::optional<double> norm_max = std::nullopt);

// Polyline in pixel coordinates with one width per vertex; drawn as
// trapezoids with round joins, 4x4 supersampled.
struct Stroke {
  std::vector<Point> path;
  std::vector<double> widths;
  Rgba color;
};

void draw_stroke(Image& image, const Stroke& stroke);
void draw_disc(Image& image, Point center, double radius, Rgba color);

struct PlannedStroke {
  SegmentId segment = 0;
  VertexId wide_end = kNoVertex;  // kNoVertex for uniform strokes
  PoiId poi = kNoPoi;
  int side = 0;  // +1 right of from->to, -1 left, 0 centered
  Stroke stroke;
};

// Stroke layout for every segment: the endpoint with higher accessibility is
// w_max wide and the width tapers linearly along arc length; equal endpoints
// get a uniform (w_max + w_min) / 2 with the lower vertex id's POI hue.
// Two-way segments become two strokes offset by +-w_max/2. Blocked segments
// are red hairlines and unreachable ones plain w_min network strokes.
std::vector<PlannedStroke> plan_tapered_segments(const geo::SegmentedNetwork& net,
                                                 const net::DirectedRoadGraph& graph,
                                                 const net::AssignmentTable& assignment,
                                                 const field::Viewport& viewport, const TaperStyle& style,
                                                 const Palette& palette);

void draw_tapered_segments(Image& image, const geo::SegmentedNetwork& net, const net::DirectedRoadGraph& graph,
                           const net::AssignmentTable& assignment, const field::Viewport& viewport,
                           const TaperStyle& style, const Palette& palette);

struct NkdeStyle {
  double width_scale = 1000.0;  // px per density unit
  double w_max = 6.0;
  Rgba color{200, 40, 40, 255};
};

// clamp(density * scale, 1, w_max)
double nkde_width(double density, const NkdeStyle& style);

// Background plus one variable-width stroke per sampled segment.
// Throws std::invalid_argument for an empty sample list.
Image render_nkde(std::span<const field::NkdeSample> samples, const geo::SegmentedNetwork& net,
                  const field::Viewport& viewport, const NkdeStyle& style, const Palette& palette);

// 5x7 bitmap font. Lowercase is drawn as uppercase; unknown glyphs as blanks.
void draw_text(Image& image, int x, int y, std::string_view text, int scale, Rgba color);
int text_width(std::string_view text, int scale);
// Text on a translucent box anchored at the top-left corner.
void draw_label(Image& image, std::string_view text, const Palette& palette);

std::string sweep_label(const field::FieldParams& params);

struct SweepTile {
  field::Kernel kernel = field::Kernel::kGaussian;
  double bandwidth = 0.0;  // meters, or accessibility units in eq4-literal mode
  double mean_density = 0.0;
  std::string label;
};

struct Montage {
  Image image;
  std::uint32_t tile_width = 0;
  std::uint32_t tile_height = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<SweepTile> tiles;  // row-major: rows = kernels, cols = bandwidths

  Image tile(std::size_t row, std::size_t col) const;
};

// Background + colorize(rasterize(...)) + label. `mean_density` receives the
// raster mean when non-null.
Image render_tile(const field::FieldModel& model, const field::Viewport& viewport, const field::FieldParams& params,
                  const Palette& palette, double* mean_density = nullptr, unsigned workers = 0);

// Sets bandwidth_m (or bandwidth_acc in eq4-literal mode) per column.
// Throws std::invalid_argument for empty lists.
Montage render_sweep(const field::FieldModel& model, const field::Viewport& tile_viewport,
                     const field::FieldParams& base, std::span<const field::Kernel> kernels,
                     std::span<const double> bandwidths, const Palette& palette, unsigned workers = 0);

struct MapPoi {
  PoiId id = kNoPoi;
  Point pos;
};

struct MapLayers {
  const geo::SegmentedNetwork* net = nullptr;
  const net::DirectedRoadGraph* graph = nullptr;
  const net::AssignmentTable* assignment = nullptr;
  std::span<const MapPoi> pois;
};

// Background, density layer, tapered segments, POI markers.
Image compose_image(const MapLayers& layers, const field::DensityRaster& raster, const TaperStyle& style,
                    const Palette& palette);
std::string compose_map(const MapLayers& layers, const field::DensityRaster& raster, const TaperStyle& style,
                        const Palette& palette);

}  // namespace topomap::render
