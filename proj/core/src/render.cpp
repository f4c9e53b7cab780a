#include "topomap/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace topomap::render {

Rgba Palette::hue(PoiId poi) const {
  if (poi == kNoPoi || hues.empty()) return network;
  return hues[poi % hues.size()];
}

Palette Palette::standard() {
  Palette p;
  // Paired-qualitative set, saturated members first.
  p.hues = {
      {31, 120, 180, 255},  {227, 26, 28, 255},   {51, 160, 44, 255},  {255, 127, 0, 255},
      {106, 61, 154, 255},  {177, 89, 40, 255},   {0, 170, 170, 255},  {231, 41, 138, 255},
      {102, 102, 0, 255},   {166, 206, 227, 255}, {178, 223, 138, 255}, {251, 154, 153, 255},
  };
  return p;
}

void TaperStyle::validate() const {
  if (!(w_min >= 1.0) || !(w_max > w_min) || !std::isfinite(w_max)) {
    throw std::invalid_argument("taper style: need w_max > w_min >= 1");
  }
  if (!(marker_radius >= 0.0)) throw std::invalid_argument("taper style: marker_radius must be >= 0");
}

double taper_width(const TaperStyle& style, double t) {
  t = std::clamp(t, 0.0, 1.0);
  return style.w_max + (style.w_min - style.w_max) * t;
}

Image colorize(const field::DensityRaster& raster, const Palette& palette, std::optional<double> norm_max) {
  const auto& vp = raster.viewport;
  Image out(vp.width, vp.height);
  double max = 0.0;
  if (norm_max) {
    max = *norm_max;
  } else {
    for (std::size_t i = 0; i < raster.value.size(); ++i) {
      const double v = raster.value[i];
      if (raster.dominant[i] != kNoPoi && std::isfinite(v)) max = std::max(max, v);
    }
  }
  if (!(max > 0.0)) return out;
  for (std::uint32_t row = 0; row < vp.height; ++row) {
    for (std::uint32_t col = 0; col < vp.width; ++col) {
      const PoiId poi = raster.dominant_at(col, row);
      const double v = raster.at(col, row);
      if (poi == kNoPoi || !(v > 0.0)) continue;
      Rgba c = palette.hue(poi);
      c.a = static_cast<std::uint8_t>(std::lround(255.0 * std::min(v / max, 1.0)));
      out.set(col, row, c);
    }
  }
  return out;
}

namespace {

constexpr int kSuper = 4;

struct Mask {
  int x0 = 0, y0 = 0, w = 0, h = 0;  // pixel bbox
  std::vector<std::uint8_t> bits;      // (w*kSuper) x (h*kSuper)

  bool empty() const { return w <= 0 || h <= 0; }
  int sw() const { return w * kSuper; }

  template <class Inside>
  void fill(double minx, double miny, double maxx, double maxy, Inside inside) {
    const int sx0 = std::max(0, static_cast<int>(std::floor((minx - x0) * kSuper - 0.5)));
    const int sy0 = std::max(0, static_cast<int>(std::floor((miny - y0) * kSuper - 0.5)));
    const int sx1 = std::min(sw() - 1, static_cast<int>(std::ceil((maxx - x0) * kSuper)));
    const int sy1 = std::min(h * kSuper - 1, static_cast<int>(std::ceil((maxy - y0) * kSuper)));
    for (int sy = sy0; sy <= sy1; ++sy) {
      const double py = y0 + (sy + 0.5) / kSuper;
      for (int sx = sx0; sx <= sx1; ++sx) {
        const double px = x0 + (sx + 0.5) / kSuper;
        if (inside(Point{px, py})) bits[std::size_t(sy) * sw() + sx] = 1;
      }
    }
  }

  void apply(Image& image, Rgba color) const {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int count = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          const std::uint8_t* row = &bits[std::size_t(y * kSuper + sy) * sw() + x * kSuper];
          for (int sx = 0; sx < kSuper; ++sx) count += row[sx];
        }
        if (count) image.blend(x0 + x, y0 + y, color, count / double(kSuper * kSuper));
      }
    }
  }
};

Mask make_mask(const Image& image, double minx, double miny, double maxx, double maxy) {
  Mask m;
  m.x0 = std::max(0, static_cast<int>(std::floor(minx)) - 1);
  m.y0 = std::max(0, static_cast<int>(std::floor(miny)) - 1);
  const int x1 = std::min(static_cast<int>(image.width()), static_cast<int>(std::ceil(maxx)) + 1);
  const int y1 = std::min(static_cast<int>(image.height()), static_cast<int>(std::ceil(maxy)) + 1);
  m.w = x1 - m.x0;
  m.h = y1 - m.y0;
  if (!m.empty()) m.bits.assign(std::size_t(m.w) * m.h * kSuper * kSuper, 0);
  return m;
}

bool inside_convex(const Point (&q)[4], Point p) {
  bool pos = false, neg = false;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q[(i + 1) % 4] - q[i], p - q[i]);
    if (c > 0) pos = true;
    if (c < 0) neg = true;
  }
  return !(pos && neg);
}

}  // namespace

void draw_stroke(Image& image, const Stroke& s) {
  if (s.path.size() < 2 || s.widths.size() != s.path.size()) return;
  double minx = kInfinity, miny = kInfinity, maxx = -kInfinity, maxy = -kInfinity;
  for (std::size_t i = 0; i < s.path.size(); ++i) {
    const double r = s.widths[i] / 2;
    minx = std::min(minx, s.path[i].x - r);
    miny = std::min(miny, s.path[i].y - r);
    maxx = std::max(maxx, s.path[i].x + r);
    maxy = std::max(maxy, s.path[i].y + r);
  }
  Mask mask = make_mask(image, minx, miny, maxx, maxy);
  if (mask.empty()) return;
  for (std::size_t i = 0; i + 1 < s.path.size(); ++i) {
    const Point a = s.path[i], b = s.path[i + 1];
    const double len = distance(a, b);
    if (len <= 0) continue;
    const Point n{-(b.y - a.y) / len, (b.x - a.x) / len};
    const double ha = s.widths[i] / 2, hb = s.widths[i + 1] / 2;
    const Point q[4] = {a + n * ha, b + n * hb, b - n * hb, a - n * ha};
    double qx0 = q[0].x, qy0 = q[0].y, qx1 = q[0].x, qy1 = q[0].y;
    for (const Point& c : q) {
      qx0 = std::min(qx0, c.x);
      qy0 = std::min(qy0, c.y);
      qx1 = std::max(qx1, c.x);
      qy1 = std::max(qy1, c.y);
    }
    mask.fill(qx0, qy0, qx1, qy1, [&](Point p) { return inside_convex(q, p); });
  }
  // round joins
  for (std::size_t i = 1; i + 1 < s.path.size(); ++i) {
    const Point c = s.path[i];
    const double r = s.widths[i] / 2;
    mask.fill(c.x - r, c.y - r, c.x + r, c.y + r, [&](Point p) { return distance(p, c) <= r; });
  }
  mask.apply(image, s.color);
}

void draw_disc(Image& image, Point c, double radius, Rgba color) {
  if (radius <= 0) return;
  Mask mask = make_mask(image, c.x - radius, c.y - radius, c.x + radius, c.y + radius);
  if (mask.empty()) return;
  mask.fill(c.x - radius, c.y - radius, c.x + radius, c.y + radius,
            [&](Point p) { return distance(p, c) <= radius; });
  mask.apply(image, color);
}

namespace {

std::vector<Point> offset_path(const std::vector<Point>& path, double d) {
  const std::size_t n = path.size();
  std::vector<Point> normals;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Point u = path[i + 1] - path[i];
    const double len = std::hypot(u.x, u.y);
    normals.push_back(len > 0 ? Point{-u.y / len, u.x / len} : Point{0, 0});
  }
  std::vector<Point> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point na = i > 0 ? normals[i - 1] : normals[0];
    const Point nb = i + 1 < n ? normals[i] : normals[n - 2];
    Point m = na + nb;
    const double len = std::hypot(m.x, m.y);
    if (len < 1e-12) {
      out[i] = path[i] + nb * d;
      continue;
    }
    m = m * (1.0 / len);
    const double cosine = std::max(m.x * nb.x + m.y * nb.y, 0.5);
    out[i] = path[i] + m * (d / cosine);
  }
  return out;
}

std::vector<double> arc_fractions(const std::vector<Point>& path) {
  std::vector<double> t(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) t[i] = t[i - 1] + distance(path[i - 1], path[i]);
  const double total = t.back();
  for (double& x : t) x = total > 0 ? x / total : 0.0;
  return t;
}

}  // namespace

std::vector<PlannedStroke> plan_tapered_segments(const geo::SegmentedNetwork& net,
                                                 const net::DirectedRoadGraph& graph,
                                                 const net::AssignmentTable& assignment,
                                                 const field::Viewport& viewport, const TaperStyle& style,
                                                 const Palette& palette) {
  style.validate();
  if (graph.segments().size() != net.segments.size()) {
    throw std::invalid_argument("graph and network segment counts differ");
  }
  std::vector<PlannedStroke> out;
  for (const geo::Segment& seg : net.segments) {
    const net::SegmentState& state = graph.segments()[seg.id];
    std::vector<Point> path;
    path.reserve(seg.polyline.size());
    for (const Point& p : seg.polyline) path.push_back(viewport.to_pixel(p));
    if (path.size() < 2) continue;

    if (state.blocked) {
      out.push_back({seg.id, kNoVertex, kNoPoi, 0,
                     {path, std::vector<double>(path.size(), 1.0), palette.blocked}});
      continue;
    }
    const net::Assignment& a = assignment.entries.at(seg.from);
    const net::Assignment& b = assignment.entries.at(seg.to);
    if (a.poi == kNoPoi && b.poi == kNoPoi) {
      out.push_back({seg.id, kNoVertex, kNoPoi, 0,
                     {path, std::vector<double>(path.size(), style.w_min), palette.network}});
      continue;
    }

    VertexId wide = kNoVertex;
    PoiId poi = kNoPoi;
    if (a.accessibility > b.accessibility) {
      wide = seg.from;
      poi = a.poi;
    } else if (b.accessibility > a.accessibility) {
      wide = seg.to;
      poi = b.poi;
    } else {
      const net::Assignment& low = seg.from < seg.to ? a : b;
      const net::Assignment& high = seg.from < seg.to ? b : a;
      poi = low.poi != kNoPoi ? low.poi : high.poi;
    }
    const Rgba color = palette.hue(poi);

    auto make = [&](std::vector<Point> p, int side) {
      std::vector<double> widths(p.size(), (style.w_max + style.w_min) / 2);
      if (wide != kNoVertex) {
        if (wide == seg.to) std::reverse(p.begin(), p.end());
        const auto t = arc_fractions(p);
        for (std::size_t i = 0; i < p.size(); ++i) widths[i] = taper_width(style, t[i]);
      }
      out.push_back({seg.id, wide, poi, side, {std::move(p), std::move(widths), color}});
    };
    if (state.oneway) {
      make(path, 0);
    } else {
      make(offset_path(path, style.w_max / 2), +1);
      make(offset_path(path, -style.w_max / 2), -1);
    }
  }
  return out;
}

void draw_tapered_segments(Image& image, const geo::SegmentedNetwork& net, const net::DirectedRoadGraph& graph,
                           const net::AssignmentTable& assignment, const field::Viewport& viewport,
                           const TaperStyle& style, const Palette& palette) {
  for (const PlannedStroke& s : plan_tapered_segments(net, graph, assignment, viewport, style, palette)) {
    draw_stroke(image, s.stroke);
  }
}

double nkde_width(double density, const NkdeStyle& style) {
  const double w = density * style.width_scale;
  if (!std::isfinite(w)) return style.w_max;
  return std::clamp(w, 1.0, style.w_max);
}

namespace {

Point point_at(const std::vector<Point>& poly, const std::vector<double>& cum, double offset) {
  if (offset <= 0) return poly.front();
  if (offset >= cum.back()) return poly.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), offset);
  const std::size_t i = static_cast<std::size_t>(it - cum.begin()) - 1;
  const double span = cum[i + 1] - cum[i];
  const double f = span > 0 ? (offset - cum[i]) / span : 0.0;
  return poly[i] + (poly[i + 1] - poly[i]) * f;
}

}  // namespace

Image render_nkde(std::span<const field::NkdeSample> samples, const geo::SegmentedNetwork& net,
                  const field::Viewport& viewport, const NkdeStyle& style, const Palette& palette) {
  if (samples.empty()) throw std::invalid_argument("render_nkde: no samples");
  viewport.validate();
  std::map<SegmentId, std::vector<const field::NkdeSample*>> by_segment;
  for (const auto& s : samples) {
    if (s.segment >= net.segments.size()) throw std::out_of_range("nkde sample references a missing segment");
    by_segment[s.segment].push_back(&s);
  }
  Image image(viewport.width, viewport.height, palette.background);
  for (auto& [id, list] : by_segment) {
    std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->offset_m < b->offset_m; });
    const auto& poly = net.segments[id].polyline;
    std::vector<double> cum(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) cum[i] = cum[i - 1] + distance(poly[i - 1], poly[i]);

    std::vector<double> offsets(cum.begin(), cum.end());
    for (auto* s : list) offsets.push_back(s->offset_m);
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

    auto width_at = [&](double off) {
      if (off <= list.front()->offset_m) return nkde_width(list.front()->density, style);
      if (off >= list.back()->offset_m) return nkde_width(list.back()->density, style);
      std::size_t j = 0;
      while (list[j + 1]->offset_m < off) ++j;
      const double a = list[j]->offset_m, b = list[j + 1]->offset_m;
      const double f = b > a ? (off - a) / (b - a) : 0.0;
      const double wa = nkde_width(list[j]->density, style), wb = nkde_width(list[j + 1]->density, style);
      return wa + (wb - wa) * f;
    };
    Stroke stroke{{}, {}, style.color};
    for (double off : offsets) {
      stroke.path.push_back(viewport.to_pixel(point_at(poly, cum, off)));
      stroke.widths.push_back(width_at(off));
    }
    draw_stroke(image, stroke);
  }
  return image;
}

std::string sweep_label(const field::FieldParams& params) {
  char buf[64];
  if (params.mode == field::DensityMode::kEq4Literal) {
    std::snprintf(buf, sizeof buf, "%s RA=%g", std::string(field::to_string(params.kernel)).c_str(),
                  params.bandwidth_acc);
  } else {
    std::snprintf(buf, sizeof buf, "%s R=%gM", std::string(field::to_string(params.kernel)).c_str(),
                  params.bandwidth_m);
  }
  std::string s = buf;
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

Image Montage::tile(std::size_t row, std::size_t col) const {
  return image.crop(static_cast<std::uint32_t>(col * tile_width), static_cast<std::uint32_t>(row * tile_height),
                    tile_width, tile_height);
}

Image render_tile(const field::FieldModel& model, const field::Viewport& viewport, const field::FieldParams& params,
                  const Palette& palette, double* mean_density, unsigned workers) {
  const field::DensityRaster raster = field::rasterize(model, viewport, params, workers);
  if (mean_density) {
    double sum = 0.0;
    for (double v : raster.value) sum += v;
    *mean_density = raster.value.empty() ? 0.0 : sum / static_cast<double>(raster.value.size());
  }
  Image image(viewport.width, viewport.height, palette.background);
  image.composite(colorize(raster, palette));
  draw_label(image, sweep_label(params), palette);
  return image;
}

Montage render_sweep(const field::FieldModel& model, const field::Viewport& tile_viewport,
                     const field::FieldParams& base, std::span<const field::Kernel> kernels,
                     std::span<const double> bandwidths, const Palette& palette, unsigned workers) {
  if (kernels.empty() || bandwidths.empty()) throw std::invalid_argument("render_sweep: empty kernel or bandwidth list");
  tile_viewport.validate();
  Montage m;
  m.rows = kernels.size();
  m.cols = bandwidths.size();
  m.tile_width = tile_viewport.width;
  m.tile_height = tile_viewport.height;
  m.image = Image(static_cast<std::uint32_t>(m.cols * m.tile_width), static_cast<std::uint32_t>(m.rows * m.tile_height));
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      field::FieldParams p = base;
      p.kernel = kernels[r];
      if (p.mode == field::DensityMode::kEq4Literal) {
        p.bandwidth_acc = bandwidths[c];
      } else {
        p.bandwidth_m = bandwidths[c];
      }
      p.validate();
      SweepTile t{kernels[r], bandwidths[c], 0.0, sweep_label(p)};
      const Image tile = render_tile(model, tile_viewport, p, palette, &t.mean_density, workers);
      m.image.paste(tile, static_cast<std::uint32_t>(c * m.tile_width), static_cast<std::uint32_t>(r * m.tile_height));
      m.tiles.push_back(std::move(t));
    }
  }
  return m;
}

Image compose_image(const MapLayers& layers, const field::DensityRaster& raster, const TaperStyle& style,
                    const Palette& palette) {
  if (!layers.net || !layers.graph || !layers.assignment) throw std::invalid_argument("compose: missing layer");
  const field::Viewport& vp = raster.viewport;
  Image image(vp.width, vp.height, palette.background);
  image.composite(colorize(raster, palette));
  draw_tapered_segments(image, *layers.net, *layers.graph, *layers.assignment, vp, style, palette);
  for (const MapPoi& poi : layers.pois) {
    const Point c = vp.to_pixel(poi.pos);
    draw_disc(image, c, style.marker_radius + 1.5, palette.marker_outline);
    draw_disc(image, c, style.marker_radius, palette.hue(poi.id));
  }
  return image;
}

std::string compose_map(const MapLayers& layers, const field::DensityRaster& raster, const TaperStyle& style,
                        const Palette& palette) {
  return encode_png(compose_image(layers, raster, style, palette));
}

}  // namespace topomap::render
