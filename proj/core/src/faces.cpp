#include "topomap/faces.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace topomap::field {

NonPlanarError::NonPlanarError(SegmentId a, SegmentId b)
    : Error("non_planar", "segments " + std::to_string(a) + " and " + std::to_string(b) +
                              " cross away from a shared intersection"),
      a_(a),
      b_(b) {}

double signed_area(std::span<const Point> polygon) {
  double twice = 0.0;
  for (std::size_t i = 0, n = polygon.size(); i < n; ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % n]);
  }
  return 0.5 * twice;
}

bool point_in_polygon(Point p, std::span<const Point> polygon) {
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Point a = polygon[i];
    const Point b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

// --- planarity -----------------------------------------------------------------

namespace {

struct Piece {
  SegmentId segment;
  std::size_t index;  // piece ordinal along the segment polyline
  bool last;
  Point a;
  Point b;
  double min_x, max_x, min_y, max_y;
};

double orient(Point a, Point b, Point c) { return cross(b - a, c - a); }

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// True when the two pieces intersect anywhere other than a legitimately shared endpoint.
bool conflicts(const Piece& p, const Piece& q, const geo::SegmentedNetwork& net) {
  const double d1 = orient(q.a, q.b, p.a);
  const double d2 = orient(q.a, q.b, p.b);
  const double d3 = orient(p.a, p.b, q.a);
  const double d4 = orient(p.a, p.b, q.b);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;  // proper crossing
  }
  if (d1 == 0 && d2 == 0 && d3 == 0 && d4 == 0) {
    // Collinear: conflict unless they only share an endpoint.
    const bool horizontalish = std::abs(p.b.x - p.a.x) >= std::abs(p.b.y - p.a.y);
    auto key = [&](Point x) { return horizontalish ? x.x : x.y; };
    const double lo = std::max(std::min(key(p.a), key(p.b)), std::min(key(q.a), key(q.b)));
    const double hi = std::min(std::max(key(p.a), key(p.b)), std::max(key(q.a), key(q.b)));
    if (hi > lo) return true;
    if (hi < lo) return false;
  }
  // Collect touching points.
  std::vector<Point> touches;
  if (d1 == 0 && on_segment(q.a, q.b, p.a)) touches.push_back(p.a);
  if (d2 == 0 && on_segment(q.a, q.b, p.b)) touches.push_back(p.b);
  if (d3 == 0 && on_segment(p.a, p.b, q.a)) touches.push_back(q.a);
  if (d4 == 0 && on_segment(p.a, p.b, q.b)) touches.push_back(q.b);
  if (touches.empty()) return false;

  const geo::Segment& sp = net.segments[p.segment];
  const geo::Segment& sq = net.segments[q.segment];
  for (Point t : touches) {
    const bool p_end = t == p.a || t == p.b;
    const bool q_end = t == q.a || t == q.b;
    if (!p_end || !q_end) return true;  // T-junction onto a piece interior
    if (p.segment == q.segment) {
      // adjacent pieces of one polyline share their joint; loops share the endpoint vertex
      if (q.index == p.index + 1 && t == p.b) continue;
      if (p.index == q.index + 1 && t == q.b) continue;
    }
    auto vertex_at = [&](const geo::Segment& s, const Piece& piece, Point x) -> VertexId {
      if (piece.index == 0 && x == piece.a) return s.from;
      if (piece.last && x == piece.b) return s.to;
      return kNoVertex;
    };
    const VertexId vp = vertex_at(sp, p, t);
    const VertexId vq = vertex_at(sq, q, t);
    if (vp == kNoVertex || vq == kNoVertex || vp != vq) return true;
  }
  return false;
}

}  // namespace

void check_planar(const geo::SegmentedNetwork& net) {
  std::vector<Piece> pieces;
  for (const geo::Segment& s : net.segments) {
    for (std::size_t i = 0; i + 1 < s.polyline.size(); ++i) {
      const Point a = s.polyline[i];
      const Point b = s.polyline[i + 1];
      pieces.push_back({s.id, i, i + 2 == s.polyline.size(), a, b, std::min(a.x, b.x), std::max(a.x, b.x),
                        std::min(a.y, b.y), std::max(a.y, b.y)});
    }
  }
  std::vector<std::size_t> order(pieces.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return pieces[l].min_x < pieces[r].min_x || (pieces[l].min_x == pieces[r].min_x && l < r);
  });
  std::vector<std::size_t> active;
  for (std::size_t idx : order) {
    const Piece& p = pieces[idx];
    std::erase_if(active, [&](std::size_t a) { return pieces[a].max_x < p.min_x; });
    for (std::size_t a : active) {
      const Piece& q = pieces[a];
      if (q.max_y < p.min_y || p.max_y < q.min_y) continue;
      if (conflicts(p, q, net)) {
        throw NonPlanarError(std::min(p.segment, q.segment), std::max(p.segment, q.segment));
      }
    }
    active.push_back(idx);
  }
}

// --- faces -----------------------------------------------------------------------

FaceSet::FaceSet(std::vector<Face> faces) : faces_(std::move(faces)) {
  double most_negative = 0.0;
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    if (!faces_[i].bounded && (!outer_ || faces_[i].signed_area < most_negative)) {
      outer_ = i;
      most_negative = faces_[i].signed_area;
    }
  }
  for (const Face& f : faces_) {
    if (!f.bounded) continue;
    grid_box_.extend({f.box.min_x, f.box.min_y});
    grid_box_.extend({f.box.max_x, f.box.max_y});
  }
  const std::size_t n = bounded_count();
  if (n == 0) return;
  const double w = std::max(grid_box_.max_x - grid_box_.min_x, 1e-9);
  const double h = std::max(grid_box_.max_y - grid_box_.min_y, 1e-9);
  cell_ = std::max(std::sqrt(w * h / static_cast<double>(n)), 1e-6);
  cols_ = std::min<std::size_t>(static_cast<std::size_t>(w / cell_) + 1, 4096);
  rows_ = std::min<std::size_t>(static_cast<std::size_t>(h / cell_) + 1, 4096);
  cell_ = std::max(w / static_cast<double>(cols_), h / static_cast<double>(rows_)) * (1.0 + 1e-12);
  cells_.assign(cols_ * rows_, {});
  for (std::uint32_t i = 0; i < faces_.size(); ++i) {
    const Face& f = faces_[i];
    if (!f.bounded) continue;
    auto clampc = [&](double v, std::size_t limit) {
      return std::min<std::size_t>(static_cast<std::size_t>(std::max(v, 0.0)), limit - 1);
    };
    const std::size_t c0 = clampc((f.box.min_x - grid_box_.min_x) / cell_, cols_);
    const std::size_t c1 = clampc((f.box.max_x - grid_box_.min_x) / cell_, cols_);
    const std::size_t r0 = clampc((f.box.min_y - grid_box_.min_y) / cell_, rows_);
    const std::size_t r1 = clampc((f.box.max_y - grid_box_.min_y) / cell_, rows_);
    for (std::size_t r = r0; r <= r1; ++r) {
      for (std::size_t c = c0; c <= c1; ++c) cells_[r * cols_ + c].push_back(i);
    }
  }
}

std::size_t FaceSet::bounded_count() const {
  return static_cast<std::size_t>(std::count_if(faces_.begin(), faces_.end(), [](const Face& f) { return f.bounded; }));
}

std::optional<std::size_t> FaceSet::locate(Point p) const {
  if (cells_.empty() || !grid_box_.contains(p)) return std::nullopt;
  const auto c = std::min<std::size_t>(static_cast<std::size_t>((p.x - grid_box_.min_x) / cell_), cols_ - 1);
  const auto r = std::min<std::size_t>(static_cast<std::size_t>((p.y - grid_box_.min_y) / cell_), rows_ - 1);
  std::optional<std::size_t> best;
  for (std::uint32_t id : cells_[r * cols_ + c]) {
    const Face& f = faces_[id];
    if (!f.box.contains(p)) continue;
    if (best && faces_[*best].signed_area <= f.signed_area) continue;
    if (point_in_polygon(p, f.polygon)) best = id;
  }
  return best;
}

std::vector<std::size_t> FaceSet::faces_incident(VertexId v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    if (faces_[i].bounded && std::binary_search(faces_[i].candidates.begin(), faces_[i].candidates.end(), v)) {
      out.push_back(i);
    }
  }
  return out;
}

FaceSet extract_faces(const geo::SegmentedNetwork& net) {
  check_planar(net);

  // Half-edge 2s runs along segment s's polyline, 2s+1 against it.
  const std::size_t half_count = net.segments.size() * 2;
  auto origin = [&](std::size_t h) {
    const geo::Segment& s = net.segments[h / 2];
    return h % 2 == 0 ? s.from : s.to;
  };
  auto dest = [&](std::size_t h) {
    const geo::Segment& s = net.segments[h / 2];
    return h % 2 == 0 ? s.to : s.from;
  };
  auto angle = [&](std::size_t h) {
    const auto& pl = net.segments[h / 2].polyline;
    const Point a = h % 2 == 0 ? pl[0] : pl[pl.size() - 1];
    const Point b = h % 2 == 0 ? pl[1] : pl[pl.size() - 2];
    return std::atan2(b.y - a.y, b.x - a.x);
  };

  std::vector<std::vector<std::size_t>> outgoing(net.vertex_count());
  std::vector<double> angles(half_count);
  for (std::size_t h = 0; h < half_count; ++h) {
    angles[h] = angle(h);
    outgoing[origin(h)].push_back(h);
  }
  std::vector<std::size_t> rank(half_count);
  for (auto& out : outgoing) {
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      return angles[a] < angles[b] || (angles[a] == angles[b] && a < b);
    });
    for (std::size_t i = 0; i < out.size(); ++i) rank[out[i]] = i;
  }
  auto next = [&](std::size_t h) {
    const auto& out = outgoing[dest(h)];
    const std::size_t twin = h ^ 1u;
    return out[(rank[twin] + out.size() - 1) % out.size()];
  };

  std::vector<Face> faces;
  std::vector<bool> visited(half_count, false);
  for (std::size_t start = 0; start < half_count; ++start) {
    if (visited[start]) continue;
    Face face;
    std::size_t h = start;
    do {
      visited[h] = true;
      face.boundary.push_back(origin(h));
      const auto& pl = net.segments[h / 2].polyline;
      if (h % 2 == 0) {
        face.polygon.insert(face.polygon.end(), pl.begin(), pl.end() - 1);
      } else {
        face.polygon.insert(face.polygon.end(), pl.rbegin(), pl.rend() - 1);
      }
      h = next(h);
    } while (h != start);
    face.signed_area = signed_area(face.polygon);
    face.bounded = face.signed_area > 0.0;
    for (Point p : face.polygon) face.box.extend(p);
    face.candidates = face.boundary;
    std::sort(face.candidates.begin(), face.candidates.end());
    face.candidates.erase(std::unique(face.candidates.begin(), face.candidates.end()), face.candidates.end());
    faces.push_back(std::move(face));
  }
  return FaceSet(std::move(faces));
}

// --- nearest-point index -----------------------------------------------------------

PointIndex::PointIndex(std::span<const Point> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  for (Point p : points_) box_.extend(p);
  const double w = std::max(box_.max_x - box_.min_x, 1e-9);
  const double h = std::max(box_.max_y - box_.min_y, 1e-9);
  cell_ = std::max(std::sqrt(w * h / static_cast<double>(points_.size())), std::max(w, h) / 2048.0);
  cell_ = std::max(cell_, 1e-6);
  cols_ = static_cast<long>(w / cell_) + 1;
  rows_ = static_cast<long>(h / cell_) + 1;
  cells_.assign(static_cast<std::size_t>(cols_ * rows_), {});
  for (VertexId v = 0; v < points_.size(); ++v) {
    const long c = std::min(static_cast<long>((points_[v].x - box_.min_x) / cell_), cols_ - 1);
    const long r = std::min(static_cast<long>((points_[v].y - box_.min_y) / cell_), rows_ - 1);
    cells_[static_cast<std::size_t>(r * cols_ + c)].push_back(v);
  }
}

std::vector<VertexId> PointIndex::nearest(Point p, std::size_t k, double max_radius) const {
  std::vector<VertexId> out;
  std::vector<std::pair<double, VertexId>> scratch;
  nearest(p, k, max_radius, out, scratch);
  return out;
}

void PointIndex::nearest(Point p, std::size_t k, double max_radius, std::vector<VertexId>& out,
                         std::vector<std::pair<double, VertexId>>& found) const {
  out.clear();
  found.clear();
  if (points_.empty() || k == 0) return;
  const double dx = std::max({box_.min_x - p.x, 0.0, p.x - box_.max_x});
  const double dy = std::max({box_.min_y - p.y, 0.0, p.y - box_.max_y});
  if (std::hypot(dx, dy) > max_radius) return;

  const long pc = static_cast<long>(std::floor((p.x - box_.min_x) / cell_));
  const long pr = static_cast<long>(std::floor((p.y - box_.min_y) / cell_));
  // First ring that touches the grid.
  long ring = std::max({0L, -pc, pc - (cols_ - 1), -pr, pr - (rows_ - 1)});
  const long max_ring = std::max({std::labs(pc), std::labs(pc - (cols_ - 1)), std::labs(pr), std::labs(pr - (rows_ - 1))});
  for (; ring <= max_ring; ++ring) {
    const double ring_min_dist = (static_cast<double>(ring) - 1.0) * cell_;
    if (ring_min_dist > max_radius) break;
    if (found.size() >= k) {
      std::nth_element(found.begin(), found.begin() + static_cast<long>(k - 1), found.end());
      if (ring_min_dist > found[k - 1].first) break;
    }
    for (long r = pr - ring; r <= pr + ring; ++r) {
      if (r < 0 || r >= rows_) continue;
      const bool edge_row = r == pr - ring || r == pr + ring;
      for (long c = pc - ring; c <= pc + ring; c += (edge_row ? 1 : 2 * ring)) {
        if (c >= 0 && c < cols_) {
          for (VertexId v : cells_[static_cast<std::size_t>(r * cols_ + c)]) {
            const double d = distance(p, points_[v]);
            if (d <= max_radius) found.emplace_back(d, v);
          }
        }
        if (ring == 0) break;
      }
    }
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < found.size() && i < k; ++i) out.push_back(found[i].second);
}

}  // namespace topomap::field
