#include "mmsense/geometry.hpp"

#include <algorithm>

namespace mmsense {

namespace {
constexpr double kOcclusionEps = 1e-9;
constexpr double kDegenerateEps = 1e-12;
}  // namespace

Point2 mirror_point(const Point2& p, const Wall& wall) {
  const Point2 d = wall.b - wall.a;
  const double len2 = d.dot(d);
  if (len2 <= kDegenerateEps * kDegenerateEps) {
    throw GeometryError("mirror_point: degenerate wall segment");
  }
  const double t = (p - wall.a).dot(d) / len2;
  const Point2 foot = wall.a + d * t;
  return foot * 2.0 - p;
}

SegmentHit segment_intersection(const Point2& p, const Point2& q, const Point2& a,
                                const Point2& b) {
  SegmentHit out;
  const Point2 r = q - p;
  const Point2 s = b - a;
  const double den = r.cross(s);
  if (std::abs(den) <= kDegenerateEps * std::max(1.0, r.norm() * s.norm())) {
    return out;  // parallel or degenerate
  }
  const Point2 pa = a - p;
  const double t = pa.cross(s) / den;
  const double u = pa.cross(r) / den;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return out;
  out.hit = true;
  out.t = t;
  out.s = u;
  out.point = p + r * t;
  return out;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  return distance(p, closest_point_on_segment(p, a, b));
}

Point2 closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 d = b - a;
  const double len2 = d.dot(d);
  if (len2 <= 0.0) return a;
  double t = (p - a).dot(d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return a + d * t;
}

bool segment_occluded(const Point2& p, const Point2& q, const std::vector<Wall>& walls) {
  for (const Wall& w : walls) {
    const SegmentHit h = segment_intersection(p, q, w.a, w.b);
    if (!h.hit) continue;
    if (h.t > kOcclusionEps && h.t < 1.0 - kOcclusionEps && h.s > kOcclusionEps &&
        h.s < 1.0 - kOcclusionEps) {
      return true;
    }
  }
  return false;
}

namespace {

cd path_gain(double length, const std::vector<int>& walls_hit, const RoomLayout& layout,
             double wavelength) {
  double mag = 1.0 / std::max(length, 1e-9);
  for (int wi : walls_hit) {
    mag *= std::pow(10.0, -layout.walls[static_cast<size_t>(wi)].reflection_loss_db / 20.0);
  }
  const double phase = -2.0 * kPi * length / wavelength;
  return std::polar(mag, phase);
}

// Validates the image-chain for the given ordered wall sequence and fills in
// the reflection points by unfolding from the last image back to the rx.
std::optional<PropagationPath> build_reflected_path(const RoomLayout& layout,
                                                    const Point2& rx,
                                                    const std::vector<int>& seq,
                                                    double wavelength) {
  const Point2 tx = layout.tx_position;

  // Forward image chain tx -> I1 -> I2 ...
  std::vector<Point2> images;
  Point2 cur = tx;
  for (int wi : seq) {
    cur = mirror_point(cur, layout.walls[static_cast<size_t>(wi)]);
    images.push_back(cur);
  }
  if (distance(images.back(), rx) <= kDegenerateEps) return std::nullopt;

  // Unfold back to front: intersect with each generating wall in reverse.
  std::vector<Point2> points(seq.size() + 2);
  points.back() = rx;
  points.front() = tx;
  Point2 target = rx;
  for (int k = static_cast<int>(seq.size()) - 1; k >= 0; --k) {
    const Wall& w = layout.walls[static_cast<size_t>(seq[static_cast<size_t>(k)])];
    const Point2 src = images[static_cast<size_t>(k)];
    const SegmentHit h = segment_intersection(src, target, w.a, w.b);
    if (!h.hit) return std::nullopt;
    if (h.t <= kDegenerateEps || h.t >= 1.0 - kDegenerateEps) return std::nullopt;
    points[static_cast<size_t>(k) + 1] = h.point;
    target = h.point;
  }

  // Every leg must be free of other walls.
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    if (segment_occluded(points[i], points[i + 1], layout.walls)) return std::nullopt;
  }

  PropagationPath path;
  path.order = static_cast<int>(seq.size());
  path.wall_sequence = seq;
  path.reflection_points.assign(points.begin() + 1, points.end() - 1);
  path.length = distance(images.back(), rx);
  path.aod = (points[1] - tx).angle();
  path.aoa = (points[points.size() - 2] - rx).angle();
  path.gain = path_gain(path.length, seq, layout, wavelength);
  return path;
}

}  // namespace

std::vector<PropagationPath> trace_paths(const RoomLayout& layout, const Point2& rx,
                                         int max_order, double wavelength) {
  if (max_order < 0 || max_order > 2) {
    throw GeometryError("trace_paths: unsupported reflection order");
  }
  const Point2 tx = layout.tx_position;
  if (distance(rx, tx) <= kDegenerateEps) {
    throw GeometryError("trace_paths: rx coincides with tx");
  }

  std::vector<PropagationPath> paths;

  if (!segment_occluded(tx, rx, layout.walls)) {
    PropagationPath los;
    los.order = 0;
    los.length = distance(rx, tx);
    los.aod = (rx - tx).angle();
    los.aoa = (tx - rx).angle();
    los.gain = path_gain(los.length, {}, layout, wavelength);
    paths.push_back(std::move(los));
  }

  const int n = static_cast<int>(layout.walls.size());
  if (max_order >= 1) {
    for (int i = 0; i < n; ++i) {
      if (auto p = build_reflected_path(layout, rx, {i}, wavelength)) {
        paths.push_back(std::move(*p));
      }
    }
  }
  if (max_order >= 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if (auto p = build_reflected_path(layout, rx, {i, j}, wavelength)) {
          paths.push_back(std::move(*p));
        }
      }
    }
  }
  return paths;
}

std::vector<VirtualTransmitter> virtual_transmitters(const RoomLayout& layout,
                                                     int max_order) {
  if (max_order < 1 || max_order > 2) {
    throw GeometryError("virtual_transmitters: order must be 1 or 2");
  }
  std::vector<VirtualTransmitter> out;
  const int n = static_cast<int>(layout.walls.size());
  for (int i = 0; i < n; ++i) {
    VirtualTransmitter vt;
    vt.position = mirror_point(layout.tx_position, layout.walls[static_cast<size_t>(i)]);
    vt.source_wall = i;
    vt.order = 1;
    vt.wall_sequence = {i};
    out.push_back(std::move(vt));
  }
  if (max_order == 2) {
    for (int i = 0; i < n; ++i) {
      const Point2 first =
          mirror_point(layout.tx_position, layout.walls[static_cast<size_t>(i)]);
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        VirtualTransmitter vt;
        vt.position = mirror_point(first, layout.walls[static_cast<size_t>(j)]);
        vt.source_wall = j;
        vt.order = 2;
        vt.wall_sequence = {i, j};
        out.push_back(std::move(vt));
      }
    }
  }
  return out;
}

}  // namespace mmsense
