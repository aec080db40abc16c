#include "mmsense/aoa_localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace mmsense {

AoAProfile predict_aoas(const std::vector<Wall>& walls, const Point2& pos,
                        double extent_slack) {
  const Point2 tx{0.0, 0.0};
  AoAProfile out;
  if (pos.norm() < 1e-12) {
    throw LocalizationError("predict_aoas: position coincides with the transmitter");
  }

  if (!segment_occluded(pos, tx, walls)) {
    out.angles.push_back(wrap_angle((tx - pos).angle()));
  }
  for (size_t wi = 0; wi < walls.size(); ++wi) {
    const Wall& w = walls[wi];
    if (w.length() <= 1e-12) continue;
    const Point2 image = mirror_point(tx, w);
    if (distance(image, tx) < 1e-12) continue;  // tx on the wall line
    const Point2 dir = (w.b - w.a).normalized();
    const Point2 ext_a = w.a - dir * extent_slack;
    const Point2 ext_b = w.b + dir * extent_slack;
    const SegmentHit h = segment_intersection(image, pos, ext_a, ext_b);
    if (!h.hit || h.t <= 1e-12 || h.t >= 1.0 - 1e-12) continue;
    const Point2 refl = h.point;
    if (segment_occluded(pos, refl, walls) || segment_occluded(refl, tx, walls)) continue;
    out.angles.push_back(wrap_angle((image - pos).angle()));
  }
  return out;
}

double profile_error(const AoAProfile& expected, const AoAProfile& measured, double a_th) {
  if (a_th <= 0.0) throw LocalizationError("profile_error: threshold must be positive");
  const double clip = a_th * a_th;
  double acc = 0.0;
  for (double e : expected.angles) {
    double best = clip;
    for (double m : measured.angles) {
      const double d = circular_distance(e, m);
      best = std::min(best, d * d);
    }
    acc += best;
  }
  return acc;
}

LocalizationResult localize_on_grid(const AoAProfile& measured, const CandidateGrid& grid,
                                    const std::vector<Wall>& walls, double a_th,
                                    double extent_slack) {
  if (grid.positions.empty()) throw LocalizationError("localize_on_grid: empty grid");
  if (measured.angles.empty()) throw LocalizationError("localize_on_grid: empty measurement");

  LocalizationResult res;
  res.error_surface.assign(grid.positions.size(), 0.0);

  const int n = static_cast<int>(grid.positions.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const AoAProfile expected =
        predict_aoas(walls, grid.positions[static_cast<size_t>(i)], extent_slack);
    res.error_surface[static_cast<size_t>(i)] = profile_error(expected, measured, a_th);
  }

  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (res.error_surface[static_cast<size_t>(i)] < res.error_surface[static_cast<size_t>(best)]) {
      best = i;  // strict comparison keeps the smallest index on ties
    }
  }
  res.index = best;
  res.position = grid.positions[static_cast<size_t>(best)];
  return res;
}

CandidateGrid make_candidate_grid(const std::vector<Wall>& walls, double spacing,
                                  double clearance, const std::vector<Point2>& anchors,
                                  double anchor_radius, double extent_slack) {
  if (walls.empty()) throw LocalizationError("make_candidate_grid: no walls");
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const Wall& w : walls) {
    min_x = std::min({min_x, w.a.x, w.b.x});
    max_x = std::max({max_x, w.a.x, w.b.x});
    min_y = std::min({min_y, w.a.y, w.b.y});
    max_y = std::max({max_y, w.a.y, w.b.y});
  }
  for (const Point2& p : anchors) {
    min_x = std::min(min_x, p.x - spacing);
    max_x = std::max(max_x, p.x + spacing);
    min_y = std::min(min_y, p.y - spacing);
    max_y = std::max(max_y, p.y + spacing);
  }
  CandidateGrid grid;
  grid.spacing = spacing;
  for (double x = min_x + clearance; x <= max_x - clearance + 1e-9; x += spacing) {
    for (double y = min_y + clearance; y <= max_y - clearance + 1e-9; y += spacing) {
      const Point2 p{x, y};
      bool ok = p.norm() > clearance;  // keep away from the transmitter itself
      for (const Wall& w : walls) {
        if (!ok) break;
        if (point_segment_distance(p, w.a, w.b) < clearance) ok = false;
      }
      if (ok && !anchors.empty()) {
        bool surveyed = false;
        for (const Point2& a : anchors) {
          if (distance(p, a) <= anchor_radius) {
            surveyed = true;
            break;
          }
        }
        ok = surveyed;
      }
      // Free-space requirement: the transmitter itself must be visible and
      // the fingerprint non-degenerate. Nodes behind walls, or ones that see
      // almost nothing, would otherwise win on a near-empty expected set
      // under the clipped error.
      if (ok && segment_occluded(p, {0.0, 0.0}, walls)) ok = false;
      if (ok && predict_aoas(walls, p, extent_slack).angles.size() < 3) ok = false;
      if (ok) grid.positions.push_back(p);
    }
  }
  return grid;
}

void write_error_surface_csv(const CandidateGrid& grid, const std::vector<double>& errors,
                             const std::string& path) {
  std::ofstream os(path);
  os << "x,y,error\n";
  os.precision(17);
  for (size_t i = 0; i < grid.positions.size(); ++i) {
    os << grid.positions[i].x << ',' << grid.positions[i].y << ',' << errors[i] << '\n';
  }
}

}  // namespace mmsense
