#include "mmsense/reconstruction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mmsense {

Segment path_segment(const PathTriple& path) {
  if (path.length <= 0.0) throw ReconstructionError("path_segment: non-positive length");
  Segment seg;
  seg.a = path.length * unit_vector(path.aod);
  seg.b = (-path.length) * unit_vector(path.aoa);
  return seg;
}

namespace {

double sum_segment_distance(const Point2& p, const std::vector<Segment>& segs,
                            const std::vector<int>& used) {
  double acc = 0.0;
  for (int i : used) {
    const Segment& s = segs[static_cast<size_t>(i)];
    acc += point_segment_distance(p, s.a, s.b);
  }
  return acc;
}

// Midpoint of the closest approach between two segments; the classic seed for
// the sum-of-distances objective.
Point2 closest_pair_midpoint(const Segment& s1, const Segment& s2) {
  const SegmentHit h = segment_intersection(s1.a, s1.b, s2.a, s2.b);
  if (h.hit) return h.point;
  double best = std::numeric_limits<double>::infinity();
  Point2 best_mid;
  const auto consider = [&](const Point2& p, const Segment& other) {
    const Point2 q = closest_point_on_segment(p, other.a, other.b);
    const double d = distance(p, q);
    if (d < best) {
      best = d;
      best_mid = (p + q) * 0.5;
    }
  };
  consider(s1.a, s2);
  consider(s1.b, s2);
  consider(s2.a, s1);
  consider(s2.b, s1);
  return best_mid;
}

template <class F>
Point2 nelder_mead_2d(F&& f, Point2 x0, double scale) {
  struct Vertex {
    Point2 p;
    double v;
  };
  std::array<Vertex, 3> s = {Vertex{x0, f(x0)},
                             Vertex{x0 + Point2{scale, 0.0}, 0.0},
                             Vertex{x0 + Point2{0.0, scale}, 0.0}};
  s[1].v = f(s[1].p);
  s[2].v = f(s[2].p);

  for (int it = 0; it < 300; ++it) {
    std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
    if (distance(s[0].p, s[2].p) < 1e-12) break;
    const Point2 centroid = (s[0].p + s[1].p) * 0.5;
    const Point2 refl = centroid * 2.0 - s[2].p;
    const double fr = f(refl);
    if (fr < s[0].v) {
      const Point2 exp_p = centroid + (refl - centroid) * 2.0;
      const double fe = f(exp_p);
      s[2] = fe < fr ? Vertex{exp_p, fe} : Vertex{refl, fr};
    } else if (fr < s[1].v) {
      s[2] = {refl, fr};
    } else {
      const Point2 con = centroid + (s[2].p - centroid) * 0.5;
      const double fc = f(con);
      if (fc < s[2].v) {
        s[2] = {con, fc};
      } else {
        s[1].p = s[0].p + (s[1].p - s[0].p) * 0.5;
        s[2].p = s[0].p + (s[2].p - s[0].p) * 0.5;
        s[1].v = f(s[1].p);
        s[2].v = f(s[2].p);
      }
    }
  }
  std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
  return s[0].p;
}

// Compass polish with shrinking steps; tightens the minimum of the convex
// piecewise-smooth objective well below the Nelder-Mead stopping size.
template <class F>
Point2 compass_polish(F&& f, Point2 x) {
  double fx = f(x);
  for (double step = 1e-4; step > 1e-12; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (const Point2 d : {Point2{step, 0.0}, Point2{-step, 0.0}, Point2{0.0, step},
                             Point2{0.0, -step}}) {
        const Point2 cand = x + d;
        const double fc = f(cand);
        if (fc < fx) {
          x = cand;
          fx = fc;
          improved = true;
        }
      }
    }
  }
  return x;
}

}  // namespace

LocalizedPoint localize_measurement_point(const MeasurementReport& report,
                                          const ReconstructionParams& params) {
  if (report.paths.empty()) {
    throw ReconstructionError("localize_measurement_point: empty report");
  }
  std::vector<Segment> segs;
  segs.reserve(report.paths.size());
  for (const PathTriple& p : report.paths) segs.push_back(path_segment(p));

  if (segs.size() == 1) {
    // A single path pins the position only when it is direct: arrival is the
    // reverse of departure to within estimation error, and the position is
    // the reported length along the reverse arrival ray.
    const PathTriple& p = report.paths[0];
    if (circular_distance(p.aoa, p.aod + kPi) < deg2rad(5.0)) {
      LocalizedPoint lp;
      lp.position = segs[0].b;
      lp.residual = 0.0;
      lp.paths_used = 1;
      lp.low_confidence = true;
      return lp;
    }
    throw ReconstructionError("localize_measurement_point: single non-direct path");
  }

  std::vector<int> all(segs.size());
  std::iota(all.begin(), all.end(), 0);

  std::vector<Point2> seeds;
  for (size_t i = 0; i < segs.size(); ++i) {
    for (size_t j = i + 1; j < segs.size(); ++j) {
      seeds.push_back(closest_pair_midpoint(segs[i], segs[j]));
    }
  }
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
  for (const Segment& s : segs) {
    min_x = std::min({min_x, s.a.x, s.b.x});
    max_x = std::max({max_x, s.a.x, s.b.x});
    min_y = std::min({min_y, s.a.y, s.b.y});
    max_y = std::max({max_y, s.a.y, s.b.y});
  }
  for (double gx = min_x; gx <= max_x + 1e-9; gx += params.coarse_grid) {
    for (double gy = min_y; gy <= max_y + 1e-9; gy += params.coarse_grid) {
      seeds.push_back({gx, gy});
    }
  }

  const auto objective_all = [&](const Point2& p) {
    return sum_segment_distance(p, segs, all);
  };
  Point2 coarse = seeds.front();
  double coarse_v = objective_all(coarse);
  for (const Point2& s : seeds) {
    const double v = objective_all(s);
    if (v < coarse_v) {
      coarse_v = v;
      coarse = s;
    }
  }

  // Drop paths whose segment misses the coarse solution entirely.
  std::vector<int> used;
  for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
    const Segment& s = segs[static_cast<size_t>(i)];
    if (point_segment_distance(coarse, s.a, s.b) <= params.outlier_gate) used.push_back(i);
  }
  if (static_cast<int>(used.size()) < 2) used = all;

  const auto objective = [&](const Point2& p) { return sum_segment_distance(p, segs, used); };
  Point2 best = nelder_mead_2d(objective, coarse, std::max(0.5, params.coarse_grid));
  best = compass_polish(objective, best);

  LocalizedPoint lp;
  lp.position = best;
  lp.residual = objective(best);
  lp.paths_used = static_cast<int>(used.size());

  bool all_parallel = true;
  for (size_t i = 0; i + 1 < used.size() && all_parallel; ++i) {
    const Segment& s1 = segs[static_cast<size_t>(used[i])];
    const Segment& s2 = segs[static_cast<size_t>(used[i + 1])];
    const Point2 d1 = (s1.b - s1.a).normalized();
    const Point2 d2 = (s2.b - s2.a).normalized();
    if (d1.norm() > 0.5 && d2.norm() > 0.5 && std::abs(d1.cross(d2)) > 1e-9) {
      all_parallel = false;
    }
  }
  lp.ambiguous = all_parallel && used.size() >= 2 && lp.residual > 1e-9;
  return lp;
}

ReflectionPointResult reflection_point(const Point2& rx, double aod, double aoa) {
  const Point2 u = unit_vector(aod);
  const Point2 v = unit_vector(aoa);
  const double den = u.cross(v);
  ReflectionPointResult out;
  if (std::abs(den) < 1e-12) {
    out.status = RayIntersectStatus::kParallel;
    return out;
  }
  const double t = rx.cross(v) / den;
  const double s = rx.cross(u) / den;
  if (t <= 0.0 || s <= 0.0) {
    out.status = RayIntersectStatus::kBehindSource;
    return out;
  }
  out.point = u * t;
  return out;
}

VirtualTxObservation virtual_tx_observation(const Point2& rx, double aoa, double length,
                                            int point_id, int path_index) {
  if (length <= 0.0) throw ReconstructionError("virtual_tx_observation: non-positive length");
  VirtualTxObservation obs;
  obs.position = rx + length * unit_vector(aoa);
  obs.point_id = point_id;
  obs.path_index = path_index;
  return obs;
}

ClusterResult cluster_virtual_txs(const std::vector<VirtualTxObservation>& obs, double eps,
                                  int min_pts) {
  if (eps <= 0.0 || min_pts < 1) {
    throw ReconstructionError("cluster_virtual_txs: bad DBSCAN parameters");
  }
  const int n = static_cast<int>(obs.size());
  ClusterResult out;
  if (n == 0) return out;

  // Canonical processing order makes the result independent of input order.
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Point2& pa = obs[static_cast<size_t>(a)].position;
    const Point2& pb = obs[static_cast<size_t>(b)].position;
    if (pa.x != pb.x) return pa.x < pb.x;
    if (pa.y != pb.y) return pa.y < pb.y;
    if (obs[static_cast<size_t>(a)].point_id != obs[static_cast<size_t>(b)].point_id) {
      return obs[static_cast<size_t>(a)].point_id < obs[static_cast<size_t>(b)].point_id;
    }
    return obs[static_cast<size_t>(a)].path_index < obs[static_cast<size_t>(b)].path_index;
  });

  std::vector<std::vector<int>> neigh(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (distance(obs[static_cast<size_t>(a)].position,
                   obs[static_cast<size_t>(b)].position) <= eps) {
        neigh[static_cast<size_t>(a)].push_back(b);  // includes itself
      }
    }
  }
  std::vector<bool> core(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    core[static_cast<size_t>(i)] = static_cast<int>(neigh[static_cast<size_t>(i)].size()) >=
                                   min_pts;
  }

  std::vector<int> label(static_cast<size_t>(n), -1);
  int next = 0;
  for (int oi : order) {
    if (!core[static_cast<size_t>(oi)] || label[static_cast<size_t>(oi)] >= 0) continue;
    // Flood the connected component of core points, in canonical order.
    std::vector<int> stack = {oi};
    label[static_cast<size_t>(oi)] = next;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      for (int nb : neigh[static_cast<size_t>(cur)]) {
        if (core[static_cast<size_t>(nb)] && label[static_cast<size_t>(nb)] < 0) {
          label[static_cast<size_t>(nb)] = next;
          stack.push_back(nb);
        }
      }
    }
    ++next;
  }
  // Border points join the nearest core within eps.
  for (int oi : order) {
    if (core[static_cast<size_t>(oi)] || label[static_cast<size_t>(oi)] >= 0) continue;
    double best = std::numeric_limits<double>::infinity();
    int best_core = -1;
    for (int nb : neigh[static_cast<size_t>(oi)]) {
      if (!core[static_cast<size_t>(nb)]) continue;
      const double d = distance(obs[static_cast<size_t>(oi)].position,
                                obs[static_cast<size_t>(nb)].position);
      if (d < best) {
        best = d;
        best_core = nb;
      }
    }
    if (best_core >= 0) label[static_cast<size_t>(oi)] = label[static_cast<size_t>(best_core)];
  }

  std::vector<Cluster> clusters(static_cast<size_t>(next));
  for (int oi : order) {
    const int l = label[static_cast<size_t>(oi)];
    if (l < 0) {
      out.noise.push_back(oi);
    } else {
      clusters[static_cast<size_t>(l)].members.push_back(oi);
    }
  }
  for (Cluster& c : clusters) {
    Point2 acc;
    for (int m : c.members) acc = acc + obs[static_cast<size_t>(m)].position;  // canonical order
    c.centroid = acc * (1.0 / static_cast<double>(c.members.size()));
    std::sort(c.members.begin(), c.members.end());
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.centroid.x != b.centroid.x) return a.centroid.x < b.centroid.x;
    return a.centroid.y < b.centroid.y;
  });
  std::sort(out.noise.begin(), out.noise.end());
  out.clusters = std::move(clusters);
  return out;
}

std::vector<WallEstimate> walls_from_clusters(const std::vector<Point2>& centroids,
                                              const std::vector<std::vector<Point2>>& refl_points,
                                              const std::vector<int>& cluster_sizes,
                                              const ReconstructionParams& params) {
  std::vector<WallEstimate> walls;
  for (size_t ci = 0; ci < centroids.size(); ++ci) {
    const Point2& v = centroids[ci];
    const double dist_tx = v.norm();
    if (dist_tx <= params.los_eps) {
      throw ReconstructionError("walls_from_clusters: direct-path cluster not filtered out");
    }
    WallEstimate w;
    w.line_normal = v.normalized();
    w.line_point = v * 0.5;
    w.supporting_cluster_size = cluster_sizes[ci];
    const Point2 tangent{-w.line_normal.y, w.line_normal.x};

    double smin = std::numeric_limits<double>::infinity();
    double smax = -std::numeric_limits<double>::infinity();
    for (const Point2& r : refl_points[ci]) {
      const double off = (r - w.line_point).dot(w.line_normal);
      if (std::abs(off) > params.wall_tol) {
        ++w.rejected_reflection_points;
        continue;
      }
      w.reflection_points.push_back(r);
      const double s = (r - w.line_point).dot(tangent);
      smin = std::min(smin, s);
      smax = std::max(smax, s);
    }
    const int total = static_cast<int>(refl_points[ci].size());
    if (total > 0 && static_cast<int>(w.reflection_points.size()) * 2 < total) {
      continue;  // reflection points contradict this bisector: drop the hypothesis
    }
    if (w.reflection_points.empty()) {
      w.extent_from_reflections = false;
      smin = -params.extent_margin;
      smax = params.extent_margin;
      w.extent_a = w.line_point + tangent * smin;
      w.extent_b = w.line_point + tangent * smax;
    } else {
      w.extent_a = w.line_point + tangent * (smin - params.extent_margin);
      w.extent_b = w.line_point + tangent * (smax + params.extent_margin);
    }
    walls.push_back(std::move(w));
  }
  return walls;
}

ReconstructionResult reconstruct(const std::vector<MeasurementReport>& reports,
                                 const ReconstructionParams& params) {
  ReconstructionResult res;
  res.points.resize(reports.size());

  for (size_t ri = 0; ri < reports.size(); ++ri) {
    const MeasurementReport& rep = reports[ri];
    try {
      res.points[ri] = localize_measurement_point(rep, params);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "point " << rep.point_id << ": " << e.what();
      res.warnings.push_back(os.str());
      continue;
    }
    const Point2 rx = res.points[ri]->position;
    for (size_t pi = 0; pi < rep.paths.size(); ++pi) {
      const PathTriple& p = rep.paths[pi];
      res.observations.push_back(virtual_tx_observation(rx, p.aoa, p.length, rep.point_id,
                                                        static_cast<int>(pi)));
      const ReflectionPointResult rp = reflection_point(rx, p.aod, p.aoa);
      res.reflection_points_flat.push_back(
          rp.status == RayIntersectStatus::kOk ? std::optional<Point2>(rp.point) : std::nullopt);
      res.reflection_owner_report.push_back(static_cast<int>(ri));
      res.reflection_owner_path.push_back(static_cast<int>(pi));
    }
  }

  res.clusters = cluster_virtual_txs(res.observations, params.dbscan_eps, params.dbscan_min_pts);

  std::vector<Point2> centroids;
  std::vector<std::vector<Point2>> refl;
  std::vector<int> sizes;
  for (const Cluster& c : res.clusters.clusters) {
    if (c.centroid.norm() <= params.los_eps) continue;  // direct-path cluster
    centroids.push_back(c.centroid);
    sizes.push_back(static_cast<int>(c.members.size()));
    std::vector<Point2> pts;
    for (int m : c.members) {
      if (res.reflection_points_flat[static_cast<size_t>(m)].has_value()) {
        pts.push_back(*res.reflection_points_flat[static_cast<size_t>(m)]);
      }
    }
    refl.push_back(std::move(pts));
  }
  res.walls = walls_from_clusters(centroids, refl, sizes, params);
  return res;
}

}  // namespace mmsense
