#pragma once

// Geometry back-end: localize each measurement point from its (aod, aoa,
// length) triples, derive reflection points and virtual-transmitter
// observations, cluster the observations with DBSCAN, and turn cluster
// centroids into wall estimates via the perpendicular-bisector rule. All
// angles here are world-frame (see geometry.hpp).

#include <optional>
#include <string>
#include <vector>

#include "mmsense/geometry.hpp"

namespace mmsense {

struct PathTriple {
  double aod = 0.0;    // rad
  double aoa = 0.0;    // rad
  double length = 0.0; // m
};

struct MeasurementReport {
  int point_id = 0;
  std::vector<PathTriple> paths;
};

struct LocalizedPoint {
  Point2 position;
  double residual = 0.0;  // sum of distances to the used segments
  int paths_used = 0;
  bool low_confidence = false;  // single direct path
  bool ambiguous = false;       // parallel disjoint segments
};

struct VirtualTxObservation {
  Point2 position;
  int point_id = 0;
  int path_index = 0;
};

struct Segment {
  Point2 a;
  Point2 b;
};

struct WallEstimate {
  Point2 line_point;   // foot of the bisector, halfway between tx and centroid
  Point2 line_normal;  // unit, from origin toward the centroid
  Point2 extent_a;
  Point2 extent_b;
  int supporting_cluster_size = 0;
  std::vector<Point2> reflection_points;  // inliers used for the extent
  int rejected_reflection_points = 0;     // farther than wall_tol from the line
  bool extent_from_reflections = true;
};

struct Cluster {
  std::vector<int> members;  // indices into the observation list
  Point2 centroid;
};

struct ClusterResult {
  std::vector<Cluster> clusters;
  std::vector<int> noise;  // observation indices
};

struct ReconstructionParams {
  double dbscan_eps = 0.5;        // m
  int dbscan_min_pts = 3;
  double los_eps = 0.3;           // clusters this close to tx are the direct path
  double wall_tol = 0.3;          // reflection point to bisector acceptance
  double extent_margin = 0.25;    // m beyond the extreme reflection projections
  double outlier_gate = 2.0;      // segment-to-coarse-estimate gate for localization
  double coarse_grid = 0.25;      // m, seed grid for the localizer
};

struct ReconstructionResult {
  std::vector<std::optional<LocalizedPoint>> points;  // aligned with the reports
  std::vector<std::optional<Point2>> reflection_points_flat;  // per (report, path), row-major
  std::vector<int> reflection_owner_report;                   // parallel arrays
  std::vector<int> reflection_owner_path;
  std::vector<VirtualTxObservation> observations;
  ClusterResult clusters;
  std::vector<WallEstimate> walls;
  std::vector<std::string> warnings;
};

class ReconstructionError : public std::runtime_error {
 public:
  explicit ReconstructionError(const std::string& what) : std::runtime_error(what) {}
};

/// The segment that must contain the measurement point for an error-free
/// triple: from length*(cos aod, sin aod) to -length*(cos aoa, sin aoa).
Segment path_segment(const PathTriple& path);

/// Argmin over p of the summed distance to the path segments, multi-start
/// Nelder-Mead seeded from pairwise closest-point midpoints and a coarse
/// grid. Paths whose segment misses the coarse solution by more than
/// params.outlier_gate are dropped before the final fit. A single direct
/// path localizes to the degenerate segment point and is flagged.
LocalizedPoint localize_measurement_point(const MeasurementReport& report,
                                          const ReconstructionParams& params = {});

enum class RayIntersectStatus { kOk, kParallel, kBehindSource };

struct ReflectionPointResult {
  RayIntersectStatus status = RayIntersectStatus::kOk;
  Point2 point;
};

/// Intersection of the departure ray from the origin along aod with the
/// arrival ray from rx along aoa; both ray parameters must be positive.
ReflectionPointResult reflection_point(const Point2& rx, double aod, double aoa);

/// The mirror-source position implied by one path: rx + length*(cos aoa, sin aoa).
VirtualTxObservation virtual_tx_observation(const Point2& rx, double aoa, double length,
                                            int point_id = 0, int path_index = 0);

/// Plain DBSCAN on the observation positions. Clusters are connected
/// components of core points; border points join their nearest core. The
/// result is invariant to the input ordering.
ClusterResult cluster_virtual_txs(const std::vector<VirtualTxObservation>& obs, double eps,
                                  int min_pts);

/// Perpendicular-bisector walls from cluster centroids. A hypothesis whose
/// reflection points mostly contradict the bisector line (farther than
/// wall_tol) is rejected; this is what disambiguates layouts that share the
/// same mirror-source set. Clusters within los_eps of the origin must be
/// filtered out by the caller.
std::vector<WallEstimate> walls_from_clusters(
    const std::vector<Point2>& centroids, const std::vector<std::vector<Point2>>& refl_points,
    const std::vector<int>& cluster_sizes, const ReconstructionParams& params = {});

/// Full back-end pass over a batch of reports. Per-point failures become
/// warnings instead of aborting the batch.
ReconstructionResult reconstruct(const std::vector<MeasurementReport>& reports,
                                 const ReconstructionParams& params = {});

}  // namespace mmsense
