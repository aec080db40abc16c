#pragma once

// Fast single-transmitter localization: predict the arrival-angle set at
// candidate positions from the real transmitter and the order-1 mirror
// sources of a (reconstructed) wall set, then match a measured profile by
// minimizing the clipped squared circular error.

#include <vector>

#include "mmsense/geometry.hpp"

namespace mmsense {

struct CandidateGrid {
  std::vector<Point2> positions;
  double spacing = 0.25;  // m
};

struct AoAProfile {
  std::vector<double> angles;  // rad, each in (-pi, pi]
};

class LocalizationError : public std::runtime_error {
 public:
  explicit LocalizationError(const std::string& what) : std::runtime_error(what) {}
};

/// Arrival angles visible at pos: the direct angle toward the transmitter
/// (origin) when unoccluded, plus one angle per wall whose mirror source is
/// reachable, i.e. the unfolded ray crosses the wall segment and both legs
/// are unoccluded. Angles point from pos toward the (mirror) source.
/// extent_slack loosens only the crossing test by that many meters beyond
/// the wall ends; occlusion always uses the segments as given. Reconstructed
/// extents stop at the last observed reflection, so prediction over a grid
/// needs the slack to cover the full wall.
AoAProfile predict_aoas(const std::vector<Wall>& walls, const Point2& pos,
                        double extent_slack = 0.0);

/// Sum over expected angles of the squared minimal circular distance to any
/// measured angle, clipped at a_th^2. An empty measured set charges a_th^2
/// per expected angle; an empty expected profile scores zero.
double profile_error(const AoAProfile& expected, const AoAProfile& measured, double a_th);

struct LocalizationResult {
  Point2 position;
  int index = -1;
  std::vector<double> error_surface;  // aligned with grid.positions
};

/// Grid node minimizing profile_error against the measured profile; ties go
/// to the smallest index. The full error surface is returned for plotting.
LocalizationResult localize_on_grid(const AoAProfile& measured, const CandidateGrid& grid,
                                    const std::vector<Wall>& walls, double a_th,
                                    double extent_slack = 0.0);

/// Uniformly spaced candidates over the reconstructed free space: inside the
/// bounding box of walls and anchors, at least `clearance` from every wall,
/// with the transmitter visible and a non-degenerate (>= 3 angle) predicted
/// fingerprint. When anchors are given (the localized survey positions), a
/// node must also lie within `anchor_radius` of one of them -- the layout is
/// only reconstructed where it was surveyed, and nodes beyond that see too
/// few mirror sources for the clipped error to rank them meaningfully.
CandidateGrid make_candidate_grid(const std::vector<Wall>& walls, double spacing,
                                  double clearance = 0.1,
                                  const std::vector<Point2>& anchors = {},
                                  double anchor_radius = 1.0,
                                  double extent_slack = 0.0);

/// Writes the error surface as "x,y,error" rows.
void write_error_surface_csv(const CandidateGrid& grid, const std::vector<double>& errors,
                             const std::string& path);

}  // namespace mmsense
