#pragma once

// Array self-calibration from single-tone phase measurements: inter-element
// spacing from a multi-angle sweep and per-element phase offsets from the
// boresight row. Phases follow the same delay convention as ranging: the
// stored value is the negated argument of the element's response, so an
// element at distance n*d*sin(theta) behind the wavefront stores
// 2 pi n d sin(theta) / lambda plus its line-delay offset.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mmsense/signal.hpp"

namespace mmsense {

struct CalibrationDataset {
  std::vector<double> aoas;  // rad, first entry must be boresight (0)
  Eigen::MatrixXd phases;    // (aoa index, element index), rad
};

struct SpacingEstimate {
  double spacing = 0.0;       // m
  double objective = 0.0;
  bool ill_posed = false;     // single sweep angle: objective flat in d
};

class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

/// Far-field single-tone rig: one element active at a time, no multipath.
/// Phases are generated from the array's actual spacing and phase offsets,
/// with optional Gaussian phase noise.
CalibrationDataset simulate_calibration_dataset(const ArrayConfig& array,
                                                const std::vector<double>& aoas,
                                                double phase_noise_std, std::uint64_t seed);

/// Uniform sweep of n_angles over [-span, span] with a boresight row first.
std::vector<double> default_calibration_sweep(int n_angles = 19,
                                              double span = deg2rad(45.0));

/// argmax over d of sum_n |sum_m exp(j(phi(m,n) - phi(m,n-1) - 2 pi d
/// sin(theta_m) / lambda))|, grid search plus golden-section refinement over
/// [d_lo, d_hi].
SpacingEstimate estimate_spacing(const CalibrationDataset& data, double wavelength,
                                 double d_lo, double d_hi, double grid);

/// Per-element phase offsets relative to element 0, read from the boresight
/// row as the cumulative sum of adjacent differences.
std::vector<double> estimate_phase_offsets(const CalibrationDataset& data);

}  // namespace mmsense
