#pragma once

// Per-path length estimation: null-steering separation of one path's signal
// followed by multi-tone phase ranging, with optional reference calibration
// that cancels common per-subcarrier phase corruption (timing offset).
//
// Subcarrier phases follow the delay convention: the stored phase is the
// negated argument of the separated signal, so a path of length r produces
// phi_i = 2 pi f_i r / c (plus a constant that the estimator is invariant to).

#include <Eigen/Dense>
#include <vector>

#include "mmsense/music.hpp"
#include "mmsense/signal.hpp"

namespace mmsense {

struct NullBeamformers {
  Eigen::VectorXcd tx_weights;  // length N_T
  Eigen::VectorXcd rx_weights;  // length N_R
  double condition_number = 1.0;
};

struct SubcarrierPhases {
  std::vector<double> phases;       // rad, one per subcarrier
  std::vector<double> frequencies;  // Hz
};

struct RangeEstimate {
  double length = 0.0;           // m
  double objective_value = 0.0;  // |sum of unit phasors|, equals L at a perfect fit
  double ambiguity_interval = 0.0;  // c / subcarrier spacing
  bool aliased = false;             // search interval exceeded the ambiguity interval
};

struct SeparatedSignal {
  Eigen::MatrixXcd samples;  // n_subcarriers x n_symbols
};

class RangingError : public std::runtime_error {
 public:
  explicit RangingError(const std::string& what) : std::runtime_error(what) {}
};

/// Unit response toward the target path, zero response toward every other
/// listed path, on both arrays (minimum-norm solution through the aggregated
/// steering matrices). Angles closer than merge_deg are merged before the
/// matrices are built. Throws RangingError with the condition number when the
/// steering matrix is near rank deficient.
NullBeamformers null_beamformers(const std::vector<double>& aods,
                                 const std::vector<double>& aoas, int target_index,
                                 const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                                 double merge_deg = 1.0);

/// s_i[t] = u^H S[t] v per subcarrier: the target path's scalar signal.
SeparatedSignal separate_path_signal(const SignalMatrixSeries& s,
                                     const NullBeamformers& bf);

/// Delay phases of the symbol-averaged separated signal, pilot removed.
SubcarrierPhases extract_subcarrier_phases(const SeparatedSignal& sep,
                                           const std::vector<cd>& pilot,
                                           const OfdmConfig& ofdm);

/// Coarse grid search over [0, d_max] followed by golden-section refinement
/// of |sum_i exp(j(phi_i - 2 pi f_i d / c))|.
RangeEstimate estimate_range(const SubcarrierPhases& ph, double d_max, double grid);

/// Reference-calibrated variant: maximizes the same objective on the phase
/// differences phi_i - phi_ref_i with the known reference distance d0 removed,
/// which cancels any per-subcarrier phase common to both measurements.
RangeEstimate estimate_range_calibrated(const SubcarrierPhases& ph,
                                        const SubcarrierPhases& ph_ref, double d0,
                                        double d_max, double grid);

}  // namespace mmsense
