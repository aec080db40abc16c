#include "mmsense/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mmsense {

namespace {

// Keeps one representative per group of angles closer than merge_rad in the
// sin domain (the array response depends on sin only). The target goes first
// so near-duplicates collapse onto it and the unit selector stays column 0.
std::vector<double> merge_angles(const std::vector<double>& angles, int target,
                                 double merge_rad) {
  std::vector<double> kept;
  kept.push_back(angles[static_cast<size_t>(target)]);
  for (int i = 0; i < static_cast<int>(angles.size()); ++i) {
    if (i == target) continue;
    const double a = angles[static_cast<size_t>(i)];
    bool dup = false;
    for (double k : kept) {
      if (std::abs(std::sin(a) - std::sin(k)) < std::sin(merge_rad)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(a);
  }
  return kept;
}

Eigen::VectorXcd solve_unit_selector(const Eigen::MatrixXcd& a, const char* side) {
  const Eigen::MatrixXcd gram = a.adjoint() * a;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  const double cond = svd.singularValues()(0) /
                      std::max(svd.singularValues()(svd.singularValues().size() - 1), 1e-300);
  if (cond > 1e8) {
    std::ostringstream os;
    os << "null_beamformers: ill-conditioned " << side
       << " steering matrix, condition number " << cond;
    throw RangingError(os.str());
  }
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(a.cols());
  e1(0) = 1.0;
  return a * gram.ldlt().solve(e1);
}

}  // namespace

NullBeamformers null_beamformers(const std::vector<double>& aods,
                                 const std::vector<double>& aoas, int target_index,
                                 const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                                 double merge_deg) {
  if (aods.size() != aoas.size() || aods.empty()) {
    throw RangingError("null_beamformers: angle lists must be non-empty and equal length");
  }
  if (target_index < 0 || target_index >= static_cast<int>(aods.size())) {
    throw RangingError("null_beamformers: target index out of range");
  }
  if (static_cast<int>(aods.size()) > std::min(tx_array.n_elements, rx_array.n_elements)) {
    throw RangingError("null_beamformers: more paths than array elements");
  }
  const double merge_rad = deg2rad(merge_deg);
  const std::vector<double> aod_kept = merge_angles(aods, target_index, merge_rad);
  const std::vector<double> aoa_kept = merge_angles(aoas, target_index, merge_rad);

  Eigen::MatrixXcd at(tx_array.n_elements, static_cast<int>(aod_kept.size()));
  for (int c = 0; c < static_cast<int>(aod_kept.size()); ++c) {
    at.col(c) = array_response(tx_array, aod_kept[static_cast<size_t>(c)], tx_array.n_elements);
  }
  Eigen::MatrixXcd ar(rx_array.n_elements, static_cast<int>(aoa_kept.size()));
  for (int c = 0; c < static_cast<int>(aoa_kept.size()); ++c) {
    ar.col(c) = array_response(rx_array, aoa_kept[static_cast<size_t>(c)], rx_array.n_elements);
  }

  NullBeamformers bf;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_t(at), svd_r(ar);
  bf.condition_number =
      std::max(svd_t.singularValues()(0) / svd_t.singularValues().tail(1)(0),
               svd_r.singularValues()(0) / svd_r.singularValues().tail(1)(0));
  bf.tx_weights = solve_unit_selector(at, "transmit");
  bf.rx_weights = solve_unit_selector(ar, "receive");
  return bf;
}

SeparatedSignal separate_path_signal(const SignalMatrixSeries& s, const NullBeamformers& bf) {
  if (bf.rx_weights.size() != s.n_rx || bf.tx_weights.size() != s.n_tx) {
    throw RangingError("separate_path_signal: beamformer dimensions do not match");
  }
  SeparatedSignal out;
  out.samples.resize(s.n_subcarriers, s.n_symbols);
  for (int t = 0; t < s.n_symbols; ++t) {
    for (int sc = 0; sc < s.n_subcarriers; ++sc) {
      out.samples(sc, t) = (bf.rx_weights.adjoint() * s.at(t, sc) * bf.tx_weights).value();
    }
  }
  return out;
}

SubcarrierPhases extract_subcarrier_phases(const SeparatedSignal& sep,
                                           const std::vector<cd>& pilot,
                                           const OfdmConfig& ofdm) {
  const int nl = static_cast<int>(sep.samples.rows());
  const int nt = static_cast<int>(sep.samples.cols());
  if (static_cast<int>(pilot.size()) != nt) {
    throw RangingError("extract_subcarrier_phases: pilot length mismatch");
  }
  SubcarrierPhases ph;
  ph.frequencies = ofdm.subcarrier_frequencies;
  ph.phases.resize(static_cast<size_t>(nl));
  for (int sc = 0; sc < nl; ++sc) {
    cd acc(0.0, 0.0);
    for (int t = 0; t < nt; ++t) {
      acc += sep.samples(sc, t) * std::conj(pilot[static_cast<size_t>(t)]);
    }
    ph.phases[static_cast<size_t>(sc)] = -std::arg(acc / static_cast<double>(nt));
  }
  return ph;
}

namespace {

RangeEstimate maximize_range_objective(const std::vector<double>& phases,
                                       const std::vector<double>& freqs, double offset,
                                       double d_max, double grid) {
  const size_t l = phases.size();
  if (l < 2) throw RangingError("estimate_range: need at least two subcarriers");
  if (grid <= 0.0 || d_max <= 0.0) throw RangingError("estimate_range: bad search interval");

  auto objective = [&](double d) {
    cd acc(0.0, 0.0);
    for (size_t i = 0; i < l; ++i) {
      acc += std::polar(1.0, phases[i] - 2.0 * kPi * freqs[i] * (d - offset) / kSpeedOfLight);
    }
    return std::abs(acc);
  };

  double best_d = 0.0, best_v = -1.0;
  const int n = static_cast<int>(std::floor(d_max / grid)) + 1;
  for (int i = 0; i < n; ++i) {
    const double d = std::min(i * grid, d_max);
    const double v = objective(d);
    if (v > best_v) {
      best_v = v;
      best_d = d;
    }
  }
  const double lo = std::max(0.0, best_d - grid);
  const double hi = std::min(d_max, best_d + grid);
  const double refined = golden_max(objective, lo, hi, 1e-7);

  RangeEstimate est;
  est.length = refined;
  est.objective_value = objective(refined);
  est.ambiguity_interval = kSpeedOfLight / (freqs[1] - freqs[0]);
  est.aliased = d_max > est.ambiguity_interval;
  return est;
}

}  // namespace

RangeEstimate estimate_range(const SubcarrierPhases& ph, double d_max, double grid) {
  return maximize_range_objective(ph.phases, ph.frequencies, 0.0, d_max, grid);
}

RangeEstimate estimate_range_calibrated(const SubcarrierPhases& ph,
                                        const SubcarrierPhases& ph_ref, double d0,
                                        double d_max, double grid) {
  if (ph.frequencies != ph_ref.frequencies || ph.phases.size() != ph_ref.phases.size()) {
    throw RangingError("estimate_range_calibrated: frequency grids do not match");
  }
  std::vector<double> diff(ph.phases.size());
  for (size_t i = 0; i < diff.size(); ++i) diff[i] = ph.phases[i] - ph_ref.phases[i];
  return maximize_range_objective(diff, ph.frequencies, d0, d_max, grid);
}

}  // namespace mmsense
