#include "mmsense/calibration.hpp"

#include <cmath>
#include <random>

namespace mmsense {

CalibrationDataset simulate_calibration_dataset(const ArrayConfig& array,
                                                const std::vector<double>& aoas,
                                                double phase_noise_std, std::uint64_t seed) {
  CalibrationDataset data;
  data.aoas = aoas;
  data.phases.resize(static_cast<int>(aoas.size()), array.n_elements);
  std::mt19937_64 rng(mix_seed(seed, 0x63616cULL));
  std::normal_distribution<double> gauss(0.0, phase_noise_std);
  const double d = array.actual_spacing();
  for (int m = 0; m < static_cast<int>(aoas.size()); ++m) {
    const double k = 2.0 * kPi * d * std::sin(aoas[static_cast<size_t>(m)]) / array.wavelength;
    for (int n = 0; n < array.n_elements; ++n) {
      const double off = array.element_phase_offsets.empty()
                             ? 0.0
                             : array.element_phase_offsets[static_cast<size_t>(n)];
      double phase = k * n + off;
      if (phase_noise_std > 0.0) phase += gauss(rng);
      data.phases(m, n) = phase;
    }
  }
  return data;
}

std::vector<double> default_calibration_sweep(int n_angles, double span) {
  std::vector<double> sweep;
  sweep.push_back(0.0);  // boresight row first
  for (int i = 0; i < n_angles; ++i) {
    const double a = -span + 2.0 * span * i / (n_angles - 1);
    if (std::abs(a) > 1e-12) sweep.push_back(a);
  }
  return sweep;
}

SpacingEstimate estimate_spacing(const CalibrationDataset& data, double wavelength,
                                 double d_lo, double d_hi, double grid) {
  const int n_aoa = static_cast<int>(data.aoas.size());
  const int n_el = static_cast<int>(data.phases.cols());
  if (n_el < 2) throw CalibrationError("estimate_spacing: need at least two elements");
  if (d_hi <= d_lo || grid <= 0.0) {
    throw CalibrationError("estimate_spacing: bad search interval");
  }

  auto objective = [&](double d) {
    double total = 0.0;
    for (int n = 1; n < n_el; ++n) {
      cd acc(0.0, 0.0);
      for (int m = 0; m < n_aoa; ++m) {
        const double model = 2.0 * kPi * d * std::sin(data.aoas[static_cast<size_t>(m)]) /
                             wavelength;
        acc += std::polar(1.0, data.phases(m, n) - data.phases(m, n - 1) - model);
      }
      total += std::abs(acc);
    }
    return total;
  };

  double best_d = d_lo, best_v = -1.0;
  for (double d = d_lo; d <= d_hi + 1e-15; d += grid) {
    const double v = objective(d);
    if (v > best_v) {
      best_v = v;
      best_d = d;
    }
  }
  SpacingEstimate est;
  est.ill_posed = n_aoa < 2;
  est.spacing = golden_max(objective, std::max(d_lo, best_d - grid),
                           std::min(d_hi, best_d + grid), 1e-11);
  est.objective = objective(est.spacing);
  return est;
}

std::vector<double> estimate_phase_offsets(const CalibrationDataset& data) {
  int boresight = -1;
  for (int m = 0; m < static_cast<int>(data.aoas.size()); ++m) {
    if (std::abs(data.aoas[static_cast<size_t>(m)]) < 1e-12) {
      boresight = m;
      break;
    }
  }
  if (boresight < 0) {
    throw CalibrationError("estimate_phase_offsets: missing boresight row");
  }
  const int n_el = static_cast<int>(data.phases.cols());
  std::vector<double> offsets(static_cast<size_t>(n_el), 0.0);
  for (int n = 1; n < n_el; ++n) {
    offsets[static_cast<size_t>(n)] =
        offsets[static_cast<size_t>(n) - 1] +
        wrap_angle(data.phases(boresight, n) - data.phases(boresight, n - 1));
  }
  return offsets;
}

}  // namespace mmsense
