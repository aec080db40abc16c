#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mmsense/calibration.hpp"
#include "mmsense/music.hpp"

using namespace mmsense;
using mmsense::testing::path_at;
using mmsense::testing::sounded_series;

namespace {
constexpr double kFc = 60.48e9;
const double kLambda = kSpeedOfLight / kFc;
}  // namespace

TEST_CASE("ideal spacing is inverted exactly") {
  const ArrayConfig arr = make_array(16, kLambda);
  const CalibrationDataset data =
      simulate_calibration_dataset(arr, default_calibration_sweep(), 0.0, 1);
  const SpacingEstimate est =
      estimate_spacing(data, kLambda, 0.3 * kLambda, 0.7 * kLambda, kLambda / 200.0);
  CHECK(std::abs(est.spacing - 0.5 * kLambda) < 1e-6);
  CHECK_FALSE(est.ill_posed);
  // every inner sum is fully in phase at the true spacing
  CHECK(est.objective == doctest::Approx(15.0 * 19.0).epsilon(1e-9));
}

TEST_CASE("spacing error and element offsets are recovered together") {
  ArrayConfig arr = make_array(16, kLambda);
  arr.spacing_error = 0.05 * arr.spacing;  // five percent off nominal
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  arr.element_phase_offsets.assign(16, 0.0);
  for (int n = 1; n < 16; ++n) arr.element_phase_offsets[static_cast<size_t>(n)] = u(rng);

  const CalibrationDataset data =
      simulate_calibration_dataset(arr, default_calibration_sweep(), 0.0, 2);
  const SpacingEstimate est =
      estimate_spacing(data, kLambda, 0.3 * kLambda, 0.7 * kLambda, kLambda / 200.0);
  CHECK(std::abs(est.spacing - arr.actual_spacing()) < 1e-4 * arr.spacing);

  const std::vector<double> offsets = estimate_phase_offsets(data);
  REQUIRE(offsets.size() == 16);
  CHECK(offsets[0] == 0.0);
  for (int n = 1; n < 16; ++n) {
    CHECK(std::abs(offsets[static_cast<size_t>(n)] -
                   arr.element_phase_offsets[static_cast<size_t>(n)]) < 1e-9);
  }
}

TEST_CASE("spacing estimate agrees with a micrometer grid oracle") {
  ArrayConfig arr = make_array(8, kLambda);
  arr.spacing_error = -0.03 * arr.spacing;
  const CalibrationDataset data =
      simulate_calibration_dataset(arr, default_calibration_sweep(), 0.02, 3);
  const SpacingEstimate est =
      estimate_spacing(data, kLambda, 0.3 * kLambda, 0.7 * kLambda, kLambda / 200.0);

  double best_d = 0.0, best_v = -1.0;
  for (double d = 0.3 * kLambda; d <= 0.7 * kLambda; d += 1e-6) {
    double total = 0.0;
    for (int n = 1; n < 8; ++n) {
      cd acc(0.0, 0.0);
      for (int m = 0; m < static_cast<int>(data.aoas.size()); ++m) {
        acc += std::polar(1.0, data.phases(m, n) - data.phases(m, n - 1) -
                                   2.0 * kPi * d * std::sin(data.aoas[static_cast<size_t>(m)]) /
                                       kLambda);
      }
      total += std::abs(acc);
    }
    if (total > best_v) {
      best_v = total;
      best_d = d;
    }
  }
  CHECK(std::abs(est.spacing - best_d) < 2e-6);
}

TEST_CASE("phase offsets need a boresight row") {
  CalibrationDataset data;
  data.aoas = {deg2rad(5.0), deg2rad(10.0)};
  data.phases = Eigen::MatrixXd::Zero(2, 4);
  CHECK_THROWS_AS(estimate_phase_offsets(data), CalibrationError);
}

TEST_CASE("ideal array reads zero offsets") {
  const ArrayConfig arr = make_array(8, kLambda);
  const CalibrationDataset data =
      simulate_calibration_dataset(arr, default_calibration_sweep(), 0.0, 4);
  for (double off : estimate_phase_offsets(data)) CHECK(std::abs(off) < 1e-12);
}

TEST_CASE("compensation closure: estimate, compensate, re-estimate") {
  ArrayConfig arr = make_array(12, kLambda);
  arr.spacing_error = 0.04 * arr.spacing;
  arr.element_phase_offsets = {0.0, 0.3, -0.2, 0.14, -0.32, 0.21,
                               0.05, -0.11, 0.27, -0.08, 0.18, -0.25};

  const CalibrationDataset data =
      simulate_calibration_dataset(arr, default_calibration_sweep(), 0.0, 6);
  const SpacingEstimate spacing =
      estimate_spacing(data, kLambda, 0.3 * kLambda, 0.7 * kLambda, kLambda / 200.0);
  const std::vector<double> offsets = estimate_phase_offsets(data);

  ArrayConfig compensated = arr;
  compensated.spacing = spacing.spacing;
  compensated.spacing_error = arr.actual_spacing() - spacing.spacing;
  for (int n = 0; n < 12; ++n) {
    compensated.element_phase_offsets[static_cast<size_t>(n)] -=
        offsets[static_cast<size_t>(n)];
  }
  const CalibrationDataset again =
      simulate_calibration_dataset(compensated, default_calibration_sweep(), 0.0, 7);
  const SpacingEstimate spacing2 = estimate_spacing(again, kLambda, 0.3 * kLambda,
                                                    0.7 * kLambda, kLambda / 200.0);
  const std::vector<double> offsets2 = estimate_phase_offsets(again);
  CHECK(std::abs(spacing2.spacing - compensated.actual_spacing()) < 1e-9);
  for (double off : offsets2) CHECK(std::abs(off) < 1e-9);
}

TEST_CASE("calibrated steering restores ideal angle estimation") {
  // true hardware: off-nominal spacing and per-element phase lags
  ArrayConfig truth = make_array(16, kLambda);
  truth.spacing_error = 0.05 * truth.spacing;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.35, 0.35);
  truth.element_phase_offsets.assign(16, 0.0);
  for (int n = 1; n < 16; ++n) truth.element_phase_offsets[static_cast<size_t>(n)] = u(rng);

  const OfdmConfig ofdm = make_ofdm(kFc, 12.5e6, 8, 16);
  const std::vector<PropagationPath> paths = {path_at(18.4, -12.7, 5.0, 0.2, kLambda)};
  const SignalMatrixSeries s = sounded_series(paths, truth, truth, ofdm, 0.0, 10);
  const SmoothingConfig cfg{12, 12};
  const Eigen::MatrixXcd r = smoothed_covariance(s, ofdm.center_index(), cfg);
  const ScanGrid grid{-45.0, 45.0, 0.5};

  // naive belief: nominal spacing, no offsets
  const ArrayConfig naive = make_array(16, kLambda);
  const auto naive_peaks = extract_peaks(music_spectrum(r, 1, cfg, naive, naive, grid), 1);

  // calibrated belief from the rig
  const CalibrationDataset data =
      simulate_calibration_dataset(truth, default_calibration_sweep(), 0.0, 11);
  ArrayConfig calibrated = make_array(16, kLambda);
  calibrated.spacing =
      estimate_spacing(data, kLambda, 0.3 * kLambda, 0.7 * kLambda, kLambda / 200.0).spacing;
  calibrated.element_phase_offsets = estimate_phase_offsets(data);
  const auto cal_peaks =
      extract_peaks(music_spectrum(r, 1, cfg, calibrated, calibrated, grid), 1);

  REQUIRE(cal_peaks.peaks.size() == 1);
  CHECK(std::abs(rad2deg(cal_peaks.peaks[0].aoa) + 12.7) < 0.25);
  CHECK(std::abs(rad2deg(cal_peaks.peaks[0].aod) - 18.4) < 0.25);

  // the naive belief is measurably worse on at least one axis
  REQUIRE(naive_peaks.peaks.size() == 1);
  const double naive_err = std::max(std::abs(rad2deg(naive_peaks.peaks[0].aoa) + 12.7),
                                    std::abs(rad2deg(naive_peaks.peaks[0].aod) - 18.4));
  const double cal_err = std::max(std::abs(rad2deg(cal_peaks.peaks[0].aoa) + 12.7),
                                  std::abs(rad2deg(cal_peaks.peaks[0].aod) - 18.4));
  CHECK(cal_err < naive_err);
}

TEST_CASE("spacing error grows with phase noise") {
  ArrayConfig arr = make_array(8, kLambda);
  const std::vector<double> noise_levels = {0.0, 0.05, 0.1, 0.2};
  std::vector<double> medians;
  for (double sigma : noise_levels) {
    std::vector<double> errs;
    for (int trial = 0; trial < 60; ++trial) {
      const CalibrationDataset data = simulate_calibration_dataset(
          arr, default_calibration_sweep(), sigma, 100 + static_cast<unsigned>(trial));
      const SpacingEstimate est = estimate_spacing(data, kLambda, 0.3 * kLambda,
                                                   0.7 * kLambda, kLambda / 100.0);
      errs.push_back(std::abs(est.spacing - arr.actual_spacing()));
    }
    std::sort(errs.begin(), errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  for (size_t i = 0; i + 1 < medians.size(); ++i) {
    CHECK(medians[i] <= medians[i + 1] + 1e-12);
  }
}
