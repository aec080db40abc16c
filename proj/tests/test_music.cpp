#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mmsense/music.hpp"
#include "oracles.hpp"

using namespace mmsense;
using mmsense::testing::has_estimate_near;
using mmsense::testing::path_at;
using mmsense::testing::sounded_series;

namespace {
constexpr double kFc = 60.48e9;
const double kLambda = kSpeedOfLight / kFc;
const OfdmConfig kOfdm8 = make_ofdm(kFc, 12.5e6, 8, 64);
}  // namespace

TEST_CASE("smoothed covariance of a constant all-ones signal") {
  SignalMatrixSeries s;
  s.n_rx = 2;
  s.n_tx = 2;
  s.n_symbols = 3;
  s.n_subcarriers = 1;
  s.mats.assign(3, Eigen::MatrixXcd::Ones(2, 2));
  const Eigen::MatrixXcd r = smoothed_covariance(s, 0, {2, 2});
  CHECK((r - Eigen::MatrixXcd::Ones(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("smoothed covariance with full subarray and one symbol is the outer product") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  SignalMatrixSeries s;
  s.n_rx = 3;
  s.n_tx = 3;
  s.n_symbols = 1;
  s.n_subcarriers = 1;
  Eigen::MatrixXcd m(3, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = cd(g(rng), g(rng));
  }
  s.mats = {m};
  const Eigen::MatrixXcd r = smoothed_covariance(s, 0, {3, 3});
  Eigen::VectorXcd v(9);
  for (int rr = 0; rr < 3; ++rr) {
    for (int cc = 0; cc < 3; ++cc) v(rr * 3 + cc) = m(rr, cc);
  }
  CHECK((r - v * v.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("smoothed covariance equals the triple-loop oracle") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<PropagationPath> paths = {
      path_at(10.0, -20.0, 4.0, 0.5, kLambda), path_at(-15.0, 25.0, 6.0, 0.3, kLambda)};
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, kOfdm8, 0.05, 17);
  const SmoothingConfig cfg{6, 6};
  const Eigen::MatrixXcd fast = smoothed_covariance(s, kOfdm8.center_index(), cfg);
  const Eigen::MatrixXcd direct =
      oracle::smoothed_covariance_direct(s, kOfdm8.center_index(), cfg);
  CHECK((fast - direct).cwiseAbs().maxCoeff() < 1e-12);

  // Hermitian PSD within tolerance
  CHECK((fast - fast.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(fast);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("smoothed covariance rejects oversized subarrays") {
  SignalMatrixSeries s;
  s.n_rx = 4;
  s.n_tx = 4;
  s.n_symbols = 1;
  s.n_subcarriers = 1;
  s.mats = {Eigen::MatrixXcd::Ones(4, 4)};
  CHECK_THROWS_AS(smoothed_covariance(s, 0, {5, 4}), EstimationError);
}

TEST_CASE("estimate_order on canonical profiles") {
  const int m = 16;
  // pure noise: flat spectrum collapses to the configured minimum
  CHECK(estimate_order(Eigen::MatrixXcd::Identity(m, m), 1000) == 1);

  // all-zero matrix carries no signal
  CHECK_THROWS_AS(estimate_order(Eigen::MatrixXcd::Zero(m, m), 1000), EstimationError);

  // rank-1 signal plus small noise
  Eigen::VectorXcd a(m);
  for (int i = 0; i < m; ++i) a(i) = std::polar(1.0, 0.3 * i);
  const Eigen::MatrixXcd r1 =
      a * a.adjoint() + 0.01 * Eigen::MatrixXcd::Identity(m, m);
  CHECK(estimate_order(r1, 1000) == 1);

  // fixed override
  OrderSelection fixed;
  fixed.mode = OrderMode::kFixed;
  fixed.fixed_k = 5;
  CHECK(estimate_order(Eigen::MatrixXcd::Identity(m, m), 1000, fixed) == 5);
}

TEST_CASE("estimate_order finds three paths at 20 dB") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<PropagationPath> paths = {path_at(-20.0, -30.0, 3.0, 1.0, kLambda),
                                              path_at(5.0, 10.0, 5.0, 0.8, kLambda),
                                              path_at(30.0, -5.0, 7.0, 0.6, kLambda)};
  const double noise = 1.0 * 64.0 * 1e-2;  // 20 dB below the strongest beamformed path
  OfdmConfig ofdm = kOfdm8;
  ofdm.n_symbols = 256;
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, ofdm, noise, 23);
  const SmoothingConfig cfg{6, 6};
  const Eigen::MatrixXcd r = smoothed_covariance(s, ofdm.center_index(), cfg);
  CHECK(estimate_order(r, smoothing_snapshots(s, cfg)) == 3);
}

TEST_CASE("subspace split reconstructs the covariance") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<PropagationPath> paths = {path_at(0.0, 0.0, 4.0, 1.0, kLambda),
                                              path_at(20.0, -15.0, 6.0, 0.5, kLambda)};
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, kOfdm8, 0.02, 31);
  const SmoothingConfig cfg{6, 6};
  const Eigen::MatrixXcd r = smoothed_covariance(s, kOfdm8.center_index(), cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
  const Eigen::MatrixXcd rebuilt = es.eigenvectors() *
                                   es.eigenvalues().asDiagonal() *
                                   es.eigenvectors().adjoint();
  CHECK((rebuilt - r).cwiseAbs().maxCoeff() < 1e-9);
  // eigenvalue count is the full subspace dimension
  CHECK(es.eigenvalues().size() == cfg.sub_tx * cfg.sub_rx);
}

TEST_CASE("single noiseless path peaks at its angles and nulls the denominator") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<PropagationPath> paths = {path_at(0.0, 0.0, 4.0, 1.0, kLambda)};
  OfdmConfig ofdm = kOfdm8;
  ofdm.n_symbols = 8;
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, ofdm, 0.0, 3);
  const SmoothingConfig cfg{6, 6};
  const Eigen::MatrixXcd r = smoothed_covariance(s, ofdm.center_index(), cfg);
  const ScanGrid grid{-45.0, 45.0, 0.5};
  const MusicSpectrum spec = music_spectrum(r, 1, cfg, arr, arr, grid);

  int bi = 0, bj = 0;
  double best = 0.0;
  double off_peak_den = 0.0;
  int off_count = 0;
  for (int i = 0; i < spec.value.rows(); ++i) {
    for (int j = 0; j < spec.value.cols(); ++j) {
      if (spec.value(i, j) > best) {
        best = spec.value(i, j);
        bi = i;
        bj = j;
      }
    }
  }
  for (int i = 0; i < spec.value.rows(); ++i) {
    for (int j = 0; j < spec.value.cols(); ++j) {
      if (std::abs(i - bi) > 10 || std::abs(j - bj) > 10) {
        off_peak_den += 1.0 / spec.value(i, j);
        ++off_count;
      }
    }
  }
  CHECK(spec.aoa_deg[static_cast<size_t>(bi)] == doctest::Approx(0.0));
  CHECK(spec.aod_deg[static_cast<size_t>(bj)] == doctest::Approx(0.0));
  // steering vector of the true path is orthogonal to the noise subspace
  CHECK(1.0 / best < 1e-8 * (off_peak_den / off_count));
}

TEST_CASE("parallel spectrum kernel equals the serial reference") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<PropagationPath> paths = {path_at(-12.0, 8.0, 4.0, 1.0, kLambda),
                                              path_at(25.0, -30.0, 6.0, 0.7, kLambda)};
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, kOfdm8, 0.03, 5);
  const SmoothingConfig cfg{6, 6};
  const Eigen::MatrixXcd r = smoothed_covariance(s, kOfdm8.center_index(), cfg);
  const ScanGrid grid{-45.0, 45.0, 1.0};
  const MusicSpectrum fast = music_spectrum(r, 2, cfg, arr, arr, grid);
  const MusicSpectrum ref = music_spectrum_serial(r, 2, cfg, arr, arr, grid);
  REQUIRE(fast.value.rows() == ref.value.rows());
  double max_den_diff = 0.0;
  for (int i = 0; i < fast.value.rows(); ++i) {
    for (int j = 0; j < fast.value.cols(); ++j) {
      max_den_diff =
          std::max(max_den_diff, std::abs(1.0 / fast.value(i, j) - 1.0 / ref.value(i, j)));
    }
  }
  CHECK(max_den_diff < 1e-9);
}

TEST_CASE("coherent paths need spatial smoothing") {
  const ArrayConfig arr = make_array(8, kLambda);
  // Fully coherent: both paths carry the same pilot, and the path lengths
  // differ by a whole number of wavelengths so the two gains add in phase.
  // The rank-1 covariance then merges the pair into one broad lobe.
  const std::vector<PropagationPath> paths = {
      path_at(-6.0, -6.0, 4.0, 1.0, kLambda),
      path_at(6.0, 6.0, 4.0 + 100.0 * kLambda, 1.0, kLambda)};
  OfdmConfig ofdm = kOfdm8;
  ofdm.n_symbols = 64;
  const SignalMatrixSeries s = sounded_series(paths, arr, arr, ofdm, 0.0, 9);
  const ScanGrid grid{-45.0, 45.0, 0.5};

  const SmoothingConfig smoothed{6, 6};
  const Eigen::MatrixXcd rs = smoothed_covariance(s, ofdm.center_index(), smoothed);
  const auto peaks_s = extract_peaks(music_spectrum(rs, 2, smoothed, arr, arr, grid), 2);
  CHECK(has_estimate_near(peaks_s.peaks, -6.0, -6.0, 0.5));
  CHECK(has_estimate_near(peaks_s.peaks, 6.0, 6.0, 0.5));

  const SmoothingConfig none{8, 8};  // single subarray: smoothing disabled
  const Eigen::MatrixXcd rn = smoothed_covariance(s, ofdm.center_index(), none);
  const auto peaks_n = extract_peaks(music_spectrum(rn, 2, none, arr, arr, grid), 2);
  const bool both_found = has_estimate_near(peaks_n.peaks, -6.0, -6.0, 2.0) &&
                          has_estimate_near(peaks_n.peaks, 6.0, 6.0, 2.0);
  CHECK_FALSE(both_found);
}

TEST_CASE("extract_peaks on degenerate spectra") {
  MusicSpectrum flat;
  flat.aoa_deg = {0.0, 1.0, 2.0};
  flat.aod_deg = {0.0, 1.0, 2.0};
  flat.value = Eigen::MatrixXd::Ones(3, 3);
  const PeakExtraction none = extract_peaks(flat, 1);
  CHECK(none.peaks.empty());
  CHECK(none.underfound);

  MusicSpectrum single = flat;
  single.value(1, 1) = 5.0;
  const PeakExtraction one = extract_peaks(single, 3);
  REQUIRE(one.peaks.size() == 1);
  CHECK(one.underfound);
  CHECK(rad2deg(one.peaks[0].aoa) == doctest::Approx(1.0));
}

TEST_CASE("three noiseless paths refine to a quarter degree on a half degree grid") {
  const ArrayConfig tx = make_array(16, kLambda);
  const ArrayConfig rx = make_array(16, kLambda);
  // off-grid truths
  const std::vector<std::pair<double, double>> truths = {
      {-20.3, 12.6}, {3.8, -27.1}, {28.2, 31.4}};  // (aoa, aod) degrees
  std::vector<PropagationPath> paths;
  double len = 4.0;
  for (const auto& [aoa, aod] : truths) {
    paths.push_back(path_at(aod, aoa, len, 1.0 / len, kLambda));
    len += 1.5;
  }
  OfdmConfig ofdm = kOfdm8;
  ofdm.n_symbols = 16;
  const SignalMatrixSeries s = sounded_series(paths, tx, rx, ofdm, 0.0, 21);
  const SmoothingConfig cfg{12, 12};
  const Eigen::MatrixXcd r = smoothed_covariance(s, ofdm.center_index(), cfg);
  const int k = estimate_order(r, smoothing_snapshots(s, cfg));
  CHECK(k == 3);
  const MusicSpectrum spec = music_spectrum(r, 3, cfg, tx, rx, {-45.0, 45.0, 0.5});
  const PeakExtraction peaks = extract_peaks(spec, 3);
  REQUIRE(peaks.peaks.size() == 3);
  for (const auto& [aoa, aod] : truths) {
    CHECK(has_estimate_near(peaks.peaks, aoa, aod, 0.25));
  }
}

TEST_CASE("median angle error grows as SNR drops") {
  const ArrayConfig arr = make_array(8, kLambda);
  const std::vector<double> snrs = {30.0, 20.0, 10.0, 5.0};
  OfdmConfig ofdm = kOfdm8;
  ofdm.n_symbols = 32;
  const SmoothingConfig cfg{6, 6};
  const ScanGrid grid{-45.0, 45.0, 1.0};

  std::vector<double> medians;
  for (double snr : snrs) {
    std::vector<double> errs;
    for (int trial = 0; trial < 60; ++trial) {
      const std::vector<PropagationPath> paths = {path_at(14.2, -8.7, 5.0, 1.0, kLambda)};
      const double noise = 64.0 * std::pow(10.0, -snr / 10.0);
      const SignalMatrixSeries s =
          sounded_series(paths, arr, arr, ofdm, noise, 100 + static_cast<unsigned>(trial));
      const Eigen::MatrixXcd r = smoothed_covariance(s, ofdm.center_index(), cfg);
      const auto peaks = extract_peaks(music_spectrum(r, 1, cfg, arr, arr, grid), 1);
      if (peaks.peaks.empty()) {
        errs.push_back(45.0);
        continue;
      }
      errs.push_back(std::max(std::abs(rad2deg(peaks.peaks[0].aoa) + 8.7),
                              std::abs(rad2deg(peaks.peaks[0].aod) - 14.2)));
    }
    std::sort(errs.begin(), errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  for (size_t i = 0; i + 1 < medians.size(); ++i) {
    CHECK(medians[i] <= medians[i + 1] + 1e-9);
  }
}
