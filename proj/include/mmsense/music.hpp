#pragma once

// Joint AoA/AoD estimation: spatial smoothing over sliding subarrays,
// model-order selection on the eigenvalue profile, 2D spectrum scan and peak
// extraction. The scan vector is kron(a_R(phi), conj(a_T(theta))) to match
// the a_R a_T^H channel convention (see signal.hpp).
//
// music_spectrum is the OpenMP grid kernel used by the pipeline;
// music_spectrum_serial is the direct noise-subspace transcription kept as a
// reference for tests and benchmarks.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mmsense/signal.hpp"

namespace mmsense {

struct SmoothingConfig {
  int sub_tx = 12;  // N'_T
  int sub_rx = 12;  // N'_R
};

struct ScanGrid {
  double min_deg = -45.0;
  double max_deg = 45.0;
  double step_deg = 0.5;

  std::vector<double> angles_deg() const;
};

struct MusicSpectrum {
  std::vector<double> aoa_deg;  // rows
  std::vector<double> aod_deg;  // cols
  Eigen::MatrixXd value;        // f(aoa, aod), positive
};

struct PathEstimate {
  double aod = 0.0;  // rad
  double aoa = 0.0;  // rad
  double spectrum_value = 0.0;
  std::optional<double> length;  // m, filled by ranging
};

struct PeakExtraction {
  std::vector<PathEstimate> peaks;  // sorted by descending spectrum value
  bool underfound = false;          // fewer strict local maxima than requested
};

enum class OrderMode { kMdl, kAic, kFixed };

struct OrderSelection {
  OrderMode mode = OrderMode::kMdl;
  int fixed_k = 1;
  int k_min = 1;
};

class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

/// Spatially smoothed covariance of the vectorized sliding submatrices of
/// S[t] at one subcarrier. Result is Hermitian PSD of size sub_tx*sub_rx.
/// Submatrices are vectorized row-major: index r*sub_tx + c for receive
/// element r and transmit element c.
Eigen::MatrixXcd smoothed_covariance(const SignalMatrixSeries& s, int subcarrier,
                                     const SmoothingConfig& cfg);

/// Number of averaged covariance terms, used as the effective snapshot count.
long smoothing_snapshots(const SignalMatrixSeries& s, const SmoothingConfig& cfg);

/// Source count from the eigenvalue profile (MDL by default). Clamped to
/// [k_min, M-1]. Throws EstimationError on an all-zero matrix.
int estimate_order(const Eigen::MatrixXcd& r, long n_snapshots,
                   const OrderSelection& sel = {});

MusicSpectrum music_spectrum(const Eigen::MatrixXcd& r, int k, const SmoothingConfig& cfg,
                             const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                             const ScanGrid& grid);

MusicSpectrum music_spectrum_serial(const Eigen::MatrixXcd& r, int k,
                                    const SmoothingConfig& cfg, const ArrayConfig& tx_array,
                                    const ArrayConfig& rx_array, const ScanGrid& grid);

/// Top-k strict 2D local maxima, merged when closer than one grid step and
/// refined by quadratic interpolation of the reciprocal spectrum per axis.
PeakExtraction extract_peaks(const MusicSpectrum& spec, int k);

// Receive-only (broadcast) variants used for AoA-profile localization.

Eigen::MatrixXcd smoothed_covariance_1d(const SignalMatrixSeries& s, int subcarrier,
                                        int sub_rx);

long smoothing_snapshots_1d(const SignalMatrixSeries& s, int sub_rx);

struct AoaSpectrum {
  std::vector<double> aoa_deg;
  std::vector<double> value;
};

AoaSpectrum music_spectrum_1d(const Eigen::MatrixXcd& r, int k, int sub_rx,
                              const ArrayConfig& rx_array, const ScanGrid& grid);

PeakExtraction extract_peaks_1d(const AoaSpectrum& spec, int k);

/// Writes the spectrum as "aoa_deg,aod_deg,value" rows.
void write_spectrum_csv(const MusicSpectrum& spec, const std::string& path);

}  // namespace mmsense
