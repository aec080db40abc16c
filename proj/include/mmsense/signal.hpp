#pragma once

// Phased-array and OFDM signal layer: steering vectors, unitary sounding
// codebooks, per-subcarrier channel synthesis, beam-swept pilot reception and
// recovery of the element-domain signal matrix.
//
// Channel convention per subcarrier: H = sum_k |g_k| e^{-j 2 pi f r_k / c}
// a_R(phi_k) a_T(theta_k)^H, so the transmit response enters the signal
// matrix conjugated. Estimators that scan in the transmit dimension must use
// the conjugate transmit steering vector.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mmsense/common.hpp"
#include "mmsense/geometry.hpp"

namespace mmsense {

struct ArrayConfig {
  int n_elements = 16;
  double spacing = 0.0;     // nominal inter-element spacing d [m]
  double wavelength = 0.0;  // lambda at the center frequency [m]
  std::vector<double> element_phase_offsets;  // rad per element; empty = ideal
  double spacing_error = 0.0;  // actual spacing = spacing + spacing_error

  double actual_spacing() const { return spacing + spacing_error; }
};

/// Half-wavelength ULA at the given wavelength.
ArrayConfig make_array(int n_elements, double wavelength);

struct OfdmConfig {
  int n_subcarriers = 8;
  std::vector<double> subcarrier_frequencies;  // Hz, strictly increasing, equal spacing
  double bandwidth = 0.0;                      // Hz
  int n_symbols = 64;                          // pilot symbols per transmission

  double center_frequency() const {
    return 0.5 * (subcarrier_frequencies.front() + subcarrier_frequencies.back());
  }
  double subcarrier_spacing() const {
    return subcarrier_frequencies[1] - subcarrier_frequencies[0];
  }
  int center_index() const { return n_subcarriers / 2; }
};

/// Subcarriers equally spaced across [fc - bw/2, fc + bw/2].
OfdmConfig make_ofdm(double center_frequency, double bandwidth, int n_subcarriers,
                     int n_symbols);

class SignalError : public std::runtime_error {
 public:
  explicit SignalError(const std::string& what) : std::runtime_error(what) {}
};

/// Ideal steering vector: element n = exp(-j 2 pi n d sin(angle) / lambda),
/// evaluated for the leading subarray_len elements.
Eigen::VectorXcd steering_vector(const ArrayConfig& array, double angle,
                                 int subarray_len);

/// Array response including the configured imperfections: the actual spacing
/// and the per-element phase lag. Used on the synthesis side with the true
/// hardware parameters and on the estimation side with the calibrated ones.
Eigen::VectorXcd array_response(const ArrayConfig& array, double angle,
                                int subarray_len);

/// Normalized DFT beam matrix, U^H U = I.
Eigen::MatrixXcd unitary_codebook(int n);

/// Unit-modulus pseudo-random pilot phases, deterministic per seed.
std::vector<cd> make_pilot(int n_symbols, std::uint64_t seed);

struct ChannelMatrix {
  int n_rx = 0;
  int n_tx = 0;
  std::vector<Eigen::MatrixXcd> per_subcarrier;  // each n_rx x n_tx
};

/// Rank-K per-subcarrier channel from traced paths; applies the phase
/// offsets and spacing errors of both arrays.
ChannelMatrix synthesize_channel(const std::vector<PropagationPath>& paths,
                                 const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                                 const OfdmConfig& ofdm);

struct SoundingRecord {
  Eigen::MatrixXcd precoders;  // F, n_tx x n_precoders (columns are beams)
  Eigen::MatrixXcd combiners;  // W, n_rx x n_combiners
  // received(t*L + subcarrier) has shape n_combiners x n_precoders; entry
  // (j, i) is the sample for the i-th precoder and j-th combiner.
  std::vector<Eigen::MatrixXcd> received;
  std::vector<cd> pilot;
  OfdmConfig ofdm;
  double noise_power = 0.0;  // linear, per complex sample

  const Eigen::MatrixXcd& at(int symbol, int subcarrier) const {
    return received[static_cast<size_t>(symbol) * static_cast<size_t>(ofdm.n_subcarriers) +
                    static_cast<size_t>(subcarrier)];
  }
};

/// Beam-swept sounding y_{i,j}[t] = w_j^H H f_i s[t] + n[t] per subcarrier.
/// timing_offset multiplies the signal term by e^{j 2 pi f tau} per
/// subcarrier. Noise is circular complex Gaussian with the given per-sample
/// power, drawn from one substream per (precoder, combiner) pair so results
/// are reproducible regardless of generation order.
SoundingRecord sound_channel(const ChannelMatrix& h, const Eigen::MatrixXcd& precoders,
                             const Eigen::MatrixXcd& combiners, const OfdmConfig& ofdm,
                             const std::vector<cd>& pilot, double noise_power,
                             double timing_offset, std::uint64_t rng_seed);

struct SignalMatrixSeries {
  int n_rx = 0;
  int n_tx = 0;
  int n_symbols = 0;
  int n_subcarriers = 0;
  std::vector<Eigen::MatrixXcd> mats;  // index t*L + subcarrier, each n_rx x n_tx
  std::vector<cd> pilot;

  const Eigen::MatrixXcd& at(int symbol, int subcarrier) const {
    return mats[static_cast<size_t>(symbol) * static_cast<size_t>(n_subcarriers) +
                static_cast<size_t>(subcarrier)];
  }
  Eigen::MatrixXcd& at(int symbol, int subcarrier) {
    return mats[static_cast<size_t>(symbol) * static_cast<size_t>(n_subcarriers) +
                static_cast<size_t>(subcarrier)];
  }
};

/// S_hat[t] = W Y[t] F^H per symbol and subcarrier. Requires square unitary
/// codebooks; throws SignalError when the Gram deviation exceeds 1e-6.
SignalMatrixSeries recover_signal_matrix(const SoundingRecord& record);

/// Receive-side recovery for broadcast records (single precoder): per symbol
/// and subcarrier the combiner sweep is inverted to s_hat = W y.
/// Result has n_tx = 1.
SignalMatrixSeries recover_rx_vector_series(const SoundingRecord& record);

}  // namespace mmsense
