#include "mmsense/signal.hpp"

#include <random>

namespace mmsense {

ArrayConfig make_array(int n_elements, double wavelength) {
  ArrayConfig cfg;
  cfg.n_elements = n_elements;
  cfg.wavelength = wavelength;
  cfg.spacing = 0.5 * wavelength;
  return cfg;
}

OfdmConfig make_ofdm(double center_frequency, double bandwidth, int n_subcarriers,
                     int n_symbols) {
  if (n_subcarriers < 2) throw SignalError("make_ofdm: need at least 2 subcarriers");
  OfdmConfig cfg;
  cfg.n_subcarriers = n_subcarriers;
  cfg.bandwidth = bandwidth;
  cfg.n_symbols = n_symbols;
  const double df = bandwidth / (n_subcarriers - 1);
  cfg.subcarrier_frequencies.resize(static_cast<size_t>(n_subcarriers));
  for (int i = 0; i < n_subcarriers; ++i) {
    cfg.subcarrier_frequencies[static_cast<size_t>(i)] =
        center_frequency - 0.5 * bandwidth + df * i;
  }
  return cfg;
}

Eigen::VectorXcd steering_vector(const ArrayConfig& array, double angle, int subarray_len) {
  if (subarray_len < 1 || subarray_len > array.n_elements) {
    throw SignalError("steering_vector: subarray length out of range");
  }
  Eigen::VectorXcd v(subarray_len);
  const double k = 2.0 * kPi * array.spacing * std::sin(angle) / array.wavelength;
  for (int n = 0; n < subarray_len; ++n) v(n) = std::polar(1.0, -k * n);
  return v;
}

Eigen::VectorXcd array_response(const ArrayConfig& array, double angle, int subarray_len) {
  if (subarray_len < 1 || subarray_len > array.n_elements) {
    throw SignalError("array_response: subarray length out of range");
  }
  Eigen::VectorXcd v(subarray_len);
  const double k = 2.0 * kPi * array.actual_spacing() * std::sin(angle) / array.wavelength;
  for (int n = 0; n < subarray_len; ++n) {
    const double off = array.element_phase_offsets.empty()
                           ? 0.0
                           : array.element_phase_offsets[static_cast<size_t>(n)];
    v(n) = std::polar(1.0, -(k * n + off));
  }
  return v;
}

Eigen::MatrixXcd unitary_codebook(int n) {
  if (n < 1) throw SignalError("unitary_codebook: n must be positive");
  Eigen::MatrixXcd u(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      u(r, c) = std::polar(scale, -2.0 * kPi * r * c / n);
    }
  }
  return u;
}

std::vector<cd> make_pilot(int n_symbols, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x70696c6f74ULL));  // "pilot" stream
  std::uniform_real_distribution<double> dist(-kPi, kPi);
  std::vector<cd> pilot(static_cast<size_t>(n_symbols));
  for (auto& s : pilot) s = std::polar(1.0, dist(rng));
  return pilot;
}

ChannelMatrix synthesize_channel(const std::vector<PropagationPath>& paths,
                                 const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                                 const OfdmConfig& ofdm) {
  if (paths.empty()) throw SignalError("synthesize_channel: empty path list");
  ChannelMatrix h;
  h.n_rx = rx_array.n_elements;
  h.n_tx = tx_array.n_elements;
  h.per_subcarrier.assign(static_cast<size_t>(ofdm.n_subcarriers),
                          Eigen::MatrixXcd::Zero(h.n_rx, h.n_tx));

  for (const PropagationPath& p : paths) {
    const Eigen::VectorXcd ar = array_response(rx_array, p.aoa, rx_array.n_elements);
    const Eigen::VectorXcd at = array_response(tx_array, p.aod, tx_array.n_elements);
    const Eigen::MatrixXcd outer = ar * at.adjoint();
    const double mag = std::abs(p.gain);
    for (int sc = 0; sc < ofdm.n_subcarriers; ++sc) {
      const double f = ofdm.subcarrier_frequencies[static_cast<size_t>(sc)];
      const cd g = std::polar(mag, -2.0 * kPi * f * p.length / kSpeedOfLight);
      h.per_subcarrier[static_cast<size_t>(sc)] += g * outer;
    }
  }
  return h;
}

SoundingRecord sound_channel(const ChannelMatrix& h, const Eigen::MatrixXcd& precoders,
                             const Eigen::MatrixXcd& combiners, const OfdmConfig& ofdm,
                             const std::vector<cd>& pilot, double noise_power,
                             double timing_offset, std::uint64_t rng_seed) {
  if (precoders.rows() != h.n_tx || combiners.rows() != h.n_rx) {
    throw SignalError("sound_channel: codebook dimensions do not match the channel");
  }
  if (static_cast<int>(pilot.size()) != ofdm.n_symbols) {
    throw SignalError("sound_channel: pilot length does not match n_symbols");
  }
  const int np = static_cast<int>(precoders.cols());
  const int nc = static_cast<int>(combiners.cols());
  const int nt = ofdm.n_symbols;
  const int nl = ofdm.n_subcarriers;

  SoundingRecord rec;
  rec.precoders = precoders;
  rec.combiners = combiners;
  rec.pilot = pilot;
  rec.ofdm = ofdm;
  rec.noise_power = noise_power;
  rec.received.assign(static_cast<size_t>(nt) * static_cast<size_t>(nl),
                      Eigen::MatrixXcd::Zero(nc, np));

  // Per-subcarrier beam-domain channel W^H H F, plus the timing-offset ramp.
  std::vector<Eigen::MatrixXcd> beam(static_cast<size_t>(nl));
  for (int sc = 0; sc < nl; ++sc) {
    const double f = ofdm.subcarrier_frequencies[static_cast<size_t>(sc)];
    const cd ramp = std::polar(1.0, 2.0 * kPi * f * timing_offset);
    beam[static_cast<size_t>(sc)] =
        ramp * (combiners.adjoint() * h.per_subcarrier[static_cast<size_t>(sc)] * precoders);
  }

  for (int t = 0; t < nt; ++t) {
    const cd s = pilot[static_cast<size_t>(t)];
    for (int sc = 0; sc < nl; ++sc) {
      rec.received[static_cast<size_t>(t) * static_cast<size_t>(nl) +
                   static_cast<size_t>(sc)] = beam[static_cast<size_t>(sc)] * s;
    }
  }

  if (noise_power > 0.0) {
    const double sigma = std::sqrt(0.5 * noise_power);
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < nc; ++j) {
        std::mt19937_64 rng(
            mix_seed(rng_seed, static_cast<std::uint64_t>(i) * 65536u +
                                   static_cast<std::uint64_t>(j)));
        std::normal_distribution<double> gauss(0.0, sigma);
        for (int t = 0; t < nt; ++t) {
          for (int sc = 0; sc < nl; ++sc) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            rec.received[static_cast<size_t>(t) * static_cast<size_t>(nl) +
                         static_cast<size_t>(sc)](j, i) += cd(re, im);
          }
        }
      }
    }
  }
  return rec;
}

namespace {

void check_unitary(const Eigen::MatrixXcd& u, const char* name) {
  const Eigen::MatrixXcd gram = u.adjoint() * u;
  const double dev = (gram - Eigen::MatrixXcd::Identity(u.cols(), u.cols()))
                         .cwiseAbs()
                         .maxCoeff();
  if (dev > 1e-6) {
    throw SignalError(std::string("recover_signal_matrix: non-unitary codebook ") + name);
  }
}

}  // namespace

SignalMatrixSeries recover_signal_matrix(const SoundingRecord& record) {
  if (record.precoders.rows() != record.precoders.cols() ||
      record.combiners.rows() != record.combiners.cols()) {
    throw SignalError("recover_signal_matrix: codebooks must be square");
  }
  check_unitary(record.precoders, "F");
  check_unitary(record.combiners, "W");

  SignalMatrixSeries out;
  out.n_rx = static_cast<int>(record.combiners.rows());
  out.n_tx = static_cast<int>(record.precoders.rows());
  out.n_subcarriers = record.ofdm.n_subcarriers;
  out.n_symbols = record.ofdm.n_symbols;
  out.pilot = record.pilot;
  out.mats.resize(record.received.size());

  const Eigen::MatrixXcd fh = record.precoders.adjoint();
  for (size_t idx = 0; idx < record.received.size(); ++idx) {
    // Y has combiners on rows and precoders on columns; undo both sweeps.
    out.mats[idx] = record.combiners * record.received[idx] * fh;
  }
  return out;
}

SignalMatrixSeries recover_rx_vector_series(const SoundingRecord& record) {
  if (record.precoders.cols() != 1) {
    throw SignalError("recover_rx_vector_series: record is not a broadcast sounding");
  }
  check_unitary(record.combiners, "W");

  SignalMatrixSeries out;
  out.n_rx = static_cast<int>(record.combiners.rows());
  out.n_tx = 1;
  out.n_subcarriers = record.ofdm.n_subcarriers;
  out.n_symbols = record.ofdm.n_symbols;
  out.pilot = record.pilot;
  out.mats.resize(record.received.size());
  for (size_t idx = 0; idx < record.received.size(); ++idx) {
    out.mats[idx] = record.combiners * record.received[idx];
  }
  return out;
}

}  // namespace mmsense
