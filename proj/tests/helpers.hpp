#pragma once

// Shared builders for estimation tests: synthetic paths and recovered signal
// series without going through scenario files.

#include <vector>

#include "mmsense/music.hpp"
#include "mmsense/signal.hpp"

namespace mmsense::testing {

inline PropagationPath path_at(double aod_deg, double aoa_deg, double length,
                               double gain_mag, double wavelength) {
  PropagationPath p;
  p.aod = deg2rad(aod_deg);
  p.aoa = deg2rad(aoa_deg);
  p.length = length;
  p.order = 1;
  p.gain = std::polar(gain_mag, -2.0 * kPi * length / wavelength);
  return p;
}

/// Beam-swept sounding of the given paths followed by signal-matrix recovery.
inline SignalMatrixSeries sounded_series(const std::vector<PropagationPath>& paths,
                                         const ArrayConfig& tx, const ArrayConfig& rx,
                                         const OfdmConfig& ofdm, double noise_power,
                                         std::uint64_t seed, double timing_offset = 0.0) {
  const ChannelMatrix h = synthesize_channel(paths, tx, rx, ofdm);
  const Eigen::MatrixXcd f = unitary_codebook(tx.n_elements);
  const Eigen::MatrixXcd w = unitary_codebook(rx.n_elements);
  const std::vector<cd> pilot = make_pilot(ofdm.n_symbols, seed);
  const SoundingRecord rec =
      sound_channel(h, f, w, ofdm, pilot, noise_power, timing_offset, seed);
  return recover_signal_matrix(rec);
}

/// True when some estimate lies within tol_deg of the (aoa, aod) pair.
inline bool has_estimate_near(const std::vector<PathEstimate>& peaks, double aoa_deg,
                              double aod_deg, double tol_deg) {
  for (const PathEstimate& p : peaks) {
    if (std::abs(rad2deg(p.aoa) - aoa_deg) <= tol_deg &&
        std::abs(rad2deg(p.aod) - aod_deg) <= tol_deg) {
      return true;
    }
  }
  return false;
}

}  // namespace mmsense::testing
