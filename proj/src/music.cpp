#include "mmsense/music.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mmsense {

namespace {
constexpr double kDenFloor = 1e-30;
}  // namespace

std::vector<double> ScanGrid::angles_deg() const {
  std::vector<double> out;
  const int n = static_cast<int>(std::lround((max_deg - min_deg) / step_deg)) + 1;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(min_deg + step_deg * i);
  return out;
}

Eigen::MatrixXcd smoothed_covariance(const SignalMatrixSeries& s, int subcarrier,
                                     const SmoothingConfig& cfg) {
  const int nt = s.n_tx, nr = s.n_rx;
  if (cfg.sub_tx < 2 || cfg.sub_tx > nt || cfg.sub_rx < 2 || cfg.sub_rx > nr) {
    throw EstimationError("smoothed_covariance: subarray larger than array");
  }
  if (s.n_symbols < 1) throw EstimationError("smoothed_covariance: no symbols");

  const int mt = nt - cfg.sub_tx + 1;
  const int mr = nr - cfg.sub_rx + 1;
  const int full = nr * nt;
  const int sub = cfg.sub_rx * cfg.sub_tx;
  const int t_count = s.n_symbols;

  // Covariance of the fully vectorized S[t]; every subarray covariance is a
  // contiguous gather from it, which avoids the per-shift outer products.
  Eigen::MatrixXcd x(full, t_count);
  for (int t = 0; t < t_count; ++t) {
    const Eigen::MatrixXcd& m = s.at(t, subcarrier);
    for (int r = 0; r < nr; ++r) {
      for (int c = 0; c < nt; ++c) {
        x(r * nt + c, t) = m(r, c);
      }
    }
  }
  const Eigen::MatrixXcd r_full = (x * x.adjoint()) / static_cast<double>(t_count);

  Eigen::MatrixXcd r_ss = Eigen::MatrixXcd::Zero(sub, sub);
  std::vector<int> map(static_cast<size_t>(sub));
  for (int j0 = 0; j0 < mr; ++j0) {
    for (int i0 = 0; i0 < mt; ++i0) {
      for (int r = 0; r < cfg.sub_rx; ++r) {
        for (int c = 0; c < cfg.sub_tx; ++c) {
          map[static_cast<size_t>(r * cfg.sub_tx + c)] = (r + j0) * nt + (c + i0);
        }
      }
      for (int q1 = 0; q1 < sub; ++q1) {
        for (int q2 = 0; q2 < sub; ++q2) {
          r_ss(q1, q2) += r_full(map[static_cast<size_t>(q1)], map[static_cast<size_t>(q2)]);
        }
      }
    }
  }
  r_ss /= static_cast<double>(mt * mr);
  return 0.5 * (r_ss + r_ss.adjoint().eval());
}

long smoothing_snapshots(const SignalMatrixSeries& s, const SmoothingConfig& cfg) {
  const long mt = s.n_tx - cfg.sub_tx + 1;
  const long mr = s.n_rx - cfg.sub_rx + 1;
  return static_cast<long>(s.n_symbols) * mt * mr;
}

namespace {

Eigen::VectorXd sorted_eigenvalues_desc(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>& es) {
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  return ev.reverse();
}

}  // namespace

int estimate_order(const Eigen::MatrixXcd& r, long n_snapshots, const OrderSelection& sel) {
  const int m = static_cast<int>(r.rows());
  if (sel.mode == OrderMode::kFixed) {
    return std::clamp(sel.fixed_k, 1, m - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (r + r.adjoint().eval()),
                                                     Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues().reverse();
  const double peak = ev.maxCoeff();
  if (!(peak > 0.0)) throw EstimationError("estimate_order: no signal (all-zero matrix)");

  const double floor = std::max(peak * 1e-15, 1e-300);
  for (int i = 0; i < m; ++i) ev(i) = std::max(ev(i), floor);

  const double n = static_cast<double>(std::max<long>(n_snapshots, 1));
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < m; ++k) {
    const int rem = m - k;
    double log_sum = 0.0, sum = 0.0;
    for (int i = k; i < m; ++i) {
      log_sum += std::log(ev(i));
      sum += ev(i);
    }
    const double log_am = std::log(sum / rem);
    const double log_gm = log_sum / rem;
    const double fit = n * rem * (log_am - log_gm);  // >= 0
    const double dof = static_cast<double>(k) * (2.0 * m - k);
    const double score = sel.mode == OrderMode::kAic ? 2.0 * fit + 2.0 * dof
                                                     : fit + 0.5 * dof * std::log(n);
    if (score < best) {
      best = score;
      best_k = k;
    }
  }
  return std::clamp(best_k, std::max(sel.k_min, 1), m - 1);
}

namespace {

struct Subspaces {
  Eigen::MatrixXcd signal;  // M x K
  Eigen::MatrixXcd noise;   // M x (M-K)
};

Subspaces split_subspaces(const Eigen::MatrixXcd& r, int k) {
  const int m = static_cast<int>(r.rows());
  if (k < 1 || k >= m) throw EstimationError("music_spectrum: invalid source count");
  Eigen::MatrixXcd rh = 0.5 * (r + r.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rh);
  if (es.info() != Eigen::Success) {
    throw EstimationError("music_spectrum: eigendecomposition failed");
  }
  Subspaces out;
  out.noise = es.eigenvectors().leftCols(m - k);   // ascending order
  out.signal = es.eigenvectors().rightCols(k);
  return out;
}

// Scan responses for every grid angle: row i is the (sub-length) response at
// angle i. Receive rows are plain responses, transmit rows are conjugated.
Eigen::MatrixXcd response_rows(const ArrayConfig& array, const std::vector<double>& deg,
                               int sub_len, bool conjugate) {
  Eigen::MatrixXcd out(static_cast<int>(deg.size()), sub_len);
  for (int i = 0; i < static_cast<int>(deg.size()); ++i) {
    Eigen::VectorXcd v = array_response(array, deg2rad(deg[static_cast<size_t>(i)]), sub_len);
    if (conjugate) v = v.conjugate().eval();
    out.row(i) = v.transpose();
  }
  return out;
}

}  // namespace

MusicSpectrum music_spectrum_serial(const Eigen::MatrixXcd& r, int k,
                                    const SmoothingConfig& cfg, const ArrayConfig& tx_array,
                                    const ArrayConfig& rx_array, const ScanGrid& grid) {
  const Subspaces sub = split_subspaces(r, k);
  const Eigen::MatrixXcd en_h = sub.noise.adjoint();

  MusicSpectrum spec;
  spec.aoa_deg = grid.angles_deg();
  spec.aod_deg = grid.angles_deg();
  spec.value.resize(static_cast<int>(spec.aoa_deg.size()),
                    static_cast<int>(spec.aod_deg.size()));

  Eigen::VectorXcd v(cfg.sub_rx * cfg.sub_tx);
  for (int i = 0; i < static_cast<int>(spec.aoa_deg.size()); ++i) {
    const Eigen::VectorXcd ar =
        array_response(rx_array, deg2rad(spec.aoa_deg[static_cast<size_t>(i)]), cfg.sub_rx);
    for (int j = 0; j < static_cast<int>(spec.aod_deg.size()); ++j) {
      const Eigen::VectorXcd at =
          array_response(tx_array, deg2rad(spec.aod_deg[static_cast<size_t>(j)]), cfg.sub_tx);
      for (int rr = 0; rr < cfg.sub_rx; ++rr) {
        for (int cc = 0; cc < cfg.sub_tx; ++cc) {
          v(rr * cfg.sub_tx + cc) = ar(rr) * std::conj(at(cc));
        }
      }
      const double den = (en_h * v).squaredNorm();
      spec.value(i, j) = 1.0 / std::max(den, kDenFloor);
    }
  }
  return spec;
}

MusicSpectrum music_spectrum(const Eigen::MatrixXcd& r, int k, const SmoothingConfig& cfg,
                             const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                             const ScanGrid& grid) {
  const Subspaces sub = split_subspaces(r, k);
  const int m = cfg.sub_rx * cfg.sub_tx;

  MusicSpectrum spec;
  spec.aoa_deg = grid.angles_deg();
  spec.aod_deg = grid.angles_deg();
  const int n_aoa = static_cast<int>(spec.aoa_deg.size());
  const int n_aod = static_cast<int>(spec.aod_deg.size());
  spec.value.resize(n_aoa, n_aod);

  // Complement form: |En^H v|^2 = M - |Es^H v|^2 for unit-modulus v entries,
  // with the signal projection evaluated separably per source column.
  const Eigen::MatrixXcd ar = response_rows(rx_array, spec.aoa_deg, cfg.sub_rx, false);
  const Eigen::MatrixXcd ct = response_rows(tx_array, spec.aod_deg, cfg.sub_tx, true);

  std::vector<Eigen::MatrixXcd> g_conj(static_cast<size_t>(k));
  for (int s = 0; s < k; ++s) {
    Eigen::MatrixXcd g(cfg.sub_rx, cfg.sub_tx);
    for (int rr = 0; rr < cfg.sub_rx; ++rr) {
      for (int cc = 0; cc < cfg.sub_tx; ++cc) {
        g(rr, cc) = sub.signal(rr * cfg.sub_tx + cc, s);
      }
    }
    g_conj[static_cast<size_t>(s)] = g.conjugate();
  }

#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_aod; ++j) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_aoa);
    for (int s = 0; s < k; ++s) {
      const Eigen::VectorXcd w = g_conj[static_cast<size_t>(s)] * ct.row(j).transpose();
      const Eigen::VectorXcd proj = ar * w;  // a_R(phi)^T w per grid row
      acc += proj.cwiseAbs2();
    }
    for (int i = 0; i < n_aoa; ++i) {
      spec.value(i, j) = 1.0 / std::max(static_cast<double>(m) - acc(i), kDenFloor);
    }
  }
  return spec;
}

namespace {

double refine_axis(double d_minus, double d_0, double d_plus) {
  const double denom = d_minus - 2.0 * d_0 + d_plus;
  if (denom <= 0.0) return 0.0;
  return std::clamp(0.5 * (d_minus - d_plus) / denom, -0.5, 0.5);
}

}  // namespace

PeakExtraction extract_peaks(const MusicSpectrum& spec, int k) {
  if (k < 1) throw EstimationError("extract_peaks: k must be positive");
  const int ni = static_cast<int>(spec.aoa_deg.size());
  const int nj = static_cast<int>(spec.aod_deg.size());

  struct RawPeak {
    int i, j;
    double value;
  };
  std::vector<RawPeak> raw;
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < nj; ++j) {
      const double v = spec.value(i, j);
      bool is_max = true;
      for (int di = -1; di <= 1 && is_max; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= ni || jj < 0 || jj >= nj) continue;
          if (spec.value(ii, jj) >= v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) raw.push_back({i, j, v});
    }
  }
  std::sort(raw.begin(), raw.end(), [](const RawPeak& a, const RawPeak& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });

  // Merge peaks within one grid step of a stronger one.
  std::vector<RawPeak> kept;
  for (const RawPeak& p : raw) {
    bool near = false;
    for (const RawPeak& q : kept) {
      if (std::abs(p.i - q.i) <= 1 && std::abs(p.j - q.j) <= 1) {
        near = true;
        break;
      }
    }
    if (!near) kept.push_back(p);
  }

  PeakExtraction out;
  out.underfound = static_cast<int>(kept.size()) < k;
  const int take = std::min<int>(k, static_cast<int>(kept.size()));
  const double step = ni > 1 ? spec.aoa_deg[1] - spec.aoa_deg[0] : 1.0;

  for (int p = 0; p < take; ++p) {
    const RawPeak& rp = kept[static_cast<size_t>(p)];
    double di = 0.0, dj = 0.0;
    const double d0 = 1.0 / rp.value;
    if (rp.i > 0 && rp.i + 1 < ni) {
      di = refine_axis(1.0 / spec.value(rp.i - 1, rp.j), d0, 1.0 / spec.value(rp.i + 1, rp.j));
    }
    if (rp.j > 0 && rp.j + 1 < nj) {
      dj = refine_axis(1.0 / spec.value(rp.i, rp.j - 1), d0, 1.0 / spec.value(rp.i, rp.j + 1));
    }
    PathEstimate est;
    est.aoa = deg2rad(spec.aoa_deg[static_cast<size_t>(rp.i)] + di * step);
    est.aod = deg2rad(spec.aod_deg[static_cast<size_t>(rp.j)] + dj * step);
    est.spectrum_value = rp.value;
    out.peaks.push_back(est);
  }
  return out;
}

Eigen::MatrixXcd smoothed_covariance_1d(const SignalMatrixSeries& s, int subcarrier,
                                        int sub_rx) {
  if (s.n_tx != 1) throw EstimationError("smoothed_covariance_1d: expected broadcast series");
  if (sub_rx < 2 || sub_rx > s.n_rx) {
    throw EstimationError("smoothed_covariance_1d: subarray larger than array");
  }
  const int mr = s.n_rx - sub_rx + 1;
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(sub_rx, sub_rx);
  for (int t = 0; t < s.n_symbols; ++t) {
    const Eigen::MatrixXcd& m = s.at(t, subcarrier);
    for (int j0 = 0; j0 < mr; ++j0) {
      const Eigen::VectorXcd v = m.col(0).segment(j0, sub_rx);
      r += v * v.adjoint();
    }
  }
  r /= static_cast<double>(s.n_symbols * mr);
  return 0.5 * (r + r.adjoint().eval());
}

long smoothing_snapshots_1d(const SignalMatrixSeries& s, int sub_rx) {
  return static_cast<long>(s.n_symbols) * (s.n_rx - sub_rx + 1);
}

AoaSpectrum music_spectrum_1d(const Eigen::MatrixXcd& r, int k, int sub_rx,
                              const ArrayConfig& rx_array, const ScanGrid& grid) {
  const int m = static_cast<int>(r.rows());
  if (m != sub_rx) throw EstimationError("music_spectrum_1d: size mismatch");
  const Subspaces sub = split_subspaces(r, k);
  const Eigen::MatrixXcd en_h = sub.noise.adjoint();

  AoaSpectrum spec;
  spec.aoa_deg = grid.angles_deg();
  spec.value.resize(spec.aoa_deg.size());
  for (size_t i = 0; i < spec.aoa_deg.size(); ++i) {
    const Eigen::VectorXcd v = array_response(rx_array, deg2rad(spec.aoa_deg[i]), sub_rx);
    spec.value[i] = 1.0 / std::max((en_h * v).squaredNorm(), kDenFloor);
  }
  return spec;
}

PeakExtraction extract_peaks_1d(const AoaSpectrum& spec, int k) {
  if (k < 1) throw EstimationError("extract_peaks_1d: k must be positive");
  const int n = static_cast<int>(spec.aoa_deg.size());
  struct RawPeak {
    int i;
    double value;
  };
  std::vector<RawPeak> raw;
  for (int i = 0; i < n; ++i) {
    const double v = spec.value[static_cast<size_t>(i)];
    const bool left_ok = i == 0 || spec.value[static_cast<size_t>(i) - 1] < v;
    const bool right_ok = i == n - 1 || spec.value[static_cast<size_t>(i) + 1] < v;
    if (left_ok && right_ok && i > 0 && i < n - 1) raw.push_back({i, v});
  }
  std::sort(raw.begin(), raw.end(), [](const RawPeak& a, const RawPeak& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.i < b.i;
  });
  std::vector<RawPeak> kept;
  for (const RawPeak& p : raw) {
    bool near = false;
    for (const RawPeak& q : kept) {
      if (std::abs(p.i - q.i) <= 1) {
        near = true;
        break;
      }
    }
    if (!near) kept.push_back(p);
  }

  PeakExtraction out;
  out.underfound = static_cast<int>(kept.size()) < k;
  const int take = std::min<int>(k, static_cast<int>(kept.size()));
  const double step = n > 1 ? spec.aoa_deg[1] - spec.aoa_deg[0] : 1.0;
  for (int p = 0; p < take; ++p) {
    const RawPeak& rp = kept[static_cast<size_t>(p)];
    double di = 0.0;
    if (rp.i > 0 && rp.i + 1 < n) {
      di = refine_axis(1.0 / spec.value[static_cast<size_t>(rp.i) - 1], 1.0 / rp.value,
                       1.0 / spec.value[static_cast<size_t>(rp.i) + 1]);
    }
    PathEstimate est;
    est.aoa = deg2rad(spec.aoa_deg[static_cast<size_t>(rp.i)] + di * step);
    est.aod = 0.0;
    est.spectrum_value = rp.value;
    out.peaks.push_back(est);
  }
  return out;
}

void write_spectrum_csv(const MusicSpectrum& spec, const std::string& path) {
  std::ofstream os(path);
  os << "aoa_deg,aod_deg,value\n";
  os.precision(17);
  for (size_t i = 0; i < spec.aoa_deg.size(); ++i) {
    for (size_t j = 0; j < spec.aod_deg.size(); ++j) {
      os << spec.aoa_deg[i] << ',' << spec.aod_deg[j] << ','
         << spec.value(static_cast<int>(i), static_cast<int>(j)) << '\n';
    }
  }
}

}  // namespace mmsense
