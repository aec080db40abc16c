#include "mmsense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmsense {

namespace fs = std::filesystem;

double wavelength_of(const Scenario& sc) {
  return kSpeedOfLight / sc.ofdm.center_frequency();
}

ArrayConfig belief_array(const ArrayConfig& truth, double wavelength) {
  ArrayConfig b = make_array(truth.n_elements, wavelength);
  b.spacing = truth.spacing;
  return b;
}

double noise_power_for(const std::vector<PropagationPath>& paths, const Scenario& sc,
                       bool broadcast) {
  double strongest = 0.0;
  for (const PropagationPath& p : paths) strongest = std::max(strongest, std::abs(p.gain));
  // Same matched-beamforming reference for both sounding modes: the periodic
  // broadcast sweep attains the full array power over time.
  (void)broadcast;
  const double array_gain =
      static_cast<double>(sc.rx_array.n_elements) * sc.tx_array.n_elements;
  return strongest * strongest * array_gain * std::pow(10.0, -sc.snr_db / 10.0);
}

SoundingRecord simulate_point(const Scenario& sc, const Point2& rx, std::uint64_t seed) {
  const double lambda = wavelength_of(sc);
  const std::vector<PropagationPath> paths =
      trace_paths(sc.layout, rx, sc.estimator.max_order, lambda);
  if (paths.empty()) throw StageError("simulate", "no propagation path reaches the point");

  ArrayConfig tx = sc.tx_array;
  ArrayConfig rx_arr = sc.rx_array;
  tx.wavelength = lambda;
  rx_arr.wavelength = lambda;

  const ChannelMatrix h = synthesize_channel(paths, tx, rx_arr, sc.ofdm);
  const Eigen::MatrixXcd f = unitary_codebook(tx.n_elements);
  const Eigen::MatrixXcd w = unitary_codebook(rx_arr.n_elements);
  const std::vector<cd> pilot = make_pilot(sc.ofdm.n_symbols, seed);
  const double noise = noise_power_for(paths, sc, false);
  return sound_channel(h, f, w, sc.ofdm, pilot, noise, sc.timing_offset, seed);
}

SubcarrierPhases simulate_reference_phases(const Scenario& sc, double distance,
                                           std::uint64_t seed) {
  Scenario ref = sc;
  ref.layout.walls.clear();  // free-space rig at a known distance
  const SoundingRecord rec = simulate_point(ref, {distance, 0.0}, seed);
  const SignalMatrixSeries series = recover_signal_matrix(rec);

  const double lambda = wavelength_of(sc);
  const ArrayConfig tx = belief_array(sc.tx_array, lambda);
  const ArrayConfig rx = belief_array(sc.rx_array, lambda);
  // Known rig geometry: boresight on both sides in the principal domain.
  const NullBeamformers bf = null_beamformers({0.0}, {0.0}, 0, tx, rx);
  const SeparatedSignal sep = separate_path_signal(series, bf);
  return extract_subcarrier_phases(sep, rec.pilot, rec.ofdm);
}

PointEstimate estimate_point(const Scenario& sc, const SoundingRecord& record, int point_id,
                             const SubcarrierPhases* reference) {
  const double lambda = wavelength_of(sc);
  const ArrayConfig tx = belief_array(sc.tx_array, lambda);
  const ArrayConfig rx = belief_array(sc.rx_array, lambda);
  const EstimatorParams& est = sc.estimator;

  const SignalMatrixSeries series = recover_signal_matrix(record);
  const Eigen::MatrixXcd r =
      smoothed_covariance(series, record.ofdm.center_index(), est.smoothing);
  const long snapshots = smoothing_snapshots(series, est.smoothing);
  const int k = estimate_order(r, snapshots, est.order);
  const MusicSpectrum spec = music_spectrum(r, k, est.smoothing, tx, rx, est.scan);
  const PeakExtraction peaks = extract_peaks(spec, k);

  PointEstimate out;
  out.point_id = point_id;
  out.k_detected = k;
  out.paths = peaks.peaks;
  out.peak_warning = peaks.underfound;

  std::vector<double> aods, aoas;
  for (const PathEstimate& p : out.paths) {
    aods.push_back(p.aod);
    aoas.push_back(p.aoa);
  }
  for (size_t i = 0; i < out.paths.size(); ++i) {
    try {
      const NullBeamformers bf =
          null_beamformers(aods, aoas, static_cast<int>(i), tx, rx);
      const SeparatedSignal sep = separate_path_signal(series, bf);
      const SubcarrierPhases ph = extract_subcarrier_phases(sep, record.pilot, record.ofdm);
      const RangeEstimate range =
          reference && est.reference_distance > 0.0
              ? estimate_range_calibrated(ph, *reference, est.reference_distance,
                                          est.range_max, est.range_grid)
              : estimate_range(ph, est.range_max, est.range_grid);
      out.paths[i].length = range.length;
    } catch (const RangingError&) {
      out.paths[i].length.reset();  // ill-conditioned separation, drop the length
    }
  }

  out.report.point_id = point_id;
  for (const PathEstimate& p : out.paths) {
    if (!p.length.has_value()) continue;
    PathTriple t;
    t.aod = p.aod;                       // departure: forward half-plane
    t.aoa = wrap_angle(kPi - p.aoa);     // arrival: source behind the receiver
    t.length = *p.length;
    out.report.paths.push_back(t);
    out.peak_values.push_back(p.spectrum_value);
  }
  return out;
}

AoAProfile measure_aoa_profile(const Scenario& sc, const Point2& pos, std::uint64_t seed) {
  const double lambda = wavelength_of(sc);
  const std::vector<PropagationPath> paths =
      trace_paths(sc.layout, pos, sc.estimator.max_order, lambda);
  if (paths.empty()) throw StageError("localize", "no propagation path reaches the position");

  ArrayConfig tx = sc.tx_array;
  ArrayConfig rx = sc.rx_array;
  tx.wavelength = lambda;
  rx.wavelength = lambda;

  const ChannelMatrix h = synthesize_channel(paths, tx, rx, sc.ofdm);
  Eigen::MatrixXcd broadcast = Eigen::MatrixXcd::Zero(tx.n_elements, 1);
  broadcast(0, 0) = 1.0;  // single-element transmit: equal weight to every path
  const Eigen::MatrixXcd w = unitary_codebook(rx.n_elements);
  const std::vector<cd> pilot = make_pilot(sc.ofdm.n_symbols, seed);
  const double noise = noise_power_for(paths, sc, true);
  const SoundingRecord rec =
      sound_channel(h, broadcast, w, sc.ofdm, pilot, noise, sc.timing_offset, seed);

  const SignalMatrixSeries series = recover_rx_vector_series(rec);
  const int sub_rx = sc.estimator.aoa_sub_rx;
  const Eigen::MatrixXcd r =
      smoothed_covariance_1d(series, rec.ofdm.center_index(), sub_rx);
  const int k = estimate_order(r, smoothing_snapshots_1d(series, sub_rx),
                               sc.estimator.aoa_order);
  const ArrayConfig rx_belief = belief_array(sc.rx_array, lambda);
  const AoaSpectrum spec = music_spectrum_1d(r, k, sub_rx, rx_belief, sc.estimator.scan);
  const PeakExtraction peaks = extract_peaks_1d(spec, k);

  AoAProfile profile;
  for (const PathEstimate& p : peaks.peaks) {
    profile.angles.push_back(wrap_angle(kPi - p.aoa));  // sources behind the receiver
  }
  return profile;
}

namespace {

std::vector<Wall> walls_as_segments(const std::vector<WallEstimate>& walls,
                                    double extend) {
  std::vector<Wall> out;
  for (const WallEstimate& w : walls) {
    const Point2 t = (w.extent_b - w.extent_a).normalized();
    out.push_back({w.extent_a - t * extend, w.extent_b + t * extend, 10.0});
  }
  return out;
}

void score_against_truth(const Scenario& sc, PipelineResult& res) {
  const double lambda = wavelength_of(sc);
  std::vector<double> aoa_err, aod_err, aoa_err_los, aoa_err_nlos, aod_err_los, aod_err_nlos;
  std::vector<double> range_los, range_nlos, point_err, refl_err;

  for (size_t ei = 0; ei < res.estimates.size(); ++ei) {
    const PointEstimate& pe = res.estimates[ei];
    const Point2 truth_pos = sc.measurement_points[static_cast<size_t>(pe.point_id)];
    const std::vector<PropagationPath> truth =
        trace_paths(sc.layout, truth_pos, sc.estimator.max_order, lambda);
    const std::vector<MatchedPath> matched = match_paths_principal(pe.paths, truth);

    for (const MatchedPath& m : matched) {
      const PathEstimate& e = pe.paths[static_cast<size_t>(m.estimate_index)];
      const PropagationPath& t = truth[static_cast<size_t>(m.truth_index)];
      const double da = rad2deg(std::abs(e.aoa - principal_angle(t.aoa)));
      const double dd = rad2deg(std::abs(e.aod - principal_angle(t.aod)));
      aoa_err.push_back(da);
      aod_err.push_back(dd);
      (t.order == 0 ? aoa_err_los : aoa_err_nlos).push_back(da);
      (t.order == 0 ? aod_err_los : aod_err_nlos).push_back(dd);
      if (e.length.has_value()) {
        (t.order == 0 ? range_los : range_nlos).push_back(std::abs(*e.length - t.length));
      }
    }

    if (ei < res.recon.points.size() && res.recon.points[ei].has_value()) {
      point_err.push_back(distance(res.recon.points[ei]->position, truth_pos));

      // Reflection points: pair the estimated first-order paths with truth.
      for (const MatchedPath& m : matched) {
        const PropagationPath& t = truth[static_cast<size_t>(m.truth_index)];
        if (t.order != 1) continue;
        // Locate this path inside the flat reflection arrays.
        // Report paths follow pe.paths order, minus entries without length.
        int report_path = -1, seen = 0;
        for (size_t pi = 0; pi <= static_cast<size_t>(m.estimate_index); ++pi) {
          if (pe.paths[pi].length.has_value()) {
            if (pi == static_cast<size_t>(m.estimate_index)) report_path = seen;
            ++seen;
          }
        }
        if (report_path < 0) continue;
        for (size_t fi = 0; fi < res.recon.reflection_points_flat.size(); ++fi) {
          if (res.recon.reflection_owner_report[fi] == static_cast<int>(ei) &&
              res.recon.reflection_owner_path[fi] == report_path &&
              res.recon.reflection_points_flat[fi].has_value()) {
            refl_err.push_back(
                distance(*res.recon.reflection_points_flat[fi], t.reflection_points[0]));
          }
        }
      }
    }
  }

  std::vector<double> loc_err;
  for (const EvalLocalization& l : res.localizations) loc_err.push_back(l.error);

  res.metrics.add_samples("aoa_error_deg", aoa_err);
  res.metrics.add_samples("aod_error_deg", aod_err);
  res.metrics.add_samples("aoa_error_deg_los", aoa_err_los);
  res.metrics.add_samples("aoa_error_deg_nlos", aoa_err_nlos);
  res.metrics.add_samples("aod_error_deg_los", aod_err_los);
  res.metrics.add_samples("aod_error_deg_nlos", aod_err_nlos);
  res.metrics.add_samples("range_error_m_los", range_los);
  res.metrics.add_samples("range_error_m_nlos", range_nlos);
  res.metrics.add_samples("point_error_m", point_err);
  res.metrics.add_samples("reflection_error_m", refl_err);
  res.metrics.add_samples("aoa_loc_error_m", loc_err);
}

}  // namespace

std::vector<MatchedPath> match_paths_principal(const std::vector<PathEstimate>& estimates,
                                               const std::vector<PropagationPath>& truth,
                                               double gate_deg) {
  struct Pair {
    double d;
    int e, t;
  };
  std::vector<Pair> pairs;
  for (int e = 0; e < static_cast<int>(estimates.size()); ++e) {
    for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
      const double da =
          rad2deg(std::abs(estimates[static_cast<size_t>(e)].aoa -
                           principal_angle(truth[static_cast<size_t>(t)].aoa)));
      const double dd =
          rad2deg(std::abs(estimates[static_cast<size_t>(e)].aod -
                           principal_angle(truth[static_cast<size_t>(t)].aod)));
      const double d = std::max(da, dd);
      if (d <= gate_deg) pairs.push_back({d, e, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.e != b.e) return a.e < b.e;
    return a.t < b.t;
  });
  std::vector<bool> e_used(estimates.size()), t_used(truth.size());
  std::vector<MatchedPath> out;
  for (const Pair& p : pairs) {
    if (e_used[static_cast<size_t>(p.e)] || t_used[static_cast<size_t>(p.t)]) continue;
    e_used[static_cast<size_t>(p.e)] = true;
    t_used[static_cast<size_t>(p.t)] = true;
    out.push_back({p.e, p.t});
  }
  return out;
}

PipelineResult run_pipeline(const Scenario& sc, const RunOptions& opts) {
  PipelineResult res;
  res.scenario_name = sc.name;
  res.seed = opts.seed_override.value_or(sc.seed);

  SubcarrierPhases reference;
  const bool use_reference = sc.estimator.reference_distance > 0.0;
  if (use_reference) {
    reference = simulate_reference_phases(sc, sc.estimator.reference_distance,
                                          mix_seed(res.seed, 0x5EFULL));
  }

  std::vector<MeasurementReport> reports;
  std::vector<std::vector<double>> peak_values;
  for (size_t i = 0; i < sc.measurement_points.size(); ++i) {
    const std::uint64_t point_seed = mix_seed(res.seed, 1000 + i);
    try {
      SoundingRecord rec = simulate_point(sc, sc.measurement_points[i], point_seed);
      PointEstimate pe = estimate_point(sc, rec, static_cast<int>(i),
                                        use_reference ? &reference : nullptr);
      reports.push_back(pe.report);
      peak_values.push_back(pe.peak_values);
      res.estimates.push_back(std::move(pe));
      if (opts.keep_records) res.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "point " << i << ": " << e.what();
      res.warnings.push_back(os.str());
    }
  }

  res.recon = reconstruct(reports, sc.estimator.recon);
  for (const std::string& w : res.recon.warnings) res.warnings.push_back(w);

  if (opts.run_localization && !sc.eval_positions.empty() && !res.recon.walls.empty()) {
    const std::vector<Wall> walls = walls_as_segments(res.recon.walls, 0.0);
    std::vector<Point2> anchors;
    for (const auto& lp : res.recon.points) {
      if (lp.has_value()) anchors.push_back(lp->position);
    }
    const double slack = sc.estimator.loc_extent_margin;
    const CandidateGrid grid =
        make_candidate_grid(walls, sc.estimator.grid_spacing, 0.1, anchors, 1.0, slack);
    if (!grid.positions.empty()) {
      for (size_t j = 0; j < sc.eval_positions.size(); ++j) {
        try {
          const AoAProfile measured =
              measure_aoa_profile(sc, sc.eval_positions[j], mix_seed(res.seed, 2000 + j));
          const LocalizationResult lr = localize_on_grid(
              measured, grid, walls, deg2rad(sc.estimator.a_th_deg), slack);
          EvalLocalization ev;
          ev.truth = sc.eval_positions[j];
          ev.estimate = lr.position;
          ev.error = distance(ev.truth, ev.estimate);
          res.localizations.push_back(ev);
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "eval position " << j << ": " << e.what();
          res.warnings.push_back(os.str());
        }
      }
    }
  }

  if (opts.collect_metrics) score_against_truth(sc, res);
  return res;
}

void write_run_artifacts(const PipelineResult& result, const Scenario& sc,
                         const std::string& out_dir, bool write_records) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;

  const auto emit = [&](const std::string& name) { files.push_back(name); };

  save_scenario(sc, out_dir + "/scenario.json");
  emit("scenario.json");

  std::vector<MeasurementReport> reports;
  std::vector<std::vector<double>> peaks;
  for (const PointEstimate& pe : result.estimates) {
    reports.push_back(pe.report);
    peaks.push_back(pe.peak_values);
  }
  save_reports_csv(reports, peaks, out_dir + "/reports.csv");
  emit("reports.csv");

  save_reconstruction_json(result.recon, out_dir + "/reconstruction.json");
  emit("reconstruction.json");
  save_walls_csv(result.recon.walls, out_dir + "/walls.csv");
  emit("walls.csv");

  write_metrics_csv(result.metrics, out_dir + "/metrics.csv");
  emit("metrics.csv");
  write_metrics_summary_csv(result.metrics, out_dir + "/metrics_summary.csv");
  emit("metrics_summary.csv");

  {
    std::ofstream os(out_dir + "/localization.csv");
    os.precision(17);
    os << "truth_x,truth_y,estimate_x,estimate_y,error_m\n";
    for (const EvalLocalization& l : result.localizations) {
      os << l.truth.x << ',' << l.truth.y << ',' << l.estimate.x << ',' << l.estimate.y << ','
         << l.error << '\n';
    }
    emit("localization.csv");
  }

  if (write_records && !result.records.empty()) {
    fs::create_directories(out_dir + "/records");
    for (size_t i = 0; i < result.records.size(); ++i) {
      std::ostringstream name;
      name << "records/point_" << i << ".json";
      save_sounding_record(result.records[i], out_dir + "/" + name.str());
      emit(name.str());
    }
  }

  {
    std::ofstream os(out_dir + "/warnings.txt");
    for (const std::string& w : result.warnings) os << w << '\n';
    emit("warnings.txt");
  }

  nlohmann::json manifest;
  manifest["scenario"] = result.scenario_name;
  manifest["seed"] = result.seed;
  nlohmann::json entries = nlohmann::json::array();
  for (const std::string& f : files) {
    const std::string full = out_dir + "/" + f;
    nlohmann::json e;
    e["path"] = f;
    e["bytes"] = fs::file_size(full);
    std::ostringstream hash;
    hash << std::hex << fnv1a64_file(full);
    e["fnv1a64"] = hash.str();
    entries.push_back(e);
  }
  manifest["files"] = entries;
  std::ofstream os(out_dir + "/manifest.json");
  os << manifest.dump(2) << "\n";
}

SweepResult monte_carlo(const Scenario& sc, int n_trials,
                        const std::vector<double>& snr_sweep_db) {
  if (n_trials < 1) throw StageError("monte_carlo", "need at least one trial");
  SweepResult sweep;
  sweep.snr_db = snr_sweep_db.empty() ? std::vector<double>{sc.snr_db} : snr_sweep_db;

  for (double snr : sweep.snr_db) {
    Scenario cfg = sc;
    cfg.snr_db = snr;
    std::vector<MetricsReport> per_trial(static_cast<size_t>(n_trials));

#pragma omp parallel for schedule(dynamic)
    for (int trial = 0; trial < n_trials; ++trial) {
      RunOptions opts;
      opts.keep_records = false;
      opts.collect_metrics = true;
      opts.seed_override = mix_seed(sc.seed, 0xA0000000ULL + static_cast<std::uint64_t>(trial));
      const PipelineResult r = run_pipeline(cfg, opts);
      per_trial[static_cast<size_t>(trial)] = r.metrics;
    }

    MetricsReport agg;
    for (const MetricsReport& m : per_trial) {
      for (const auto& [name, table] : m.tables) agg.add_samples(name, table.value);
    }
    sweep.reports.push_back(std::move(agg));
  }
  return sweep;
}

}  // namespace mmsense
