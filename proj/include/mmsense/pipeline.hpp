#pragma once

// Orchestration of the full chain: simulate -> estimate -> range ->
// reconstruct -> localize, with ground-truth scoring, Monte-Carlo sweeps and
// run-directory artifacts.
//
// Estimators report principal angles in the scan range; the deployment
// convention (transmitter at the back of the scene, receivers in front)
// resolves them to world frame: departure angles are taken as-is, arrival
// angles flip to pi - angle since the sources sit behind the receiver.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmsense/aoa_localization.hpp"
#include "mmsense/calibration.hpp"
#include "mmsense/metrics.hpp"
#include "mmsense/ranging.hpp"
#include "mmsense/scenario.hpp"

namespace mmsense {

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PointEstimate {
  int point_id = 0;
  int k_detected = 0;
  std::vector<PathEstimate> paths;  // principal angles, lengths filled by ranging
  MeasurementReport report;         // world-frame triples, same path order
  std::vector<double> peak_values;
  bool peak_warning = false;
};

struct EvalLocalization {
  Point2 truth;
  Point2 estimate;
  double error = 0.0;
};

struct PipelineResult {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::vector<SoundingRecord> records;  // kept only when requested
  std::vector<PointEstimate> estimates;
  ReconstructionResult recon;
  std::vector<EvalLocalization> localizations;
  MetricsReport metrics;
  std::vector<std::string> warnings;
};

struct RunOptions {
  bool keep_records = false;
  bool collect_metrics = true;
  bool run_localization = true;
  std::optional<std::uint64_t> seed_override;
};

double wavelength_of(const Scenario& sc);

/// Nominal error-free array the estimators believe in.
ArrayConfig belief_array(const ArrayConfig& truth, double wavelength);

/// Per-sample noise power for the configured SNR, referenced to the strongest
/// path's power under matched beamforming on both arrays (or the receive
/// array alone for broadcast soundings).
double noise_power_for(const std::vector<PropagationPath>& paths, const Scenario& sc,
                       bool broadcast);

/// Beam-swept sounding of one measurement point over the traced channel.
SoundingRecord simulate_point(const Scenario& sc, const Point2& rx, std::uint64_t seed);

/// Reference delay phases measured at a known direct-path distance with the
/// same timing offset; used by reference-calibrated ranging.
SubcarrierPhases simulate_reference_phases(const Scenario& sc, double distance,
                                           std::uint64_t seed);

/// Angle estimation plus per-path ranging on one stored record.
PointEstimate estimate_point(const Scenario& sc, const SoundingRecord& record, int point_id,
                             const SubcarrierPhases* reference = nullptr);

/// Broadcast sounding and receive-only scan at one position; returns the
/// world-frame arrival profile.
AoAProfile measure_aoa_profile(const Scenario& sc, const Point2& pos, std::uint64_t seed);

PipelineResult run_pipeline(const Scenario& sc, const RunOptions& opts = {});

/// Writes reports.csv, reconstruction.json, walls.csv, metrics CSVs,
/// localization.csv, optional per-point sounding records, and a manifest with
/// a content hash per file.
void write_run_artifacts(const PipelineResult& result, const Scenario& sc,
                         const std::string& out_dir, bool write_records);

struct MatchedPath {
  int estimate_index = 0;
  int truth_index = 0;
};

/// Greedy nearest matching of estimated to true paths in the principal-angle
/// plane, gated at gate_deg.
std::vector<MatchedPath> match_paths_principal(const std::vector<PathEstimate>& estimates,
                                               const std::vector<PropagationPath>& truth,
                                               double gate_deg = 10.0);

struct SweepResult {
  std::vector<double> snr_db;
  std::vector<MetricsReport> reports;
};

/// Independent seeded trials per SNR point; aggregation order is fixed by the
/// trial index, so serial and parallel execution agree exactly.
SweepResult monte_carlo(const Scenario& sc, int n_trials,
                        const std::vector<double>& snr_sweep_db = {});

}  // namespace mmsense
