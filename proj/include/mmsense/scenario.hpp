#pragma once

// Scenario configuration and file formats: scenario JSON, stored sounding
// records (base-10 complex pairs), measurement-report CSV and the
// reconstruction JSON. These are the stable on-disk interfaces between
// pipeline stages.

#include <cstdint>
#include <string>
#include <vector>

#include "mmsense/geometry.hpp"
#include "mmsense/music.hpp"
#include "mmsense/reconstruction.hpp"
#include "mmsense/signal.hpp"

namespace mmsense {

struct EstimatorParams {
  SmoothingConfig smoothing;
  ScanGrid scan;
  OrderSelection order;
  int max_order = 2;             // reflections traced in simulation
  double range_max = 30.0;       // m
  double range_grid = 0.01;      // m
  double reference_distance = 0.0;  // m, >0 enables reference-calibrated ranging
  ReconstructionParams recon;
  double a_th_deg = 10.0;
  double grid_spacing = 0.25;    // m, candidate grid for AoA localization
  double loc_extent_margin = 0.25;  // m, wall extension for AoA prediction only
  int aoa_sub_rx = 10;
  OrderSelection aoa_order;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  double snr_db = 25.0;
  double timing_offset = 0.0;  // s
  RoomLayout layout;
  ArrayConfig tx_array;
  ArrayConfig rx_array;
  OfdmConfig ofdm;
  std::vector<Point2> measurement_points;
  std::vector<Point2> eval_positions;  // AoA-localization stage, optional
  EstimatorParams estimator;
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& scenario);

void save_sounding_record(const SoundingRecord& record, const std::string& path);
SoundingRecord load_sounding_record(const std::string& path);

/// Rows of "point_id,path_index,aod_rad,aoa_rad,length_m,peak" (world-frame
/// angles); the interface between the ranging and reconstruction stages.
void save_reports_csv(const std::vector<MeasurementReport>& reports,
                      const std::vector<std::vector<double>>& peaks,
                      const std::string& path);
std::vector<MeasurementReport> load_reports_csv(const std::string& path);

void save_reconstruction_json(const ReconstructionResult& result, const std::string& path);

/// Wall estimates as "ax,ay,bx,by,support" segment rows for plotting.
void save_walls_csv(const std::vector<WallEstimate>& walls, const std::string& path);

}  // namespace mmsense
