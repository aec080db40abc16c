#include "mmsense/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmsense {

using nlohmann::json;

namespace {

json point_to_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json points_to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const Point2& p : pts) arr.push_back(point_to_json(p));
  return arr;
}

std::vector<Point2> points_from_json(const json& j) {
  std::vector<Point2> out;
  for (const auto& e : j) out.push_back(point_from_json(e));
  return out;
}

json array_to_json(const ArrayConfig& a) {
  json j;
  j["n_elements"] = a.n_elements;
  j["spacing_m"] = a.spacing;
  j["spacing_error_m"] = a.spacing_error;
  if (!a.element_phase_offsets.empty()) j["phase_offsets_rad"] = a.element_phase_offsets;
  return j;
}

ArrayConfig array_from_json(const json& j, double wavelength) {
  ArrayConfig a;
  a.n_elements = j.at("n_elements").get<int>();
  a.wavelength = wavelength;
  a.spacing = j.contains("spacing_m") && !j["spacing_m"].is_null()
                  ? j["spacing_m"].get<double>()
                  : 0.5 * wavelength;
  a.spacing_error = j.value("spacing_error_m", 0.0);
  if (j.contains("phase_offsets_rad")) {
    a.element_phase_offsets = j["phase_offsets_rad"].get<std::vector<double>>();
    if (static_cast<int>(a.element_phase_offsets.size()) != a.n_elements) {
      throw ScenarioError("array config: phase offset count does not match n_elements");
    }
  }
  return a;
}

OrderSelection order_from_json(const json& j, const std::string& mode_key,
                               const std::string& k_key) {
  OrderSelection sel;
  const std::string mode = j.value(mode_key, std::string("mdl"));
  if (mode == "mdl") {
    sel.mode = OrderMode::kMdl;
  } else if (mode == "aic") {
    sel.mode = OrderMode::kAic;
  } else if (mode == "fixed") {
    sel.mode = OrderMode::kFixed;
  } else {
    throw ScenarioError("estimator: unknown order mode " + mode);
  }
  sel.fixed_k = j.value(k_key, 1);
  return sel;
}

std::string order_to_string(const OrderSelection& sel) {
  switch (sel.mode) {
    case OrderMode::kMdl: return "mdl";
    case OrderMode::kAic: return "aic";
    case OrderMode::kFixed: return "fixed";
  }
  return "mdl";
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.seed = j.value("seed", std::uint64_t{1});
  s.snr_db = j.value("snr_db", 25.0);
  s.timing_offset = j.value("timing_offset_s", 0.0);

  const json& jo = j.at("ofdm");
  s.ofdm = make_ofdm(jo.at("center_frequency_hz").get<double>(),
                     jo.at("bandwidth_hz").get<double>(),
                     jo.value("n_subcarriers", 8), jo.value("n_symbols", 64));
  const double wavelength = kSpeedOfLight / s.ofdm.center_frequency();

  const json& jl = j.at("layout");
  if (jl.contains("reference_axis")) {
    s.layout.reference_axis = point_from_json(jl["reference_axis"]);
  }
  for (const auto& jw : jl.value("walls", json::array())) {
    Wall w;
    w.a = point_from_json(jw.at("a"));
    w.b = point_from_json(jw.at("b"));
    w.reflection_loss_db = jw.value("reflection_loss_db", 10.0);
    if (w.length() <= 0.0) throw ScenarioError("layout: degenerate wall");
    s.layout.walls.push_back(w);
  }

  s.tx_array = array_from_json(j.at("tx_array"), wavelength);
  s.rx_array = array_from_json(j.at("rx_array"), wavelength);
  s.measurement_points = points_from_json(j.value("measurement_points", json::array()));
  s.eval_positions = points_from_json(j.value("eval_positions", json::array()));

  const json je = j.value("estimator", json::object());
  EstimatorParams& e = s.estimator;
  e.smoothing.sub_tx = je.value("sub_tx", 12);
  e.smoothing.sub_rx = je.value("sub_rx", 12);
  e.scan.min_deg = je.value("scan_min_deg", -45.0);
  e.scan.max_deg = je.value("scan_max_deg", 45.0);
  e.scan.step_deg = je.value("scan_step_deg", 0.5);
  e.order = order_from_json(je, "order_mode", "fixed_k");
  e.max_order = je.value("max_order", 2);
  e.range_max = je.value("range_max_m", 30.0);
  e.range_grid = je.value("range_grid_m", 0.01);
  e.reference_distance = je.value("reference_distance_m", 0.0);
  e.recon.dbscan_eps = je.value("dbscan_eps_m", 0.5);
  e.recon.dbscan_min_pts = je.value("dbscan_min_pts", 3);
  e.recon.los_eps = je.value("los_eps_m", 0.3);
  e.recon.wall_tol = je.value("wall_tol_m", 0.3);
  e.recon.extent_margin = je.value("extent_margin_m", 0.25);
  e.recon.outlier_gate = je.value("outlier_gate_m", 2.0);
  e.recon.coarse_grid = je.value("coarse_grid_m", 0.25);
  e.a_th_deg = je.value("a_th_deg", 10.0);
  e.grid_spacing = je.value("grid_spacing_m", 0.25);
  e.loc_extent_margin = je.value("loc_extent_margin_m", 0.25);
  e.aoa_sub_rx = je.value("aoa_sub_rx", 10);
  e.aoa_order = order_from_json(je, "aoa_order_mode", "aoa_fixed_k");
  return s;
}

std::string scenario_to_json_text(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["snr_db"] = s.snr_db;
  j["timing_offset_s"] = s.timing_offset;
  j["ofdm"] = {{"center_frequency_hz", s.ofdm.center_frequency()},
               {"bandwidth_hz", s.ofdm.bandwidth},
               {"n_subcarriers", s.ofdm.n_subcarriers},
               {"n_symbols", s.ofdm.n_symbols}};
  json walls = json::array();
  for (const Wall& w : s.layout.walls) {
    walls.push_back({{"a", point_to_json(w.a)},
                     {"b", point_to_json(w.b)},
                     {"reflection_loss_db", w.reflection_loss_db}});
  }
  j["layout"] = {{"reference_axis", point_to_json(s.layout.reference_axis)},
                 {"walls", walls}};
  j["tx_array"] = array_to_json(s.tx_array);
  j["rx_array"] = array_to_json(s.rx_array);
  j["measurement_points"] = points_to_json(s.measurement_points);
  j["eval_positions"] = points_to_json(s.eval_positions);
  const EstimatorParams& e = s.estimator;
  j["estimator"] = {{"sub_tx", e.smoothing.sub_tx},
                    {"sub_rx", e.smoothing.sub_rx},
                    {"scan_min_deg", e.scan.min_deg},
                    {"scan_max_deg", e.scan.max_deg},
                    {"scan_step_deg", e.scan.step_deg},
                    {"order_mode", order_to_string(e.order)},
                    {"fixed_k", e.order.fixed_k},
                    {"max_order", e.max_order},
                    {"range_max_m", e.range_max},
                    {"range_grid_m", e.range_grid},
                    {"reference_distance_m", e.reference_distance},
                    {"dbscan_eps_m", e.recon.dbscan_eps},
                    {"dbscan_min_pts", e.recon.dbscan_min_pts},
                    {"los_eps_m", e.recon.los_eps},
                    {"wall_tol_m", e.recon.wall_tol},
                    {"extent_margin_m", e.recon.extent_margin},
                    {"outlier_gate_m", e.recon.outlier_gate},
                    {"coarse_grid_m", e.recon.coarse_grid},
                    {"a_th_deg", e.a_th_deg},
                    {"grid_spacing_m", e.grid_spacing},
                    {"loc_extent_margin_m", e.loc_extent_margin},
                    {"aoa_sub_rx", e.aoa_sub_rx},
                    {"aoa_order_mode", order_to_string(e.aoa_order)},
                    {"aoa_fixed_k", e.aoa_order.fixed_k}};
  return j.dump(2) + "\n";
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return scenario_from_json_text(buf.str());
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ScenarioError("cannot write scenario file " + path);
  os << scenario_to_json_text(scenario);
}

namespace {

json complex_matrix_to_json(const Eigen::MatrixXcd& m) {
  json arr = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      arr.push_back(m(r, c).real());
      arr.push_back(m(r, c).imag());
    }
  }
  return arr;
}

Eigen::MatrixXcd complex_matrix_from_json(const json& arr, int rows, int cols) {
  if (static_cast<int>(arr.size()) != 2 * rows * cols) {
    throw ScenarioError("sounding record: complex array size mismatch");
  }
  Eigen::MatrixXcd m(rows, cols);
  int idx = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double re = arr[static_cast<size_t>(idx++)].get<double>();
      const double im = arr[static_cast<size_t>(idx++)].get<double>();
      m(r, c) = cd(re, im);
    }
  }
  return m;
}

}  // namespace

void save_sounding_record(const SoundingRecord& record, const std::string& path) {
  json j;
  j["n_tx"] = record.precoders.rows();
  j["n_precoders"] = record.precoders.cols();
  j["n_rx"] = record.combiners.rows();
  j["n_combiners"] = record.combiners.cols();
  j["noise_power"] = record.noise_power;
  j["ofdm"] = {{"center_frequency_hz", record.ofdm.center_frequency()},
               {"bandwidth_hz", record.ofdm.bandwidth},
               {"n_subcarriers", record.ofdm.n_subcarriers},
               {"n_symbols", record.ofdm.n_symbols}};
  j["precoders"] = complex_matrix_to_json(record.precoders);
  j["combiners"] = complex_matrix_to_json(record.combiners);
  json pilot = json::array();
  for (const cd& s : record.pilot) {
    pilot.push_back(s.real());
    pilot.push_back(s.imag());
  }
  j["pilot"] = pilot;
  json rec = json::array();
  for (const Eigen::MatrixXcd& m : record.received) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        rec.push_back(m(r, c).real());
        rec.push_back(m(r, c).imag());
      }
    }
  }
  j["received"] = std::move(rec);
  std::ofstream os(path);
  if (!os) throw ScenarioError("cannot write sounding record " + path);
  os << j.dump() << "\n";
}

SoundingRecord load_sounding_record(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError("cannot open sounding record " + path);
  json j;
  is >> j;
  SoundingRecord rec;
  const int n_tx = j.at("n_tx").get<int>();
  const int np = j.at("n_precoders").get<int>();
  const int n_rx = j.at("n_rx").get<int>();
  const int nc = j.at("n_combiners").get<int>();
  rec.noise_power = j.at("noise_power").get<double>();
  const json& jo = j.at("ofdm");
  rec.ofdm = make_ofdm(jo.at("center_frequency_hz").get<double>(),
                       jo.at("bandwidth_hz").get<double>(), jo.at("n_subcarriers").get<int>(),
                       jo.at("n_symbols").get<int>());
  rec.precoders = complex_matrix_from_json(j.at("precoders"), n_tx, np);
  rec.combiners = complex_matrix_from_json(j.at("combiners"), n_rx, nc);
  const json& jp = j.at("pilot");
  if (static_cast<int>(jp.size()) != 2 * rec.ofdm.n_symbols) {
    throw ScenarioError("sounding record: pilot size mismatch");
  }
  rec.pilot.resize(static_cast<size_t>(rec.ofdm.n_symbols));
  for (int t = 0; t < rec.ofdm.n_symbols; ++t) {
    rec.pilot[static_cast<size_t>(t)] = cd(jp[static_cast<size_t>(2 * t)].get<double>(),
                                           jp[static_cast<size_t>(2 * t + 1)].get<double>());
  }
  const json& jr = j.at("received");
  const int per = nc * np;
  const int frames = rec.ofdm.n_symbols * rec.ofdm.n_subcarriers;
  if (static_cast<int>(jr.size()) != 2 * per * frames) {
    throw ScenarioError("sounding record: received size mismatch");
  }
  rec.received.resize(static_cast<size_t>(frames));
  int idx = 0;
  for (int f = 0; f < frames; ++f) {
    Eigen::MatrixXcd m(nc, np);
    for (int r = 0; r < nc; ++r) {
      for (int c = 0; c < np; ++c) {
        const double re = jr[static_cast<size_t>(idx++)].get<double>();
        const double im = jr[static_cast<size_t>(idx++)].get<double>();
        m(r, c) = cd(re, im);
      }
    }
    rec.received[static_cast<size_t>(f)] = std::move(m);
  }
  return rec;
}

void save_reports_csv(const std::vector<MeasurementReport>& reports,
                      const std::vector<std::vector<double>>& peaks,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ScenarioError("cannot write reports file " + path);
  os.precision(17);
  os << "point_id,path_index,aod_rad,aoa_rad,length_m,peak\n";
  for (size_t ri = 0; ri < reports.size(); ++ri) {
    const MeasurementReport& r = reports[ri];
    for (size_t pi = 0; pi < r.paths.size(); ++pi) {
      const double peak =
          ri < peaks.size() && pi < peaks[ri].size() ? peaks[ri][pi] : 0.0;
      os << r.point_id << ',' << pi << ',' << r.paths[pi].aod << ',' << r.paths[pi].aoa << ','
         << r.paths[pi].length << ',' << peak << '\n';
    }
  }
}

std::vector<MeasurementReport> load_reports_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError("cannot open reports file " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<MeasurementReport> reports;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < 5) throw ScenarioError("reports csv: malformed row: " + line);
    const int id = std::stoi(fields[0]);
    PathTriple p;
    p.aod = std::stod(fields[2]);
    p.aoa = std::stod(fields[3]);
    p.length = std::stod(fields[4]);
    if (reports.empty() || reports.back().point_id != id) {
      reports.push_back({id, {}});
    }
    reports.back().paths.push_back(p);
  }
  return reports;
}

void save_reconstruction_json(const ReconstructionResult& result, const std::string& path) {
  json j;
  json pts = json::array();
  for (const auto& lp : result.points) {
    if (!lp.has_value()) {
      pts.push_back(nullptr);
      continue;
    }
    pts.push_back({{"position", point_to_json(lp->position)},
                   {"residual", lp->residual},
                   {"paths_used", lp->paths_used},
                   {"low_confidence", lp->low_confidence},
                   {"ambiguous", lp->ambiguous}});
  }
  j["points"] = pts;
  json obs = json::array();
  for (const VirtualTxObservation& o : result.observations) {
    obs.push_back({{"position", point_to_json(o.position)},
                   {"point_id", o.point_id},
                   {"path_index", o.path_index}});
  }
  j["virtual_tx_observations"] = obs;
  json cls = json::array();
  for (const Cluster& c : result.clusters.clusters) {
    cls.push_back({{"centroid", point_to_json(c.centroid)}, {"members", c.members}});
  }
  j["clusters"] = cls;
  j["noise_observations"] = result.clusters.noise;
  json walls = json::array();
  for (const WallEstimate& w : result.walls) {
    json refl = json::array();
    for (const Point2& r : w.reflection_points) refl.push_back(point_to_json(r));
    walls.push_back({{"line_point", point_to_json(w.line_point)},
                     {"line_normal", point_to_json(w.line_normal)},
                     {"extent_a", point_to_json(w.extent_a)},
                     {"extent_b", point_to_json(w.extent_b)},
                     {"support", w.supporting_cluster_size},
                     {"reflection_points", refl},
                     {"rejected_reflection_points", w.rejected_reflection_points},
                     {"extent_from_reflections", w.extent_from_reflections}});
  }
  j["walls"] = walls;
  j["warnings"] = result.warnings;
  std::ofstream os(path);
  if (!os) throw ScenarioError("cannot write reconstruction file " + path);
  os << j.dump(2) << "\n";
}

void save_walls_csv(const std::vector<WallEstimate>& walls, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ScenarioError("cannot write walls file " + path);
  os.precision(17);
  os << "ax,ay,bx,by,support\n";
  for (const WallEstimate& w : walls) {
    os << w.extent_a.x << ',' << w.extent_a.y << ',' << w.extent_b.x << ',' << w.extent_b.y
       << ',' << w.supporting_cluster_size << '\n';
  }
}

}  // namespace mmsense
