#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "mmsense/scenario.hpp"

using namespace mmsense;

namespace {
const std::string kScenarioDir = MMSENSE_SCENARIO_DIR;
}

TEST_CASE("bundled scenarios load and validate") {
  for (const char* name : {"freespace", "rectangle_6x4", "corridor_fig9", "ambiguity_fig3a",
                           "ambiguity_fig3b"}) {
    const Scenario sc = load_scenario(kScenarioDir + "/" + name + ".json");
    CHECK(sc.name == name);
    CHECK(sc.tx_array.n_elements == 16);
    CHECK(sc.ofdm.n_subcarriers == 8);
    CHECK(sc.ofdm.subcarrier_frequencies.size() == 8);
    // equally spaced subcarriers spanning the configured bandwidth
    // spacing comparisons at the ulp scale of the 60 GHz carriers
    const double df = sc.ofdm.subcarrier_spacing();
    for (size_t i = 1; i < sc.ofdm.subcarrier_frequencies.size(); ++i) {
      CHECK(sc.ofdm.subcarrier_frequencies[i] - sc.ofdm.subcarrier_frequencies[i - 1] ==
            doctest::Approx(df).epsilon(1e-9));
    }
    CHECK(sc.ofdm.subcarrier_frequencies.back() - sc.ofdm.subcarrier_frequencies.front() ==
          doctest::Approx(sc.ofdm.bandwidth).epsilon(1e-9));
    if (std::string(name) != "freespace") CHECK(sc.layout.walls.size() >= 4);
  }
}

TEST_CASE("scenario round trips through json") {
  const Scenario sc = load_scenario(kScenarioDir + "/corridor_fig9.json");
  const std::string text = scenario_to_json_text(sc);
  const Scenario back = scenario_from_json_text(text);
  CHECK(back.name == sc.name);
  CHECK(back.seed == sc.seed);
  CHECK(back.snr_db == sc.snr_db);
  CHECK(back.layout.walls.size() == sc.layout.walls.size());
  for (size_t i = 0; i < sc.layout.walls.size(); ++i) {
    CHECK(distance(back.layout.walls[i].a, sc.layout.walls[i].a) < 1e-12);
    CHECK(distance(back.layout.walls[i].b, sc.layout.walls[i].b) < 1e-12);
  }
  CHECK(back.measurement_points.size() == sc.measurement_points.size());
  CHECK(back.estimator.scan.max_deg == sc.estimator.scan.max_deg);
  CHECK(back.estimator.smoothing.sub_tx == sc.estimator.smoothing.sub_tx);
  CHECK(scenario_to_json_text(back) == text);
}

TEST_CASE("scenario parse errors are reported") {
  CHECK_THROWS_AS(scenario_from_json_text("{not json"), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json_text("{}"), std::exception);
  CHECK_THROWS_AS(load_scenario("/nonexistent/path.json"), ScenarioError);
}

TEST_CASE("sounding records round trip through their json schema") {
  using mmsense::testing::path_at;
  const double lambda = kSpeedOfLight / 60.48e9;
  const ArrayConfig arr = make_array(4, lambda);
  const OfdmConfig ofdm = make_ofdm(60.48e9, 12.5e6, 3, 2);
  const std::vector<PropagationPath> paths = {path_at(10.0, -20.0, 3.0, 0.3, lambda)};
  const ChannelMatrix h = synthesize_channel(paths, arr, arr, ofdm);
  const Eigen::MatrixXcd f = unitary_codebook(4);
  const SoundingRecord rec =
      sound_channel(h, f, f, ofdm, make_pilot(2, 3), 0.01, 1e-9, 9);

  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "mm_record.json").string();
  save_sounding_record(rec, path);
  const SoundingRecord back = load_sounding_record(path);
  fs::remove(path);

  CHECK(back.noise_power == rec.noise_power);
  CHECK(back.ofdm.n_subcarriers == rec.ofdm.n_subcarriers);
  CHECK((back.precoders - rec.precoders).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.combiners - rec.combiners).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.received.size() == rec.received.size());
  double max_diff = 0.0;
  for (size_t i = 0; i < rec.received.size(); ++i) {
    max_diff = std::max(max_diff, (back.received[i] - rec.received[i]).cwiseAbs().maxCoeff());
  }
  CHECK(max_diff == 0.0);  // shortest round-trip decimal preserves doubles exactly
  for (size_t t = 0; t < rec.pilot.size(); ++t) CHECK(back.pilot[t] == rec.pilot[t]);
}

TEST_CASE("reports csv round trips") {
  std::vector<MeasurementReport> reports(2);
  reports[0].point_id = 0;
  reports[0].paths = {{0.1, 3.0, 4.0}, {-0.2, 2.8, 6.5}};
  reports[1].point_id = 1;
  reports[1].paths = {{0.3, -2.9, 5.25}};
  const std::vector<std::vector<double>> peaks = {{10.0, 5.0}, {7.5}};

  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "mm_reports.csv").string();
  save_reports_csv(reports, peaks, path);
  const std::vector<MeasurementReport> back = load_reports_csv(path);
  fs::remove(path);

  REQUIRE(back.size() == 2);
  REQUIRE(back[0].paths.size() == 2);
  REQUIRE(back[1].paths.size() == 1);
  CHECK(back[0].paths[1].length == 6.5);
  CHECK(back[1].paths[0].aoa == -2.9);
  CHECK(back[1].point_id == 1);
}
