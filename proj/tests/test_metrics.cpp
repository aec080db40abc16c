#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mmsense/metrics.hpp"

using namespace mmsense;

TEST_CASE("cdf of a small sample") {
  const CdfTable t = compute_cdf({4.0, 1.0, 3.0, 2.0});
  REQUIRE(t.n == 4);
  CHECK(t.value.front() == 1.0);
  CHECK(t.value.back() == 4.0);
  CHECK(t.percentile.back() == 1.0);
  CHECK(t.p50 == 2.0);  // nearest rank
  CHECK(t.p90 == 4.0);
  CHECK(t.mean == doctest::Approx(2.5));
  CHECK_THROWS_AS(compute_cdf({}), MetricsError);
}

TEST_CASE("all-equal samples make a step cdf") {
  const CdfTable t = compute_cdf({7.0, 7.0, 7.0, 7.0, 7.0});
  CHECK(t.p50 == 7.0);
  CHECK(t.p90 == 7.0);
  for (size_t i = 0; i + 1 < t.n; ++i) {
    CHECK(t.value[i] == t.value[i + 1]);
    CHECK(t.percentile[i] < t.percentile[i + 1]);
  }
}

TEST_CASE("p90 of half-normal magnitudes approaches the analytic quantile") {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> mags(10000);
  for (double& m : mags) m = std::abs(gauss(rng));
  const CdfTable t = compute_cdf(std::move(mags));
  CHECK(t.p90 == doctest::Approx(1.6449).epsilon(0.03));
}

TEST_CASE("cdf against a sort-based oracle on random inputs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> samples(1 + static_cast<int>(rng() % 200));
    for (double& s : samples) s = u(rng);
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const CdfTable t = compute_cdf(samples);
    REQUIRE(t.value == sorted);
    for (size_t i = 0; i < t.n; ++i) {
      // CDF at the i-th sorted sample counts the samples at or below it
      std::size_t at_or_below = 0;
      for (double s : sorted) {
        if (s <= t.value[i]) ++at_or_below;
      }
      CHECK(t.percentile[i] <= static_cast<double>(at_or_below) / static_cast<double>(t.n) +
                                   1e-12);
    }
    CHECK(quantile(t, 1.0) == sorted.back());
  }
}

TEST_CASE("metrics report accumulates samples per quantity") {
  MetricsReport rep;
  rep.add_samples("err", {1.0, 2.0});
  rep.add_samples("err", {3.0});
  REQUIRE(rep.tables.count("err") == 1);
  CHECK(rep.tables["err"].n == 3);
  CHECK(rep.tables["err"].mean == doctest::Approx(2.0));

  const std::string path = (std::filesystem::temp_directory_path() / "mm_metrics.csv").string();
  write_metrics_csv(rep, path);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "quantity,value,percentile");
  int rows = 0;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
  std::filesystem::remove(path);
}

TEST_CASE("file hash is stable and content sensitive") {
  namespace fs = std::filesystem;
  const std::string a = (fs::temp_directory_path() / "mm_hash_a.txt").string();
  const std::string b = (fs::temp_directory_path() / "mm_hash_b.txt").string();
  std::ofstream(a) << "alpha";
  std::ofstream(b) << "alphb";
  CHECK(fnv1a64_file(a) == fnv1a64_file(a));
  CHECK(fnv1a64_file(a) != fnv1a64_file(b));
  fs::remove(a);
  fs::remove(b);
}
