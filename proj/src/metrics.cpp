#include "mmsense/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mmsense {

CdfTable compute_cdf(std::vector<double> samples) {
  if (samples.empty()) throw MetricsError("compute_cdf: empty sample set");
  std::sort(samples.begin(), samples.end());
  CdfTable t;
  t.n = samples.size();
  t.value = std::move(samples);
  t.percentile.resize(t.n);
  for (std::size_t i = 0; i < t.n; ++i) {
    t.percentile[i] = static_cast<double>(i + 1) / static_cast<double>(t.n);
  }
  t.mean = std::accumulate(t.value.begin(), t.value.end(), 0.0) / static_cast<double>(t.n);
  t.p50 = quantile(t, 0.5);
  t.p90 = quantile(t, 0.9);
  return t;
}

double quantile(const CdfTable& table, double q) {
  if (table.n == 0) throw MetricsError("quantile: empty table");
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(table.n)));
  const std::size_t idx = std::min(std::max<std::size_t>(rank, 1), table.n) - 1;
  return table.value[idx];
}

void MetricsReport::add_samples(const std::string& name, const std::vector<double>& samples) {
  if (samples.empty()) return;
  auto it = tables.find(name);
  if (it == tables.end()) {
    tables[name] = compute_cdf(samples);
    return;
  }
  std::vector<double> merged = it->second.value;
  merged.insert(merged.end(), samples.begin(), samples.end());
  it->second = compute_cdf(std::move(merged));
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  os.precision(17);
  os << "quantity,value,percentile\n";
  for (const auto& [name, table] : report.tables) {
    for (std::size_t i = 0; i < table.n; ++i) {
      os << name << ',' << table.value[i] << ',' << table.percentile[i] << '\n';
    }
  }
}

void write_metrics_summary_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  os.precision(17);
  os << "quantity,n,mean,p50,p90\n";
  for (const auto& [name, table] : report.tables) {
    os << name << ',' << table.n << ',' << table.mean << ',' << table.p50 << ',' << table.p90
       << '\n';
  }
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MetricsError("fnv1a64_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

}  // namespace mmsense
