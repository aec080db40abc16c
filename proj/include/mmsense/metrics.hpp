#pragma once

// Error-sample bookkeeping: empirical CDFs with nearest-rank percentiles,
// plus CSV/JSON emission and a small content hash for run manifests.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmsense {

struct CdfTable {
  std::vector<double> value;       // sorted samples
  std::vector<double> percentile;  // (i+1)/n, non-decreasing
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  std::size_t n = 0;
};

class MetricsError : public std::runtime_error {
 public:
  explicit MetricsError(const std::string& what) : std::runtime_error(what) {}
};

/// Empirical CDF at each sorted sample; percentiles by nearest rank.
CdfTable compute_cdf(std::vector<double> samples);

/// Nearest-rank quantile of an already computed table, q in (0, 1].
double quantile(const CdfTable& table, double q);

struct MetricsReport {
  std::map<std::string, CdfTable> tables;

  void add_samples(const std::string& name, const std::vector<double>& samples);
};

/// One "quantity,value,percentile" block per table.
void write_metrics_csv(const MetricsReport& report, const std::string& path);

/// Summary rows only: "quantity,n,mean,p50,p90".
void write_metrics_summary_csv(const MetricsReport& report, const std::string& path);

/// FNV-1a 64-bit over a file's bytes; manifest integrity only, not
/// cryptographic.
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace mmsense
