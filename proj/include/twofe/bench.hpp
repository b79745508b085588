#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twofe/deployment.hpp"

namespace twofe {

struct BenchOptions {
  std::vector<std::size_t> sizes = {100'000, 1'000'000, 5'000'000, 10'000'000};
  std::size_t reps = 20;  // per size, per operation, per transport
  std::vector<TransportKind> transports = {TransportKind::local, TransportKind::tcp};
  std::uint64_t seed = 1;  // shuffles the size order
  // Family-wise level over all slope fits (Bonferroni-split between them).
  double confidence = 0.99;
  // Bytes swept through the cache before every derivation so each one starts
  // from the same cache state whatever file came before. 0 disables.
  std::size_t cache_sweep_bytes = 64u << 20;
};

// One key derivation. Times cover the derivation only, never the file cipher.
struct BenchSample {
  std::string transport;
  std::string op;  // "encrypt" or "decrypt"
  std::size_t size = 0;
  double total_ms = 0;
  double compute_ms = 0;
  std::size_t peer_messages = 0;  // primary<->secondary messages seen on the wire
};

struct BenchSummary {
  std::string transport;
  std::string op;
  std::size_t size = 0;  // 0 = all sizes pooled
  std::size_t n = 0;
  double median_total_ms = 0;
  double sd_total_ms = 0;
  double median_compute_ms = 0;
  double sd_compute_ms = 0;
  double compute_fraction = 0;  // median compute / median total
};

// Least-squares fit of total_ms against file size in MB.
struct SlopeFit {
  std::string transport;
  std::string op;
  double slope_ms_per_mb = 0;
  double ci_low = 0;
  double ci_high = 0;
  double confidence = 0;
  bool contains_zero() const { return ci_low <= 0 && 0 <= ci_high; }
};

struct BenchReport {
  std::vector<BenchSample> samples;
  std::vector<BenchSummary> summaries;
  std::vector<SlopeFit> slopes;
  // Distinct primary<->secondary message counts per operation.
  std::map<std::string, std::vector<std::size_t>> message_counts;

  const BenchSummary& pooled(const std::string& transport, const std::string& op) const;
  std::vector<std::string> records() const;  // one JSON object per line
  std::string table() const;
};

// Throws deployment-unreachable when a deployment cannot be brought up.
BenchReport run_bench(const BenchOptions& options);

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, double confidence);
double median(std::vector<double> v);
double sample_sd(const std::vector<double>& v);

}  // namespace twofe
