#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"

namespace twofe::testing {

// name -> hex from tests/golden/vectors.txt (produced by make_vectors.py).
inline std::string golden(const std::string& name) {
  static const std::map<std::string, std::string> table = [] {
    std::map<std::string, std::string> t;
    std::ifstream in(std::string(TWOFE_GOLDEN_DIR) + "/vectors.txt");
    std::string key, value;
    while (in >> key >> value) t[key] = value;
    return t;
  }();
  auto it = table.find(name);
  if (it == table.end()) throw std::runtime_error("missing golden vector " + name);
  return it->second;
}

// Upper-tail p-value of Pearson's statistic against a uniform expectation.
inline double chi_square_uniform_p(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Per-bit-position balance over equal-length samples. Each position's count
// of ones gives z_i = (ones - n/2) / sqrt(n/4); sum z_i^2 is chi-square with
// one degree of freedom per position. Returns the upper-tail p-value.
inline double bit_balance_p(const std::vector<Bytes>& samples) {
  const std::size_t bits = samples.front().size() * 8;
  std::vector<std::uint64_t> ones(bits, 0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < bits; ++i) ones[i] += (s[i / 8] >> (7 - i % 8)) & 1;
  }
  const double n = static_cast<double>(samples.size());
  double stat = 0;
  for (auto c : ones) {
    const double z = (static_cast<double>(c) - n / 2) / std::sqrt(n / 4);
    stat += z * z;
  }
  boost::math::chi_squared dist(static_cast<double>(bits));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Monobit p-value over every bit of every sample, for distinguishing a
// biased stream from a balanced one.
inline double monobit_p(ByteView data) {
  std::uint64_t ones = 0;
  for (auto b : data) ones += static_cast<std::uint64_t>(__builtin_popcount(b));
  const double n = static_cast<double>(data.size()) * 8;
  const double z = (static_cast<double>(ones) - n / 2) / std::sqrt(n / 4);
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace twofe::testing
