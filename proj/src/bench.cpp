#include "twofe/bench.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "twofe/error.hpp"

namespace twofe {

namespace {

using nlohmann::ordered_json;

std::string transport_name(TransportKind k) { return k == TransportKind::local ? "local" : "tcp"; }

std::size_t peer_messages(Deployment& d) {
  const std::string p = d.address_of("primary");
  const std::string s = d.address_of("secondary");
  std::size_t n = 0;
  for (const auto& e : d.log().events()) {
    const bool p2s = e.from == p && e.to == s;
    const bool s2p = e.from == s && e.to == p;
    if (p2s || s2p) ++n;
  }
  return n;
}

BenchSummary summarize(const std::string& transport, const std::string& op, std::size_t size,
                       const std::vector<const BenchSample*>& xs) {
  BenchSummary s{transport, op, size, xs.size()};
  std::vector<double> total, compute;
  for (const auto* x : xs) {
    total.push_back(x->total_ms);
    compute.push_back(x->compute_ms);
  }
  s.median_total_ms = median(total);
  s.sd_total_ms = sample_sd(total);
  s.median_compute_ms = median(compute);
  s.sd_compute_ms = sample_sd(compute);
  s.compute_fraction = s.median_total_ms > 0 ? s.median_compute_ms / s.median_total_ms : 0;
  return s;
}

void run_transport(const BenchOptions& opt, TransportKind kind, BenchReport& report) {
  // The bench owns the cloud clock so trashed benchmark files can be purged at once.
  auto skew = std::make_shared<std::chrono::seconds>(0);
  DeploymentOptions d_opt;
  d_opt.transport = kind;
  d_opt.cloud.trash_retention = std::chrono::seconds(0);
  d_opt.cloud.now = [skew] { return SystemClock::now() + *skew; };

  ComputeMeter meter;
  std::unique_ptr<Deployment> d;
  try {
    d = std::make_unique<Deployment>(d_opt);
    DeviceOptions p_opt, s_opt;
    p_opt.meter = &meter;
    if (opt.cache_sweep_bytes > 0) {
      p_opt.before_derivation = [sweep = std::make_shared<Bytes>(opt.cache_sweep_bytes)] {
        volatile std::uint8_t* b = sweep->data();
        for (std::size_t i = 0; i < sweep->size(); i += 64) b[i] = static_cast<std::uint8_t>(b[i] + 1);
        // Lets server threads finish the previous transfer before timing starts.
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      };
    }
    s_opt.meter = &meter;
    d->add_secondary("secondary", s_opt);
    d->add_primary("primary", p_opt);
    d->enroll();
  } catch (const Error& e) {
    throw Error(ErrorCode::deployment_unreachable, transport_name(kind) + " deployment: " + e.what());
  }
  auto& p = d->primary();

  std::vector<std::size_t> order;
  for (const auto size : opt.sizes) order.insert(order.end(), opt.reps, size);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::string tname = transport_name(kind);
  const auto sample = [&](const std::string& op, std::size_t size) {
    const auto& t = p.last_timing();
    report.samples.push_back({tname, op, size, t.derive_ms, std::min(t.compute_ms, t.derive_ms),
                              peer_messages(*d)});
  };

  // Warm-up: connections, caches, allocator.
  for (int i = 0; i < 3; ++i) {
    p.encrypt("bench/warmup", Bytes(1000, 0x5a));
    p.decrypt("bench/warmup");
    p.remove("bench/warmup");
  }

  std::size_t i = 0;
  for (const auto size : order) {
    const std::string name = "bench/" + std::to_string(i++);
    Bytes data(size);
    for (std::size_t j = 0; j < size; ++j) data[j] = static_cast<std::uint8_t>(j * 131 + i);
    d->log().clear();
    p.encrypt(name, data);
    sample("encrypt", size);
    d->log().clear();
    if (p.decrypt(name) != data) throw Error(ErrorCode::internal, "benchmark round trip mismatch");
    sample("decrypt", size);
    p.remove(name);
    *skew += std::chrono::seconds(1);
    d->cloud().purge_expired();
  }
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, double confidence) {
  if (x.size() != y.size() || x.size() < 3) throw Error(ErrorCode::usage, "slope fit needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw Error(ErrorCode::usage, "slope fit needs at least two distinct sizes");
  const double b = sxy / sxx;
  const double a = my - b * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - a - b * x[i], 2);
  const double se = std::sqrt(sse / (n - 2) / sxx);
  const boost::math::students_t t(n - 2);
  const double q = boost::math::quantile(boost::math::complement(t, (1 - confidence) / 2));
  SlopeFit f;
  f.slope_ms_per_mb = b;
  f.ci_low = b - q * se;
  f.ci_high = b + q * se;
  f.confidence = confidence;
  return f;
}

BenchReport run_bench(const BenchOptions& options) {
  if (options.sizes.empty() || options.reps == 0) throw Error(ErrorCode::usage, "bench needs sizes and reps");
  BenchReport report;
  for (const auto kind : options.transports) run_transport(options, kind, report);

  std::set<std::string> transports;
  for (const auto& s : report.samples) transports.insert(s.transport);
  const double per_fit = 1 - (1 - options.confidence) / (2.0 * static_cast<double>(transports.size()));
  for (const auto& t : transports) {
    for (const std::string op : {"encrypt", "decrypt"}) {
      std::vector<const BenchSample*> all;
      std::vector<double> x, y;
      for (const auto size : options.sizes) {
        std::vector<const BenchSample*> at;
        for (const auto& s : report.samples) {
          if (s.transport == t && s.op == op && s.size == size) at.push_back(&s);
        }
        report.summaries.push_back(summarize(t, op, size, at));
        for (const auto* s : at) {
          all.push_back(s);
          x.push_back(s->size / 1e6);
          y.push_back(s->total_ms);
        }
      }
      report.summaries.push_back(summarize(t, op, 0, all));
      if (options.sizes.size() > 1) {
        SlopeFit f = fit_slope(x, y, per_fit);
        f.transport = t;
        f.op = op;
        report.slopes.push_back(f);
      }
    }
  }
  for (const auto& s : report.samples) {
    auto& counts = report.message_counts[s.op];
    if (std::find(counts.begin(), counts.end(), s.peer_messages) == counts.end()) counts.push_back(s.peer_messages);
  }
  return report;
}

const BenchSummary& BenchReport::pooled(const std::string& transport, const std::string& op) const {
  for (const auto& s : summaries) {
    if (s.transport == transport && s.op == op && s.size == 0) return s;
  }
  throw Error(ErrorCode::usage, "no " + transport + " " + op + " samples");
}

std::vector<std::string> BenchReport::records() const {
  std::vector<std::string> out;
  for (const auto& s : samples) {
    out.push_back(ordered_json{{"record", "sample"},
                               {"transport", s.transport},
                               {"op", s.op},
                               {"size", s.size},
                               {"total_ms", s.total_ms},
                               {"compute_ms", s.compute_ms},
                               {"peer_messages", s.peer_messages}}
                      .dump());
  }
  for (const auto& s : summaries) {
    out.push_back(ordered_json{{"record", "summary"},
                               {"transport", s.transport},
                               {"op", s.op},
                               {"size", s.size},
                               {"n", s.n},
                               {"median_total_ms", s.median_total_ms},
                               {"sd_total_ms", s.sd_total_ms},
                               {"median_compute_ms", s.median_compute_ms},
                               {"sd_compute_ms", s.sd_compute_ms},
                               {"compute_fraction", s.compute_fraction}}
                      .dump());
  }
  for (const auto& f : slopes) {
    out.push_back(ordered_json{{"record", "slope"},
                               {"transport", f.transport},
                               {"op", f.op},
                               {"ms_per_mb", f.slope_ms_per_mb},
                               {"ci_low", f.ci_low},
                               {"ci_high", f.ci_high},
                               {"confidence", f.confidence},
                               {"contains_zero", f.contains_zero()}}
                      .dump());
  }
  ordered_json counts = ordered_json::object();
  for (const auto& [op, c] : message_counts) counts[op] = c;
  out.push_back(ordered_json{{"record", "messages"}, {"counts", counts}}.dump());
  return out;
}

std::string BenchReport::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %-8s %10s %5s %12s %10s %12s %10s %8s\n", "transport", "op", "size",
                "n", "total_med", "total_sd", "compute_med", "compute_sd", "compute%");
  os << line;
  for (const auto& s : summaries) {
    const std::string size = s.size == 0 ? "all" : std::to_string(s.size);
    std::snprintf(line, sizeof line, "%-9s %-8s %10s %5zu %12.3f %10.3f %12.3f %10.3f %7.1f%%\n",
                  s.transport.c_str(), s.op.c_str(), size.c_str(), s.n, s.median_total_ms, s.sd_total_ms,
                  s.median_compute_ms, s.sd_compute_ms, 100 * s.compute_fraction);
    os << line;
  }
  for (const auto& f : slopes) {
    std::snprintf(line, sizeof line, "slope %-5s %-8s %+.5f ms/MB  %.2f%% CI [%+.5f, %+.5f]  %s\n",
                  f.transport.c_str(), f.op.c_str(), f.slope_ms_per_mb, 100 * f.confidence, f.ci_low, f.ci_high,
                  f.contains_zero() ? "contains 0" : "excludes 0");
    os << line;
  }
  for (const auto& [op, c] : message_counts) {
    os << "messages " << op << ":";
    for (const auto n : c) os << " " << n;
    os << "\n";
  }
  return os.str();
}

}  // namespace twofe
