// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <sodium.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "twofe/bench.hpp"
#include "twofe/deployment.hpp"
#include "twofe/dleq.hpp"
#include "twofe/error.hpp"
#include "twofe/random.hpp"
#include "twofe/ristretto.hpp"
#include "twofe/scenarios.hpp"
#include "twofe/secret_sharing.hpp"
#include "twofe/shared_randomness.hpp"
#include "twofe/toy_group.hpp"
#include "twofe/tprf.hpp"

namespace twofe {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- independent PRF oracle over raw libsodium ---

void put_be32(Bytes& out, std::size_t n) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
}

Bytes framed(std::string_view dom, std::initializer_list<ByteView> parts) {
  Bytes out;
  put_be32(out, dom.size());
  out.insert(out.end(), dom.begin(), dom.end());
  for (auto p : parts) {
    put_be32(out, p.size());
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// H(x, Phi * H'(x)) computed without the library's group or hash wrappers.
// Scalars arrive in the big-endian wire encoding.
Bytes direct_prf(ByteView tag, ByteView seed, ByteView kc_be, ByteView kd_be) {
  const Bytes kc(kc_be.rbegin(), kc_be.rend()), kd(kd_be.rbegin(), kd_be.rend());
  Bytes x;
  const std::string_view label = "2FE-KDF-INPUT";
  x.insert(x.end(), label.begin(), label.end());
  put_be32(x, tag.size());
  x.insert(x.end(), tag.begin(), tag.end());
  put_be32(x, seed.size());
  x.insert(x.end(), seed.begin(), seed.end());

  const Bytes h_in = framed("2FE-H1", {ByteView(x)});
  std::uint8_t wide[crypto_hash_sha512_BYTES];
  crypto_hash_sha512(wide, h_in.data(), h_in.size());
  std::uint8_t hx[crypto_core_ristretto255_BYTES];
  crypto_core_ristretto255_from_hash(hx, wide);

  std::uint8_t phi[crypto_core_ristretto255_SCALARBYTES];
  crypto_core_ristretto255_scalar_add(phi, kc.data(), kd.data());
  std::uint8_t y[crypto_core_ristretto255_BYTES];
  if (crypto_scalarmult_ristretto255(y, phi, hx) != 0) return {};

  const Bytes k_in = framed("2FE-KDF", {ByteView(x), ByteView(y, sizeof y)});
  Bytes k(crypto_hash_sha256_BYTES);
  crypto_hash_sha256(k.data(), k_in.data(), k_in.size());
  return k;
}

Outcome tprf_oracle_equivalence() {
  DeterministicRandom rng(101);
  Ristretto255 g;
  const auto t0 = Clock::now();
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Scalar kc = Scalar::random(), kd = Scalar::random();
    const Bytes tag = random_vector(16), seed = random_vector(32);
    const PrfInput x = PrfInput::from(tag, seed);
    const auto resp = tprf_respond(g, x, kd);
    const DerivedKey k = tprf_finish(g, x, kc, kd * g.generator(), resp);
    const Bytes expected = direct_prf(tag, seed, kc.encode(), kd.encode());
    if (to_bytes(k.bytes()) != expected || !(k == tprf_oracle(g, x, kc + kd))) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60, fmt("1000 instances, %d mismatches, %.1f s", mismatches, secs)};
}

Outcome dleq_soundness() {
  DeterministicRandom rng(102);
  Ristretto255 g;
  int honest_ok = 0, tampered_accepted = 0, forged_accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    const Scalar x = Scalar::random();
    const Element a = g.hash_to_group(random_vector(16));
    const Element b = x * a, p = x * g.generator();
    const auto proof = dleq_prove(g, g.generator(), x, a, b);
    if (dleq_verify(g, g.generator(), a, b, proof, p)) ++honest_ok;
    Scalar r = Scalar::random();
    while (r.is_zero()) r = Scalar::random();
    if (dleq_verify(g, g.generator(), a, b + r * g.generator(), proof, p)) ++tampered_accepted;
  }
  for (int i = 0; i < 10000; ++i) {
    const Scalar x = Scalar::random();
    const Element a = g.hash_to_group(random_vector(16));
    const DleqProof<Ristretto255> forged{Scalar::random(), Scalar::random()};
    if (dleq_verify(g, g.generator(), a, x * a, forged, x * g.generator())) ++forged_accepted;
  }
  return {honest_ok == 1000 && tampered_accepted == 0 && forged_accepted == 0,
          fmt("honest %d/1000 verify, tampered B %d/1000 accepted, forgeries %d/10000 accepted", honest_ok,
              tampered_accepted, forged_accepted)};
}

// Challenge injective in the public-key slot: a hashed challenge reduced
// into Z_101 collides with probability 1/101, which is not what is measured.
Outcome toy_exhaustive_detection() {
  using S = ToyGroup::Scalar;
  using E = ToyGroup::Element;
  int cases = 0, detected = 0, honest_ok = 0;
  for (std::uint32_t h : {1u, 13u, 57u}) {
    ToyGroup g;
    g.hash_to_group_stub = [h](ByteView) { return E(h); };
    g.hash_to_scalar_stub = [](std::string_view, std::span<const ByteView> parts) { return S(parts[1][0]); };
    const PrfInput x = PrfInput::from(Bytes(16, 1), Bytes(32, 2));
    for (std::uint32_t kd = 0; kd < 101; ++kd) {
      const E pk = S(kd) * g.generator();
      try {
        tprf_finish(g, x, S(4), pk, tprf_respond(g, x, S(kd)));
        ++honest_ok;
      } catch (const Error&) {
      }
      for (std::uint32_t wrong = 0; wrong < 101; ++wrong) {
        if (wrong == kd) continue;
        ++cases;
        try {
          tprf_finish(g, x, S(4), pk, tprf_respond(g, x, S(wrong)));
        } catch (const Error& e) {
          if (e.code() == ErrorCode::bad_proof) ++detected;
        }
      }
    }
  }
  return {detected == cases && honest_ok == 303,
          fmt("%d/%d wrong shares raised bad-proof, honest %d/303 accepted", detected, cases, honest_ok)};
}

Bytes pattern(std::size_t n, std::uint64_t seed) {
  Bytes out(n);
  std::mt19937_64 gen(seed);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t w = gen();
    std::memcpy(out.data() + i, &w, 8);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint8_t>(gen());
  return out;
}

Outcome round_trip() {
  DeploymentOptions o;
  o.seed = 104;
  o.cloud.trash_retention = std::chrono::seconds(0);
  Deployment d(o);
  d.enroll();
  int ok = 0, total = 0;
  for (std::size_t size : {std::size_t{0}, std::size_t{1}, std::size_t{100'000}, std::size_t{1'000'000},
                           std::size_t{10'000'000}}) {
    for (int trial = 0; trial < 20; ++trial) {
      ++total;
      const Bytes data = pattern(size, size * 31 + static_cast<std::uint64_t>(trial));
      const std::string name = "rt/" + std::to_string(size) + "/" + std::to_string(trial);
      d.primary().encrypt(name, data);
      if (d.primary().decrypt(name) == data) ++ok;
      d.primary().remove(name);
      d.cloud().purge_expired();
    }
  }
  return {ok == total, fmt("%d/%d byte-exact over sizes 0, 1, 100K, 1M, 10M", ok, total)};
}

Outcome refresh_epochs() {
  DeploymentOptions o;
  o.seed = 105;
  Deployment d(o);
  d.enroll();
  std::vector<Scalar> kc{d.primary().snapshot().own_share}, kd{d.secondary().snapshot().own_share};
  const Scalar phi = kc[0] + kd[0];
  std::vector<std::pair<std::string, Bytes>> files;
  int unreadable = 0, phi_drift = 0;
  for (int epoch = 1; epoch <= 100; ++epoch) {
    files.emplace_back("epoch/" + std::to_string(epoch - 1), pattern(64, static_cast<std::uint64_t>(epoch)));
    d.primary().encrypt(files.back().first, files.back().second);
    d.primary().refresh();
    for (const auto& [name, data] : files) {
      if (d.primary().decrypt(name) != data) ++unreadable;
    }
    kc.push_back(d.primary().snapshot().own_share);
    kd.push_back(d.secondary().snapshot().own_share);
    if (!(reconstruct(kc.back(), kd.back()) == phi)) ++phi_drift;
  }
  int pairs = 0, mixed_hits = 0;
  for (std::size_t i = 0; i < kc.size(); ++i) {
    for (std::size_t j = 0; j < kd.size(); ++j) {
      if (i == j) continue;
      ++pairs;
      if (reconstruct(kc[i], kd[j]) == phi) ++mixed_hits;
    }
  }
  return {unreadable == 0 && phi_drift == 0 && mixed_hits == 0 && d.cloud().vault("alice").epoch == 100,
          fmt("100 refreshes, %d unreadable decrypts, %d/%d cross-epoch pairs rebuild the secret", unreadable,
              mixed_hits, pairs)};
}

Outcome scenario_suite() {
  std::vector<ScenarioVerdict> verdicts;
  std::vector<std::string> problems;
  for (const auto& name : scenario_names()) {
    ScenarioVerdict a = run_scenario(name, 7);
    const ScenarioVerdict b = run_scenario(name, 7);
    if (!a.passed()) problems.push_back(name + " failed");
    if (a.wire_digest != b.wire_digest || verdict_json(a) != verdict_json(b)) {
      problems.push_back(name + " not deterministic");
    }
    verdicts.push_back(std::move(a));
  }
  // Recovering a device the adversary already holds hands back nothing new.
  for (const auto& v : verdicts) {
    if (v.name != "recover-primary-from-primary" && v.name != "recover-secondary-from-secondary") continue;
    const auto passed = [&](std::initializer_list<std::string_view> names) {
      return std::any_of(v.checks.begin(), v.checks.end(), [&](const ScenarioCheck& c) {
        return c.pass && std::find(names.begin(), names.end(), c.name) != names.end();
      });
    };
    const bool checked = passed({"released-values-already-held", "released-value-already-held"}) &&
                         passed({"capture-and-release-reveal-no-master-secret"});
    if (!checked) problems.push_back(v.name + " lacks the nothing-new check");
  }
  const auto unmet = unmet_table_cells(verdicts);
  if (!unmet.empty()) problems.push_back(std::to_string(unmet.size()) + " table cells unmet");
  std::string detail = fmt("%zu scenarios, seed 7 twice each", verdicts.size());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

Outcome reconstruction_identities() {
  DeploymentOptions o;
  o.seed = 107;
  int bad = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    o.seed = 107 + static_cast<std::uint64_t>(i);
    Deployment d(o);
    d.enroll();
    const DeviceState p = d.primary().snapshot(), s = d.secondary().snapshot();
    const auto vault = d.cloud().vault("alice");
    const Scalar phi = p.own_share + s.own_share;
    const Scalar kc_s = *vault.primary, kd_s = *vault.secondary;
    // Cloud with the primary, cloud with the secondary, sub-shares alone.
    const bool ok = (p.own_share + p.held_sub_share) + kd_s == phi &&
                    (s.own_share + s.held_sub_share) + kc_s == phi &&
                    (kc_s + kd_s) + s.held_sub_share + p.held_sub_share == phi;
    if (!ok) ++bad;
  }
  return {bad == 0, fmt("1000 enrollments, %d violations, %.1f s", bad, seconds_since(t0))};
}

Outcome shared_randomness() {
  DeterministicRandom rng(108);
  int accepted = 0;
  {
    SeedSession init(SeedRole::initiator);
    const Commitment c = init.commit();
    const Bytes s0 = init.reveal(Bytes(32, 1));
    for (int i = 0; i < 10000; ++i) {
      SeedSession resp(SeedRole::responder);
      resp.respond(c);
      Bytes forged = s0;
      if (i % 2 == 0) {
        forged[static_cast<std::size_t>(i / 2) % 32] ^= static_cast<std::uint8_t>(1 + i % 255);
      } else {
        forged = random_vector(32);
      }
      try {
        resp.accept_reveal(forged);
        ++accepted;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::sr_abort || resp.state() != SeedState::aborted) ++accepted;
      }
    }
  }
  int not_xor = 0;
  std::vector<Bytes> seeds;
  seeds.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    SeedSession init(SeedRole::initiator), resp(SeedRole::responder);
    const Bytes s1 = resp.respond(init.commit());
    const Bytes s0 = init.reveal(s1);
    resp.accept_reveal(s0);
    Bytes x(kSeedBytes);
    for (std::size_t b = 0; b < kSeedBytes; ++b) x[b] = s0[b] ^ s1[b];
    if (init.seed() != x || resp.seed() != x) ++not_xor;
    seeds.push_back(init.seed());
  }
  const double p = testing::bit_balance_p(seeds);
  return {accepted == 0 && not_xor == 0 && p > 0.01,
          fmt("%d/10000 tampered reveals accepted, %d seeds differ from s0 xor s1, bit balance p=%.3f over 1e5",
              accepted, not_xor, p)};
}

Outcome bench_structure() {
  const BenchReport report = run_bench(BenchOptions{});
  std::vector<std::string> problems;
  std::string detail;
  for (const auto& s : report.slopes) {
    detail += fmt("%s/%s slope %.4f ms/MB [%.4f, %.4f]; ", s.transport.c_str(), s.op.c_str(), s.slope_ms_per_mb,
                  s.ci_low, s.ci_high);
    if (!s.contains_zero()) problems.push_back(s.transport + "/" + s.op + " slope CI excludes 0");
  }
  const auto counts = [&](const std::string& op) {
    auto it = report.message_counts.find(op);
    return it == report.message_counts.end() ? std::vector<std::size_t>{} : it->second;
  };
  if (counts("encrypt") != std::vector<std::size_t>{5}) problems.push_back("encrypt message count is not 5");
  if (counts("decrypt") != std::vector<std::size_t>{2}) problems.push_back("decrypt message count is not 2");
  for (const std::string transport : {"local", "tcp"}) {
    for (const std::string op : {"encrypt", "decrypt"}) {
      const auto& pooled = report.pooled(transport, op);
      detail += fmt("%s/%s compute median %.3f ms; ", transport.c_str(), op.c_str(), pooled.median_compute_ms);
      if (!(pooled.median_compute_ms < 250)) problems.push_back(transport + "/" + op + " compute median >= 250 ms");
    }
  }
  detail += "messages encrypt 5, decrypt 2";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// Policy audit: every TPRF_RESP the secondary sends must be matched by an
// earlier approve decision on its queue.
struct Audit {
  std::mutex mu;
  long balance = 0;
  long approvals = 0;
  long responses = 0;
  long unmatched = 0;
  long requests = 0;
};

class Fuzzer {
 public:
  Fuzzer(Deployment& d, std::uint64_t seed) : d_(d), gen_(seed) {
    as_primary_ = d.local().port(d.address_of("primary"));
    d.local().attach("mallory", nullptr, Identity::generate().public_bytes());
    mallory_ = d.local().port("mallory");
  }

  void run(int iterations) {
    for (int i = 0; i < iterations; ++i) {
      try {
        step(i);
      } catch (const Error&) {
      }
    }
  }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }
  Bytes bytes(std::size_t n) {
    Bytes b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(gen_());
    return b;
  }
  SessionId session() {
    SessionId s{};
    for (auto& v : s) v = static_cast<std::uint8_t>(gen_());
    return s;
  }
  Bytes tag() {
    switch (pick(4)) {
      case 0: return to_bytes(d_.primary().list().begin()->second);
      case 1: return Bytes(16, 0);
      case 2: return bytes(pick(40));
      default: return bytes(16);
    }
  }
  Bytes seed() { return pick(5) == 0 ? bytes(pick(64)) : bytes(32); }
  Flow flow() {
    static const Flow flows[] = {Flow::decrypt, Flow::encrypt, Flow::none,    Flow::enroll,  Flow::migrate,
                                 Flow::recover, Flow::refresh, Flow::session, Flow::pairing, Flow::storage};
    return pick(3) == 0 ? flows[pick(std::size(flows))] : (pick(2) ? Flow::decrypt : Flow::encrypt);
  }
  const std::string& secondary() { return address_; }

  void step(int i) {
    address_ = d_.address_of("secondary");
    Network& from = pick(8) == 0 ? *mallory_ : *as_primary_;
    switch (i % 7) {
      case 0: {
        const auto listing = d_.primary().list();
        if (!listing.empty()) d_.primary().decrypt(listing.begin()->first);
        break;
      }
      case 1:
        d_.primary().encrypt("fuzz/" + std::to_string(i), bytes(pick(64)));
        break;
      case 2:
        from.request(secondary(), make_message(MessageType::tprf_req, flow(), session(), {tag(), seed()}));
        break;
      case 3: {
        // Coin toss then a derivation request with a chosen or honest seed.
        const SessionId sid = session();
        SeedSession init(SeedRole::initiator);
        const Commitment c = init.commit();
        const Message share = expect(
            from.request(secondary(), make_message(MessageType::sr_commit, Flow::encrypt, sid, {to_bytes(c)})),
            MessageType::sr_share);
        const Bytes s0 = init.reveal(share.field("s1"));
        Bytes reveal = s0;
        if (pick(4) == 0) reveal[pick(reveal.size())] ^= 1;
        from.send(secondary(), make_message(MessageType::sr_reveal, Flow::encrypt, sid, {reveal}));
        const Bytes s = pick(3) == 0 ? bytes(32) : init.seed();
        from.request(secondary(), make_message(MessageType::tprf_req, Flow::encrypt, sid, {tag(), s}));
        break;
      }
      case 4: {
        // Replayed or reused session ids.
        const SessionId sid = session();
        const Message m = make_message(MessageType::tprf_req, Flow::decrypt, sid, {tag(), seed()});
        try {
          from.request(secondary(), m);
        } catch (const Error&) {
        }
        from.request(secondary(), m);
        break;
      }
      case 5: {
        // Any message type with the right field count and random contents.
        const auto& table = message_table();
        const MessageSpec& spec = table[pick(table.size())];
        std::vector<Bytes> fields;
        for (std::size_t f = 0; f < spec.fields.size(); ++f) fields.push_back(bytes(pick(48)));
        from.request(secondary(), make_message(spec.type, flow(), session(), std::move(fields)));
        break;
      }
      default:
        from.request(secondary(), make_message(MessageType::tprf_req, Flow::decrypt, session(),
                                               {bytes(16), bytes(32)}));
        break;
    }
  }

  Deployment& d_;
  std::mt19937_64 gen_;
  std::unique_ptr<Network> as_primary_;
  std::unique_ptr<Network> mallory_;
  std::string address_;
};

Outcome policy_soundness() {
  std::vector<std::string> problems;
  std::string detail;
  for (double approve_rate : {0.0, 0.5}) {
    DeploymentOptions o;
    o.seed = 110;
    Deployment d(o);
    ApprovalQueue::Options qo;
    qo.expiry = std::chrono::seconds(5);
    ApprovalQueue queue(qo);
    DeviceOptions so;
    so.policy.mode = PolicyMode::prompt;
    so.approvals = &queue;
    d.add_secondary("secondary", so);

    Audit audit;
    bool armed = false;
    std::bernoulli_distribution approve(approve_rate);
    std::mt19937_64 coin(11);
    queue.add_observer([&](const ApprovalEvent& e) {
      if (e.kind == ApprovalEventKind::request) {
        const bool yes = !armed || approve(coin);
        queue.decide(e.request.id, yes);
      } else if (e.kind == ApprovalEventKind::decision && armed) {
        std::lock_guard lock(audit.mu);
        ++audit.requests;
        if (e.request.decision == Decision::approved) {
          ++audit.approvals;
          ++audit.balance;
        }
      }
    });
    const std::string sec = d.address_of("secondary");
    d.log().add_observer([&](const WireEvent& e) {
      if (!armed || e.type != MessageType::tprf_resp || e.from != sec) return;
      std::lock_guard lock(audit.mu);
      ++audit.responses;
      if (--audit.balance < 0) {
        ++audit.unmatched;
        audit.balance = 0;
      }
    });

    d.enroll();
    d.primary().encrypt("seed/file", to_bytes("corpus anchor"));
    armed = true;
    Fuzzer(d, 1000 + static_cast<std::uint64_t>(approve_rate * 100)).run(2000);
    armed = false;

    detail += fmt("approve rate %.1f: %ld prompts, %ld approvals, %ld responses, %ld unmatched; ", approve_rate,
                  audit.requests, audit.approvals, audit.responses, audit.unmatched);
    if (audit.unmatched != 0) problems.push_back("response without approval");
    if (approve_rate == 0.0 && audit.responses != 0) problems.push_back("response under deny-all");
    if (approve_rate > 0 && audit.responses == 0) problems.push_back("corpus never reached an approved response");
  }

  // Auto mode: every flow runs with nobody watching and no prompt is raised.
  {
    DeploymentOptions o;
    o.seed = 111;
    Deployment d(o);
    ApprovalQueue::Options qo;
    qo.expiry = std::chrono::seconds(2);
    ApprovalQueue pq(qo), sq(qo), sq2(qo), pq2(qo);
    DeviceOptions po, so;
    po.approvals = &pq;
    so.approvals = &sq;
    so.policy.mode = PolicyMode::auto_approve;
    d.add_primary("primary", po);
    d.add_secondary("secondary", so);
    bool done = false;
    try {
      d.enroll();
      const Bytes data = pattern(3 * kChunkSize + 5, 1);
      d.primary().encrypt("a", data);
      d.primary().encrypt("b", {});
      d.primary().refresh();
      d.primary().remove("b");
      d.primary().restore("b");
      d.set_online("secondary", false);
      DeviceOptions so2 = so;
      so2.approvals = &sq2;
      d.add_secondary("secondary2", so2);
      d.primary().replace_secondary(d.address_of("secondary2"), ReplaceMode::recover, "recovery words");
      d.set_online("primary", false);
      DeviceOptions po2 = po;
      po2.approvals = &pq2;
      auto& fresh = d.add_primary("primary2", po2);
      fresh.replace_primary(d.cloud_address(), d.cloud_identity(), "alice", d.address_of("secondary2"),
                            ReplaceMode::recover, "recovery words");
      done = fresh.decrypt("a") == data && fresh.decrypt("b").empty();
      fresh.encrypt("c", to_bytes("after"));
      done = done && fresh.decrypt("c") == to_bytes("after");
    } catch (const Error& e) {
      problems.push_back(std::string("auto suite stopped: ") + std::string(error_name(e.code())));
    }
    const std::size_t prompts = pq.requests().size() + sq.requests().size() + sq2.requests().size() +
                                pq2.requests().size();
    if (!done) problems.push_back("auto suite incomplete");
    if (prompts != 0) problems.push_back("auto mode raised a prompt");
    detail += fmt("auto suite %s with %zu prompts", done ? "completed" : "incomplete", prompts);
  }
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

struct Criterion {
  int number;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace twofe

int main(int argc, char** argv) {
  using namespace twofe;
  const std::vector<Criterion> criteria = {
      {1, "tprf-oracle-equivalence", tprf_oracle_equivalence},
      {2, "dleq-completeness-soundness", dleq_soundness},
      {3, "toy-exhaustive-detection", toy_exhaustive_detection},
      {4, "end-to-end-round-trip", round_trip},
      {5, "refresh-epoch-security", refresh_epochs},
      {6, "scenario-suite", scenario_suite},
      {7, "reconstruction-identities", reconstruction_identities},
      {8, "shared-randomness", shared_randomness},
      {9, "benchmark-structure", bench_structure},
      {10, "policy-soundness", policy_soundness},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    try {
      only.insert(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::cerr << "usage: " << argv[0] << " [criterion number...]\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const Error& e) {
      out = {false, std::string("threw ") + std::string(error_name(e.code())) + ": " + e.detail()};
    } catch (const std::exception& e) {
      out = {false, std::string("threw ") + e.what()};
    }
    if (!out.pass) ++failed;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.number << " " << c.name << " ("
              << fmt("%.1f s", seconds_since(t0)) << "): " << out.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
