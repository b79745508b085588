#include "twofe/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "twofe/deployment.hpp"
#include "twofe/error.hpp"
#include "twofe/file_crypto.hpp"
#include "twofe/hashing.hpp"
#include "twofe/ristretto.hpp"
#include "twofe/tprf.hpp"

namespace twofe {

namespace {

using nlohmann::ordered_json;

const Ristretto255& group() {
  static const Ristretto255 g;
  return g;
}

const std::string kAccount = "alice";
const std::string kPassword = "correct horse";
const std::string kSecret = "recovery words";
const std::string kPlain = "2FE";
const std::string kPrompts = "2FE with prompts";

Bytes text(std::string_view s) { return to_bytes(s); }

bool contains(ByteView hay, ByteView needle) {
  if (needle.empty() || hay.size() < needle.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// True when some non-empty subset of `xs` sums to `target`.
bool some_subset_sums_to(const std::vector<Scalar>& xs, const Scalar& target) {
  if (xs.size() > 20) throw Error(ErrorCode::internal, "too many scalars for an exhaustive subset check");
  for (std::uint32_t mask = 1; mask < (1u << xs.size()); ++mask) {
    Scalar sum;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (mask & (1u << i)) sum += xs[i];
    }
    if (sum == target) return true;
  }
  return false;
}

// Scalars carried in a message's share-bearing fields.
std::vector<Scalar> scalars_in(const Message& m) {
  static const std::set<std::string_view> kShareFields = {"sub_share", "held_sub_share", "delta"};
  std::vector<Scalar> out;
  const auto& spec = message_spec(m.type);
  for (std::size_t i = 0; i < spec.fields.size(); ++i) {
    if (kShareFields.count(spec.fields[i]) && m.fields[i].size() == 32) out.push_back(Scalar::decode(m.fields[i]));
  }
  return out;
}

std::vector<Scalar> state_scalars(const DeviceState& s) {
  return {s.own_share, s.sub_share_peer, s.sub_share_cloud, s.held_sub_share};
}

ordered_json scalars_json(const std::vector<std::pair<std::string, Scalar>>& named) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : named) j[k] = to_hex(v.encode());
  return j;
}

ordered_json state_json(const DeviceState& s) {
  return scalars_json({{"own_share", s.own_share},
                       {"sub_share_peer", s.sub_share_peer},
                       {"sub_share_cloud", s.sub_share_cloud},
                       {"held_sub_share", s.held_sub_share}});
}

struct CloudRecord {
  Seed seed{};
  std::vector<Bytes> chunks;
};

// What anyone holding a live token can pull from the cloud.
CloudRecord fetch_record(Network& net, const std::string& cloud, ByteView token, const FileTag& tag) {
  const Message data =
      expect(net.request(cloud, make_message(MessageType::file_get, Flow::storage, new_session_id(),
                                             {Bytes(token.begin(), token.end()), to_bytes(tag)})),
             MessageType::file_data);
  CloudRecord r;
  r.seed = to_array<32>(data.field("seed"));
  ByteReader reader(data.field("ciphertext"));
  r.chunks.resize(reader.u32());
  for (auto& c : r.chunks) c = reader.field();
  return r;
}

// Tries every candidate as the master secret; true when none opens the file.
bool every_guess_fails(const CloudRecord& r, const FileTag& tag, const std::vector<Scalar>& candidates) {
  const PrfInput x = PrfInput::from(tag, r.seed);
  for (const auto& m : candidates) {
    try {
      decrypt_file(tprf_oracle(group(), x, m), r.chunks, tag);
      return false;
    } catch (const Error&) {
    }
  }
  return true;
}

std::vector<Scalar> subset_sums(const std::vector<Scalar>& xs) {
  std::vector<Scalar> out;
  for (std::uint32_t mask = 1; mask < (1u << xs.size()); ++mask) {
    Scalar sum;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (mask & (1u << i)) sum += xs[i];
    }
    out.push_back(sum);
  }
  return out;
}

std::size_t count_type(const WireLog& log, MessageType t, const std::string& to = {}) {
  std::size_t n = 0;
  for (const auto& e : log.events()) {
    if (e.type == t && (to.empty() || e.to == to)) ++n;
  }
  return n;
}

class Recorder {
 public:
  explicit Recorder(ScenarioVerdict& v) : v_(v) {}

  bool check(const std::string& name, bool pass, const std::string& detail = {}) {
    v_.checks.push_back({prefix_ + name, pass, detail});
    return pass;
  }

  template <class F>
  bool ok(const std::string& name, F&& f) {
    try {
      f();
      return check(name, true);
    } catch (const std::exception& e) {
      return check(name, false, e.what());
    }
  }

  template <class F>
  bool fails_with(const std::string& name, ErrorCode want, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      return check(name, e.code() == want, e.code() == want ? std::string() : std::string("got ") + e.what());
    } catch (const std::exception& e) {
      return check(name, false, e.what());
    }
    return check(name, false, "succeeded; expected " + std::string(error_name(want)));
  }

  template <class F>
  bool fails(const std::string& name, F&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      return check(name, true, e.what());
    }
    return check(name, false, "succeeded");
  }

  void cell(const std::string& row, const std::string& column, const std::string& mark) {
    v_.cells.push_back({row, column, mark});
  }
  void set_prefix(std::string p) { prefix_ = std::move(p); }

 private:
  ScenarioVerdict& v_;
  std::string prefix_;
};

// Approves prompts on `q` while `*approve` holds, denies them otherwise.
void answer(ApprovalQueue& q, const bool* approve) {
  q.add_observer([&q, approve](const ApprovalEvent& e) {
    if (e.kind == ApprovalEventKind::request) q.decide(e.request.id, *approve);
  });
}

// An enrolled deployment with two files written before any compromise.
struct World {
  Deployment d;
  bool approve_at_primary = true;
  bool approve_at_secondary = true;
  std::map<std::string, Bytes> files;
  std::map<std::string, FileTag> tags;
  Scalar phi;
  std::unique_ptr<Network> eve;

  World(std::uint64_t seed, PolicyMode mode) : d(options(seed)) {
    DeviceOptions so;
    so.policy.mode = mode;
    answer(d.add_secondary("secondary", so).approvals(), &approve_at_secondary);
    answer(d.add_primary("primary").approvals(), &approve_at_primary);
    d.enroll(kAccount, kPassword, kSecret);
    phi = d.primary().snapshot().own_share + d.secondary().snapshot().own_share;
    put(d.primary(), "pre/report.txt", "quarterly numbers: 4, 8, 15, 16, 23, 42");
    put(d.primary(), "pre/photo.jpg", std::string(3000, 'p'));
    eve = d.local().port("eve");
  }

  static DeploymentOptions options(std::uint64_t seed) {
    DeploymentOptions o;
    o.seed = seed;
    return o;
  }

  void put(PrimaryDevice& p, const std::string& name, const std::string& content) {
    files[name] = text(content);
    tags[name] = p.encrypt(name, files[name]);
  }

  PrimaryDevice& add_primary(const std::string& name) {
    auto& p = d.add_primary(name);
    answer(p.approvals(), &approve_at_primary);
    return p;
  }
  SecondaryDevice& add_secondary(const std::string& name) {
    auto& s = d.add_secondary(name);
    answer(s.approvals(), &approve_at_secondary);
    return s;
  }

  // The user's files, byte-exact, through `p`.
  bool all_readable(PrimaryDevice& p, const std::vector<std::string>& names = {}) {
    for (const auto& [name, data] : files) {
      if (!names.empty() && std::find(names.begin(), names.end(), name) == names.end()) continue;
      if (p.decrypt(name) != data) return false;
    }
    return true;
  }

  void replace_primary(PrimaryDevice& fresh, ReplaceMode mode, const std::string& secret = kSecret) {
    fresh.replace_primary(d.cloud_address(), d.cloud_identity(), kAccount, d.address_of("secondary"), mode, secret);
  }
};

bool readable_or_record(Recorder& r, const std::string& name, World& w, PrimaryDevice& p,
                        const std::vector<std::string>& names = {}) {
  try {
    return r.check(name, w.all_readable(p, names));
  } catch (const std::exception& e) {
    return r.check(name, false, e.what());
  }
}

// ---------------------------------------------------------------------------
// Device compromises

void stolen_primary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "stolen primary";
  v.summary = "The primary's state file is taken. One share and its sub-shares reveal nothing about the master "
              "secret; the user recovers onto a new device and the stolen copy goes dead.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  const DeviceState cap = w.d.primary().snapshot();
  w.d.set_online("primary", false);
  const auto held = state_scalars(cap);

  r.check("capture-reveals-no-master-secret", !some_subset_sums_to(held, w.phi));
  const FileTag tag = w.tags.at("pre/report.txt");
  const CloudRecord rec = fetch_record(*w.eve, w.d.cloud_address(), cap.session_token, tag);
  r.check("offline-key-guesses-fail", every_guess_fails(rec, tag, subset_sums(held)));

  auto& fresh = w.add_primary("primary2");
  r.ok("user-recovers-onto-new-primary", [&] { w.replace_primary(fresh, ReplaceMode::recover); });

  auto& thief = w.d.adopt_primary("thief", cap);
  w.d.log().clear();
  r.fails("stolen-copy-cannot-decrypt", [&] { thief.decrypt("pre/report.txt"); });
  r.fails("stolen-copy-cannot-derive-directly", [&] { thief.decrypt_tag(tag); });
  r.check("no-evaluation-reaches-stolen-copy", count_type(w.d.log(), MessageType::tprf_resp, "thief") == 0);
  r.check("stolen-token-revoked", !w.d.cloud().token_live(cap.session_token));
  r.check("stolen-share-stale-after-refresh",
          !(cap.own_share + w.d.secondary().snapshot().own_share == w.phi));
  readable_or_record(r, "files-available-on-new-primary", w, fresh);

  for (const auto& row : {kPlain, kPrompts}) {
    r.cell(row, "confidentiality/stolen", "yes");
    r.cell(row, "availability/stolen", "yes");
  }
  v.capture_json = ordered_json{{"state", state_json(cap)}}.dump();
  v.wire_digest = w.d.log().digest();
}

void stolen_secondary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "stolen secondary";
  v.summary = "The secondary's state file is taken. Its share cannot decrypt anything, it cannot pass identity "
              "verification to take over the primary, and the user recovers onto a new secondary.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  const DeviceState cap = w.d.secondary().snapshot();
  w.d.set_online("secondary", false);
  const auto held = state_scalars(cap);

  r.check("capture-reveals-no-master-secret", !some_subset_sums_to(held, w.phi));
  const FileTag tag = w.tags.at("pre/report.txt");
  const CloudRecord rec = fetch_record(*w.eve, w.d.cloud_address(), cap.session_token, tag);
  r.check("offline-key-guesses-fail", every_guess_fails(rec, tag, subset_sums(held)));

  // The thief runs the stolen secondary and tries to enroll a primary of its own.
  w.d.adopt_secondary("thief", cap);
  auto& adv = w.d.add_primary("adversary");
  r.fails_with("takeover-by-recovery-refused", ErrorCode::old_device_responded, [&] {
    adv.replace_primary(w.d.cloud_address(), w.d.cloud_identity(), kAccount, w.d.address_of("thief"),
                        ReplaceMode::recover, "guess");
  });
  w.approve_at_primary = false;
  r.fails_with("takeover-by-migration-denied", ErrorCode::approval_denied, [&] {
    adv.replace_primary(w.d.cloud_address(), w.d.cloud_identity(), kAccount, w.d.address_of("thief"),
                        ReplaceMode::migrate);
  });
  w.approve_at_primary = true;
  r.check("no-vault-release", w.d.cloud().releases(kAccount) == 0);

  w.add_secondary("secondary2");
  r.ok("user-recovers-onto-new-secondary", [&] {
    w.d.primary().replace_secondary(w.d.address_of("secondary2"), ReplaceMode::recover, kSecret);
  });
  r.check("stolen-token-revoked", !w.d.cloud().token_live(cap.session_token));
  r.check("stolen-share-stale-after-refresh", !(cap.own_share + w.d.primary().snapshot().own_share == w.phi));
  readable_or_record(r, "files-available-after-recovery", w, w.d.primary());

  for (const auto& row : {kPlain, kPrompts}) {
    r.cell(row, "confidentiality/stolen", "yes");
    r.cell(row, "availability/stolen", "yes");
  }
  v.capture_json = ordered_json{{"state", state_json(cap)}}.dump();
  v.wire_digest = w.d.log().digest();
}

void temporary_primary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "temporary access to primary";
  v.summary = "Someone uses the unlocked primary. Without prompts they can read files (hence partial); with "
              "notifications the secondary records it; with prompts the user's denial stops them. Files they "
              "write stay readable.";
  Recorder r(v);
  Bytes digests;
  for (const PolicyMode mode : {PolicyMode::auto_approve, PolicyMode::notify, PolicyMode::prompt}) {
    r.set_prefix(std::string(policy_mode_name(mode)) + ":");
    World w(seed, mode);
    auto& p = w.d.primary();
    const auto shares = state_scalars(p.snapshot());
    const auto notes_before = w.d.secondary().approvals().notifications().size();

    // The adversary's session. The user is not watching the secondary.
    w.approve_at_secondary = false;
    w.d.log().clear();
    Bytes view;
    bool read = false;
    try {
      const Bytes got = p.decrypt("pre/report.txt");
      read = got == w.files.at("pre/report.txt");
      view.insert(view.end(), got.begin(), got.end());
    } catch (const Error&) {
    }
    bool planted = false;
    try {
      w.put(p, "adversary/planted.txt", "left behind");
      planted = true;
    } catch (const Error&) {
      w.files.erase("adversary/planted.txt");
    }
    for (const auto& [name, tag] : p.list()) view.insert(view.end(), name.begin(), name.end());
    const std::size_t responses = count_type(w.d.log(), MessageType::tprf_resp);
    w.approve_at_secondary = true;

    if (mode == PolicyMode::prompt) {
      r.check("adversary-read-refused", !read);
      r.check("adversary-write-refused", !planted);
      r.check("no-evaluation-without-approval", responses == 0);
    } else {
      r.check("adversary-reads-file", read);
      if (mode == PolicyMode::notify) {
        r.check("user-notified-of-each-derivation",
                w.d.secondary().approvals().notifications().size() >= notes_before + 2);
      }
    }
    bool leaked = false;
    for (const auto& s : shares) leaked |= contains(view, s.encode());
    r.check("no-share-material-in-adversary-view", !leaked);
    readable_or_record(r, "files-available-afterwards", w, p);
    digests = concat({digests, w.d.log().digest()});
  }
  r.set_prefix({});
  r.cell(kPlain, "confidentiality/temporary", "partial");
  r.cell(kPrompts, "confidentiality/temporary", "yes");
  r.cell(kPlain, "availability/temporary", "yes");
  r.cell(kPrompts, "availability/temporary", "yes");
  v.capture_json = ordered_json{{"state", nullptr}, {"note", "API responses only"}}.dump();
  v.wire_digest = to_bytes(sha256(digests));
}

void temporary_secondary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "temporary access to secondary";
  v.summary = "Someone uses the unlocked secondary. It cannot start a derivation, it sees tags and names but no "
              "key material, and any attempt to take over the primary needs the user's approval there.";
  Recorder r(v);
  Bytes digests;
  for (const PolicyMode mode : {PolicyMode::auto_approve, PolicyMode::prompt}) {
    r.set_prefix(std::string(policy_mode_name(mode)) + ":");
    World w(seed, mode);
    auto& s = w.d.secondary();
    std::vector<Scalar> shares = state_scalars(s.snapshot());
    for (const auto& sc : state_scalars(w.d.primary().snapshot())) shares.push_back(sc);
    const Bytes peer_before = s.snapshot().peer_identity;

    // The user keeps working meanwhile.
    r.check("user-still-reads", w.all_readable(w.d.primary()));

    Bytes view;
    for (const auto& q : s.approvals().requests()) view = concat({view, text(to_json(q))});
    for (const auto& n : s.approvals().notifications()) view = concat({view, text(to_json(n))});

    auto& adv = w.d.add_primary("adversary");
    w.approve_at_primary = false;
    r.fails_with("migration-of-primary-denied-by-user", ErrorCode::approval_denied, [&] {
      adv.replace_primary(w.d.cloud_address(), w.d.cloud_identity(), kAccount, w.d.address_of("secondary"),
                          ReplaceMode::migrate);
    });
    w.approve_at_primary = true;
    r.fails_with("recovery-of-primary-refused-while-online", ErrorCode::old_device_responded, [&] {
      adv.replace_primary(w.d.cloud_address(), w.d.cloud_identity(), kAccount, w.d.address_of("secondary"),
                          ReplaceMode::recover, "guess");
    });
    r.check("no-vault-release", w.d.cloud().releases(kAccount) == 0);
    r.check("secondary-still-bound-to-user-primary", s.snapshot().peer_identity == peer_before);
    r.check("adversary-device-not-enrolled", !adv.snapshot().enrolled);

    bool leaked = false;
    for (const auto& sc : shares) leaked |= contains(view, sc.encode());
    r.check("no-share-material-in-adversary-view", !leaked);
    readable_or_record(r, "files-available-afterwards", w, w.d.primary());
    digests = concat({digests, w.d.log().digest()});
  }
  r.set_prefix({});
  r.cell(kPlain, "confidentiality/temporary", "partial");
  r.cell(kPrompts, "confidentiality/temporary", "yes");
  r.cell(kPlain, "availability/temporary", "yes");
  r.cell(kPrompts, "availability/temporary", "yes");
  v.capture_json = ordered_json{{"state", nullptr}, {"note", "API responses only"}}.dump();
  v.wire_digest = to_bytes(sha256(digests));
}

void malware_primary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "malware on primary";
  v.summary = "Malware holds the primary's share, token and password and hooks its traffic. Without prompts it "
              "can read files; with prompts it cannot. Files written before infection survive cleanup, files "
              "written during infection do not (hence partial availability).";
  Recorder r(v);
  Bytes digests;
  ordered_json capture = ordered_json::object();
  for (const PolicyMode mode : {PolicyMode::auto_approve, PolicyMode::prompt}) {
    const std::string label(policy_mode_name(mode));
    r.set_prefix(label + ":");
    World w(seed, mode);
    const DeviceState cap = w.d.primary().snapshot();
    capture[label] = {{"state", state_json(cap)}, {"password", kPassword}, {"token", to_hex(cap.session_token)}};
    r.check("capture-reveals-no-master-secret", !some_subset_sums_to(state_scalars(cap), w.phi));

    // Malware asks for a derivation on its own.
    w.approve_at_secondary = false;
    w.d.log().clear();
    bool read = false;
    try {
      read = w.d.primary().decrypt("pre/report.txt") == w.files.at("pre/report.txt");
    } catch (const Error&) {
    }
    const std::size_t responses = count_type(w.d.log(), MessageType::tprf_resp);
    w.approve_at_secondary = true;
    if (mode == PolicyMode::prompt) {
      r.check("malware-read-refused", !read);
      r.check("no-evaluation-without-approval", responses == 0);
    } else {
      r.check("malware-reads-file", read);
    }

    // Malware trashes an old file and corrupts what the user writes now.
    r.ok("malware-deletes-old-file", [&] {
      expect(w.eve->request(w.d.cloud_address(),
                            make_message(MessageType::file_delete, Flow::storage, new_session_id(),
                                         {cap.session_token, to_bytes(w.tags.at("pre/photo.jpg"))})),
             MessageType::ok);
    });
    w.d.local().set_tamper("primary", [](Message& m, const std::string&) {
      if (m.type == MessageType::file_put) m.fields[3].back() ^= 0x01;
    });
    r.ok("user-writes-during-infection", [&] { w.put(w.d.primary(), "during/infection.txt", "fresh work"); });
    w.d.local().set_tamper("primary", nullptr);

    // Cleanup: reinstall onto a clean device, change the password.
    w.d.set_online("primary", false);
    auto& clean = w.add_primary("primary2");
    r.ok("user-recovers-onto-clean-primary", [&] { w.replace_primary(clean, ReplaceMode::recover); });
    r.ok("user-changes-password", [&] { clean.reset_password(kAccount, "new horse", kSecret); });
    r.fails_with("stolen-password-rejected", ErrorCode::auth_failure, [&] {
      clean.login(w.d.cloud_address(), w.d.cloud_identity(), kAccount, kPassword);
    });
    r.check("malware-token-revoked", !w.d.cloud().token_live(cap.session_token));
    r.check("malware-share-stale-after-refresh",
            !(cap.own_share + w.d.secondary().snapshot().own_share == w.phi));
    r.ok("trashed-file-restored", [&] { clean.restore("pre/photo.jpg"); });
    readable_or_record(r, "files-from-before-infection-available", w, clean, {"pre/report.txt", "pre/photo.jpg"});
    r.fails("file-written-during-infection-lost", [&] { clean.decrypt("during/infection.txt"); });
    digests = concat({digests, w.d.log().digest()});
  }
  r.set_prefix({});
  r.cell(kPlain, "confidentiality/malware", "partial");
  r.cell(kPrompts, "confidentiality/malware", "yes");
  r.cell(kPlain, "availability/malware", "partial");
  r.cell(kPrompts, "availability/malware", "partial");
  v.capture_json = capture.dump();
  v.wire_digest = to_bytes(sha256(digests));
}

void malware_secondary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "malware on secondary";
  v.summary = "Malware holds the secondary's share and tampers with its messages. A wrong evaluation is caught by "
              "the proof, a biased coin share does not fix the seed, and files stay available.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  const DeviceState cap = w.d.secondary().snapshot();
  r.check("capture-reveals-no-master-secret", !some_subset_sums_to(state_scalars(cap), w.phi));

  w.d.secondary().set_share_override([](const Scalar& k) { return k + Scalar::one(); });
  const std::size_t stored = w.d.cloud().file_count(kAccount, true);
  r.fails_with("wrong-share-caught-on-decrypt", ErrorCode::bad_proof,
               [&] { w.d.primary().decrypt("pre/report.txt"); });
  r.fails_with("wrong-share-caught-on-encrypt", ErrorCode::bad_proof,
               [&] { w.d.primary().encrypt("x", text("never stored")); });
  r.check("nothing-stored-under-bad-key", w.d.cloud().file_count(kAccount, true) == stored);
  w.d.secondary().set_share_override(nullptr);

  // A constant coin share from the secondary does not fix the seed.
  w.d.secondary().set_coin_override([] { return Bytes(32, 0); });
  r.ok("encrypt-under-biased-coin-share", [&] {
    w.put(w.d.primary(), "biased/a.txt", "one");
    w.put(w.d.primary(), "biased/b.txt", "two");
  });
  w.d.secondary().set_coin_override(nullptr);
  const Bytes token = w.d.primary().snapshot().session_token;
  const Seed sa = fetch_record(*w.eve, w.d.cloud_address(), token, w.tags.at("biased/a.txt")).seed;
  const Seed sb = fetch_record(*w.eve, w.d.cloud_address(), token, w.tags.at("biased/b.txt")).seed;
  r.check("seeds-stay-random", sa != sb && sa != Seed{} && sb != Seed{});
  readable_or_record(r, "files-available-while-infected", w, w.d.primary());

  w.d.set_online("secondary", false);
  w.add_secondary("secondary2");
  r.ok("user-replaces-secondary", [&] {
    w.d.primary().replace_secondary(w.d.address_of("secondary2"), ReplaceMode::recover, kSecret);
  });
  r.check("malware-share-stale-after-refresh", !(cap.own_share + w.d.primary().snapshot().own_share == w.phi));
  readable_or_record(r, "files-available-after-cleanup", w, w.d.primary());

  r.cell(kPlain, "confidentiality/malware", "partial");
  r.cell(kPrompts, "confidentiality/malware", "yes");
  v.capture_json = ordered_json{{"state", state_json(cap)}}.dump();
  v.wire_digest = w.d.log().digest();
}

// ---------------------------------------------------------------------------
// Recovery attacks

void primary_recovers_secondary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "adversary controls primary, recovers secondary";
  v.summary = "From the primary, the adversary tries to move the secondary's share to a device of its own. "
              "Migration needs the user on the old secondary, recovery is refused while it answers, and without "
              "the recovery secret verification fails until the account locks.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  auto& p = w.d.primary();
  auto& s = w.d.secondary();
  const Scalar kd = s.snapshot().own_share;

  w.add_secondary("adversary1");
  w.approve_at_secondary = false;
  r.fails_with("migration-denied-on-old-secondary", ErrorCode::approval_denied,
               [&] { p.replace_secondary(w.d.address_of("adversary1"), ReplaceMode::migrate); });
  w.approve_at_secondary = true;

  const auto alerts = s.approvals().notifications().size();
  w.add_secondary("adversary2");
  r.fails_with("recovery-refused-while-secondary-online", ErrorCode::old_device_responded,
               [&] { p.replace_secondary(w.d.address_of("adversary2"), ReplaceMode::recover, "guess"); });
  r.check("user-alerted-on-secondary", s.approvals().notifications().size() == alerts + 1);

  w.d.set_online("secondary", false);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "adversary" + std::to_string(3 + i);
    w.add_secondary(name);
    r.fails_with("verification-fails-" + std::to_string(i + 1), ErrorCode::verification_failed,
                 [&] { p.replace_secondary(w.d.address_of(name), ReplaceMode::recover, "guess " + name); });
  }
  w.add_secondary("adversary6");
  r.fails_with("account-locks-after-three-failures", ErrorCode::recovery_locked,
               [&] { p.replace_secondary(w.d.address_of("adversary6"), ReplaceMode::recover, kSecret); });
  r.check("no-vault-release", w.d.cloud().releases(kAccount) == 0);
  w.d.set_online("secondary", true);
  r.check("secondary-keeps-its-share", s.snapshot().enrolled && s.snapshot().own_share == kd);
  readable_or_record(r, "files-available", w, p);

  for (const auto& row : {kPlain, kPrompts}) r.cell(row, "confidentiality/stolen", "yes");
  v.capture_json = ordered_json{{"state", state_json(p.snapshot())}}.dump();
  v.wire_digest = w.d.log().digest();
}

void secondary_recovers_primary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "adversary controls secondary, recovers primary";
  v.summary = "From the secondary, the adversary tries to bring up a primary of its own. Migration needs the "
              "user on the old primary, recovery is refused while it answers, and verification fails without "
              "the recovery secret.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  auto& adv = w.d.add_primary("adversary");
  const auto via = [&](ReplaceMode mode, const std::string& secret) {
    adv.replace_primary(w.d.cloud_address(), w.d.cloud_identity(), kAccount, w.d.address_of("secondary"), mode,
                        secret);
  };
  w.approve_at_primary = false;
  r.fails_with("migration-denied-on-old-primary", ErrorCode::approval_denied,
               [&] { via(ReplaceMode::migrate, {}); });
  w.approve_at_primary = true;
  const auto alerts = w.d.primary().approvals().notifications().size();
  r.fails_with("recovery-refused-while-primary-online", ErrorCode::old_device_responded,
               [&] { via(ReplaceMode::recover, "guess"); });
  r.check("user-alerted-on-primary", w.d.primary().approvals().notifications().size() == alerts + 1);
  w.d.set_online("primary", false);
  r.fails_with("verification-fails-without-secret", ErrorCode::verification_failed,
               [&] { via(ReplaceMode::recover, "another guess"); });
  r.check("no-vault-release", w.d.cloud().releases(kAccount) == 0);
  r.check("adversary-device-not-enrolled", !adv.snapshot().enrolled);
  w.d.set_online("primary", true);
  readable_or_record(r, "files-available", w, w.d.primary());

  for (const auto& row : {kPlain, kPrompts}) r.cell(row, "confidentiality/stolen", "yes");
  v.capture_json = ordered_json{{"state", state_json(w.d.secondary().snapshot())}}.dump();
  v.wire_digest = w.d.log().digest();
}

void primary_recovers_primary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "adversary controls primary, recovers primary";
  v.summary = "The adversary approves a migration of the primary it holds onto another device of its own. This "
              "succeeds, but every released value was already on the compromised primary.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  const DeviceState cap = w.d.primary().snapshot();
  const DeviceState sec = w.d.secondary().snapshot();
  auto& adv = w.d.add_primary("adversary");
  w.d.log().clear();
  r.ok("migration-approved-by-adversary", [&] { w.replace_primary(adv, ReplaceMode::migrate); });

  std::vector<Scalar> released;
  bool foreign = false;
  for (const auto& e : w.d.log().events()) {
    if (e.to != w.d.address_of("adversary") || e.flow != Flow::migrate) continue;
    for (const auto& s : scalars_in(Message::decode(e.bytes))) released.push_back(s);
    for (const auto& s : {sec.own_share, sec.sub_share_cloud, sec.sub_share_peer}) foreign |= contains(e.bytes, s.encode());
  }
  const auto prior = state_scalars(cap);
  bool subset = !released.empty();
  for (const auto& s : released) subset &= std::find(prior.begin(), prior.end(), s) != prior.end();
  r.check("released-values-already-held", subset, std::to_string(released.size()) + " scalars released");
  r.check("released-values-rebuild-held-share",
          released.size() == 2 && released[0] + released[1] == cap.own_share);
  r.check("no-secondary-material-released", !foreign);
  std::vector<Scalar> all = prior;
  all.insert(all.end(), released.begin(), released.end());
  r.check("capture-and-release-reveal-no-master-secret", !some_subset_sums_to(all, w.phi));
  readable_or_record(r, "adversary-device-now-serves-files", w, adv);

  ordered_json out = ordered_json::array();
  for (const auto& sc : released) out.push_back(to_hex(sc.encode()));
  v.capture_json = ordered_json{{"state", state_json(cap)}, {"released", out}}.dump();
  v.wire_digest = w.d.log().digest();
}

void secondary_recovers_secondary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "adversary controls secondary, recovers secondary";
  v.summary = "The adversary approves a migration of the secondary it holds. The cloud releases the vault share "
              "only to the bound device and only once; it was already on the compromised secondary. The user "
              "then recovers and regains service.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  const DeviceState cap = w.d.secondary().snapshot();
  const Identity adv_id = Identity::generate();
  w.d.local().attach("adversary", nullptr, adv_id.public_bytes());
  auto adv = w.d.local().port("adversary");
  const std::string cloud = w.d.cloud_address();

  Message status;
  r.ok("migration-approved-by-adversary", [&] {
    status = expect(adv->request(cloud, make_message(MessageType::recover_req, Flow::migrate, new_session_id(),
                                                     {cap.session_token, u8_field(static_cast<std::uint8_t>(Role::secondary)),
                                                      text("migrate"), adv_id.public_bytes(), text("adversary"),
                                                      {}, {}})),
                    MessageType::recover_status);
  });
  const Bytes rid = status.fields.empty() ? Bytes{} : status.field("recovery_id");
  const auto fetch = [&](Network& net, const std::string& device) {
    return expect(net.request(cloud, make_message(MessageType::share_fetch, Flow::migrate, new_session_id(),
                                                  {text(kAccount), rid, text(device), text("adversary")})),
                  MessageType::share_release);
  };
  r.fails_with("release-refused-to-unbound-device", ErrorCode::auth_failure, [&] { fetch(*w.eve, "eve"); });
  std::vector<Scalar> released;
  r.ok("release-to-bound-device", [&] { released = scalars_in(fetch(*adv, "adversary")); });
  r.fails_with("release-not-replayable", ErrorCode::auth_failure, [&] { fetch(*adv, "adversary"); });
  r.check("exactly-one-release", w.d.cloud().releases(kAccount) == 1);

  const auto prior = state_scalars(cap);
  r.check("released-value-already-held",
          released.size() == 1 && std::find(prior.begin(), prior.end(), released[0]) != prior.end());
  std::vector<Scalar> all = prior;
  all.insert(all.end(), released.begin(), released.end());
  r.check("capture-and-release-reveal-no-master-secret", !some_subset_sums_to(all, w.phi));

  // Service stops; the user notices and recovers.
  r.fails("derivation-stops-after-takeover", [&] { w.d.primary().decrypt("pre/report.txt"); });
  w.add_secondary("secondary2");
  r.ok("user-recovers-secondary", [&] {
    w.d.primary().replace_secondary(w.d.address_of("secondary2"), ReplaceMode::recover, kSecret);
  });
  readable_or_record(r, "files-available-after-recovery", w, w.d.primary());

  v.capture_json = ordered_json{{"state", state_json(cap)}}.dump();
  v.wire_digest = w.d.log().digest();
}

// ---------------------------------------------------------------------------
// Cloud and password

void cloud_adversary(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "cloud provider";
  v.summary = "The cloud keeps everything it ever received across enrollment, files, refreshes and a device "
              "migration. Its vault scalars never combine to the master secret and it never sees an evaluation "
              "or a plaintext.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  w.put(w.d.primary(), "notes/plan.txt", "meet at noon");
  w.d.primary().refresh();
  w.d.primary().refresh();
  w.add_secondary("secondary2");
  r.ok("migration-completes", [&] {
    w.d.primary().replace_secondary(w.d.address_of("secondary2"), ReplaceMode::migrate);
  });
  readable_or_record(r, "files-readable", w, w.d.primary());

  const auto history = w.d.cloud().vault_history(kAccount);
  r.check("vault-history-reveals-no-master-secret", !some_subset_sums_to(history, w.phi),
          std::to_string(history.size()) + " scalars");
  const auto vault = w.d.cloud().vault(kAccount);
  const auto p = w.d.primary().snapshot();
  const auto s = w.d.secondary("secondary2").snapshot();
  r.check("vault-holds-only-cloud-sub-shares",
          vault.primary && vault.secondary && *vault.primary == p.sub_share_cloud &&
              *vault.secondary == s.sub_share_cloud);

  bool saw_evaluation = false;
  bool saw_plaintext = false;
  const std::string cloud = w.d.cloud_address();
  for (const auto& e : w.d.log().events()) {
    if (e.from != cloud && e.to != cloud) continue;
    saw_evaluation |= e.type == MessageType::tprf_req || e.type == MessageType::tprf_resp ||
                      e.type == MessageType::sr_commit || e.type == MessageType::sr_share;
    for (const auto& [name, data] : w.files) saw_plaintext |= contains(e.bytes, data) || contains(e.bytes, text(name));
  }
  r.check("cloud-never-sees-an-evaluation", !saw_evaluation);
  r.check("cloud-never-sees-plaintext-or-names", !saw_plaintext);

  const FileTag tag = w.tags.at("notes/plan.txt");
  const CloudRecord rec = fetch_record(*w.eve, cloud, p.session_token, tag);
  std::vector<Scalar> guesses = history;
  for (std::size_t i = 0; i < history.size(); ++i) {
    for (std::size_t j = i + 1; j < history.size(); ++j) guesses.push_back(history[i] + history[j]);
  }
  r.check("cloud-key-guesses-fail", every_guess_fails(rec, tag, guesses));

  for (const auto& row : {kPlain, kPrompts}) r.cell(row, "confidentiality/cloud", "yes");
  std::vector<std::pair<std::string, Scalar>> named;
  for (std::size_t i = 0; i < history.size(); ++i) named.emplace_back("vault_" + std::to_string(i), history[i]);
  v.capture_json = ordered_json{{"vault_history", scalars_json(named)}}.dump();
  v.wire_digest = w.d.log().digest();
}

void forgotten_password(ScenarioVerdict& v, std::uint64_t seed) {
  v.compromise = "none (forgotten password)";
  v.summary = "The user forgets the cloud password and resets it with the recovery secret; files stay readable.";
  Recorder r(v);
  World w(seed, PolicyMode::auto_approve);
  auto& p = w.d.primary();
  r.fails_with("login-without-password-fails", ErrorCode::auth_failure,
               [&] { p.login(w.d.cloud_address(), w.d.cloud_identity(), kAccount, "forgotten"); });
  r.fails_with("reset-with-wrong-secret-fails", ErrorCode::verification_failed,
               [&] { p.reset_password(kAccount, "new horse", "wrong words"); });
  r.ok("reset-with-recovery-secret", [&] { p.reset_password(kAccount, "new horse", kSecret); });
  r.fails_with("old-password-rejected", ErrorCode::auth_failure,
               [&] { p.login(w.d.cloud_address(), w.d.cloud_identity(), kAccount, kPassword); });
  r.ok("new-password-accepted", [&] { p.login(w.d.cloud_address(), w.d.cloud_identity(), kAccount, "new horse"); });
  readable_or_record(r, "files-available", w, p);
  for (const auto& row : {kPlain, kPrompts}) r.cell(row, "availability/forgotten-password", "yes");
  v.capture_json = "{}";
  v.wire_digest = w.d.log().digest();
}

using Runner = void (*)(ScenarioVerdict&, std::uint64_t);

const std::vector<std::pair<std::string, Runner>>& registry() {
  static const std::vector<std::pair<std::string, Runner>> r = {
      {"stolen-primary", stolen_primary},
      {"stolen-secondary", stolen_secondary},
      {"temporary-primary", temporary_primary},
      {"temporary-secondary", temporary_secondary},
      {"malware-primary", malware_primary},
      {"malware-secondary", malware_secondary},
      {"recover-secondary-from-primary", primary_recovers_secondary},
      {"recover-primary-from-secondary", secondary_recovers_primary},
      {"recover-primary-from-primary", primary_recovers_primary},
      {"recover-secondary-from-secondary", secondary_recovers_secondary},
      {"cloud-adversary", cloud_adversary},
      {"forgotten-password", forgotten_password},
  };
  return r;
}

ordered_json cell_json(const TableCell& c) { return {{"row", c.row}, {"column", c.column}, {"mark", c.mark}}; }

}  // namespace

const std::vector<TableCell>& claimed_table() {
  static const std::vector<TableCell> t = {
      {kPlain, "confidentiality/cloud", "yes"},
      {kPlain, "confidentiality/stolen", "yes"},
      {kPlain, "confidentiality/temporary", "partial"},
      {kPlain, "confidentiality/malware", "partial"},
      {kPlain, "availability/stolen", "yes"},
      {kPlain, "availability/temporary", "yes"},
      {kPlain, "availability/malware", "partial"},
      {kPlain, "availability/forgotten-password", "yes"},
      {kPrompts, "confidentiality/cloud", "yes"},
      {kPrompts, "confidentiality/stolen", "yes"},
      {kPrompts, "confidentiality/temporary", "yes"},
      {kPrompts, "confidentiality/malware", "yes"},
      {kPrompts, "availability/stolen", "yes"},
      {kPrompts, "availability/temporary", "yes"},
      {kPrompts, "availability/malware", "partial"},
      {kPrompts, "availability/forgotten-password", "yes"},
  };
  return t;
}

bool ScenarioVerdict::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, run] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

ScenarioVerdict run_scenario(const std::string& name, std::uint64_t seed) {
  const auto& reg = registry();
  const auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.first == name; });
  if (it == reg.end()) throw Error(ErrorCode::usage, "unknown scenario " + name);
  ScenarioVerdict v;
  v.name = name;
  try {
    it->second(v, seed);
  } catch (const std::exception& e) {
    v.checks.push_back({"scenario-completes", false, e.what()});
  }
  return v;
}

std::string verdict_json(const ScenarioVerdict& v) {
  ordered_json checks = ordered_json::array();
  for (const auto& c : v.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}});
  ordered_json cells = ordered_json::array();
  for (const auto& c : v.cells) cells.push_back(cell_json(c));
  const ordered_json j = {{"scenario", v.name},   {"compromise", v.compromise}, {"passed", v.passed()},
                          {"checks", checks},     {"table", cells}};
  return j.dump(2) + "\n";
}

std::string verdict_record(const ScenarioVerdict& v) {
  ordered_json checks = ordered_json::array();
  for (const auto& c : v.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  ordered_json cells = ordered_json::array();
  for (const auto& c : v.cells) cells.push_back(cell_json(c));
  const ordered_json j = {{"record", "scenario"},
                          {"scenario", v.name},
                          {"compromise", v.compromise},
                          {"passed", v.passed()},
                          {"summary", v.summary},
                          {"checks", checks},
                          {"table", cells},
                          {"wire_digest", to_hex(v.wire_digest)},
                          {"capture", v.capture_json.empty() ? ordered_json(nullptr) : ordered_json::parse(v.capture_json)}};
  return j.dump();
}

std::vector<TableCell> unmet_table_cells(const std::vector<ScenarioVerdict>& verdicts) {
  std::vector<TableCell> unmet;
  for (const auto& cell : claimed_table()) {
    bool evidenced = false;
    bool contradicted = false;
    for (const auto& v : verdicts) {
      if (std::find(v.cells.begin(), v.cells.end(), cell) == v.cells.end()) continue;
      evidenced = true;
      contradicted |= !v.passed();
    }
    if (!evidenced || contradicted) unmet.push_back(cell);
  }
  return unmet;
}

}  // namespace twofe
