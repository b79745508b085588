#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "twofe/bench.hpp"
#include "twofe/cloud.hpp"
#include "twofe/console.hpp"
#include "twofe/deployment.hpp"
#include "twofe/devices.hpp"
#include "twofe/error.hpp"
#include "twofe/scenarios.hpp"
#include "twofe/tcp_transport.hpp"
#include "twofe/wire.hpp"

namespace fs = std::filesystem;
using namespace twofe;

namespace {

// Options shared by every subcommand; all of them may come from --config.
struct Globals {
  std::string state = "twofe.state";
  std::string cloud;
  std::string cloud_identity;
  std::string peer;
  std::string listen = "127.0.0.1:0";
  std::string policy = "notify";
  std::vector<std::string> policy_overrides;  // "prefix=mode"
  int approval_window = 0;
  std::string console = "127.0.0.1:0";
  std::string account;
  bool yes = false;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

std::string require(const std::string& value, const std::string& what) {
  if (value.empty()) throw Error(ErrorCode::usage, what + " is required");
  return value;
}

Bytes hex_identity(const std::string& hex, const std::string& what) {
  const Bytes b = from_hex(require(hex, what));
  if (b.size() != 32) throw Error(ErrorCode::usage, what + " must be 64 hex characters");
  return b;
}

ApprovalPolicy make_policy(const Globals& g) {
  ApprovalPolicy p;
  p.mode = parse_policy_mode(g.policy);
  for (const auto& o : g.policy_overrides) {
    const auto eq = o.rfind('=');
    if (eq == std::string::npos) throw Error(ErrorCode::usage, "policy override must be prefix=mode: " + o);
    p.overrides[o.substr(0, eq)] = parse_policy_mode(o.substr(eq + 1));
  }
  p.approval_window = std::chrono::seconds(g.approval_window);
  return p;
}

std::function<bool(const std::string&)> sas_confirmer(bool yes) {
  return [yes](const std::string& sas) {
    std::cerr << "pairing code: " << sas << "\n";
    if (yes) return true;
    std::cerr << "does the other device show the same code? [y/N] " << std::flush;
    std::string answer;
    std::getline(std::cin, answer);
    return answer == "y" || answer == "Y" || answer == "yes";
  };
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

// A primary bound to its state file for one CLI invocation.
class PrimarySession {
 public:
  PrimarySession(const Globals& g, bool must_exist)
      : path_(state_path(g.state)), lock_(path_) {
    DeviceState state;
    if (fs::exists(path_)) {
      state = load_state(path_);
      if (state.role != Role::primary) throw Error(ErrorCode::usage, path_.string() + " is not a primary");
    } else if (must_exist) {
      throw Error(ErrorCode::not_enrolled, "no device state at " + path_.string());
    } else {
      state = fresh_device_state(Role::primary);
    }
    const std::string self = state.listen_address.empty() ? g.listen : state.listen_address;
    net_ = std::make_unique<TcpNetwork>(self, state.identity);
    DeviceOptions o;
    o.state_path = path_;
    o.policy = make_policy(g);
    o.confirm_sas = sas_confirmer(g.yes);
    device_ = std::make_unique<PrimaryDevice>(std::move(state), *net_, o);
  }

  PrimaryDevice& operator*() { return *device_; }
  PrimaryDevice* operator->() { return device_.get(); }

 private:
  fs::path path_;
  StateLock lock_;
  std::unique_ptr<TcpNetwork> net_;
  std::unique_ptr<PrimaryDevice> device_;
};

// Serves the primary between CLI invocations: each message runs against the
// state file as it is on disk, under the same lock the CLI takes.
class PrimaryEndpoint : public Endpoint {
 public:
  PrimaryEndpoint(Globals g, ApprovalQueue& queue, std::string self)
      : g_(std::move(g)), queue_(queue), self_(std::move(self)) {}

  std::optional<Message> handle(const Message& m, const PeerInfo& from) override {
    const fs::path path = state_path(g_.state);
    StateLock lock(path);
    DeviceState state = load_state(path);
    TcpNetwork net(self_, state.identity);
    DeviceOptions o;
    o.state_path = path;
    o.policy = make_policy(g_);
    o.approvals = &queue_;
    PrimaryDevice device(std::move(state), net, o);
    return device.handle(m, from);
  }

 private:
  Globals g_;
  ApprovalQueue& queue_;
  std::string self_;
};

void start_console(ConsoleServer& console, const std::string& address, const std::string& token) {
  const HostPort hp = parse_address(address);
  console.start(hp.host, hp.port);
  std::cout << "console http://" << hp.host << ":" << console.port() << "/requests?token=" << token << std::endl;
}

// --- daemons ---------------------------------------------------------------

int cmd_cloud(const Globals& g, const std::string& data_dir, bool fast_kdf) {
  CloudOptions o = fast_kdf ? DeploymentOptions::fast_cloud_options() : CloudOptions{};
  std::unique_ptr<BlobStore> blobs;
  Identity id;
  if (!data_dir.empty()) {
    o.data_dir = data_dir;
    fs::create_directories(data_dir);
    blobs = std::make_unique<DirectoryBlobStore>(fs::path(data_dir) / "blobs");
    const fs::path key = fs::path(data_dir) / "cloud.key";
    if (fs::exists(key)) {
      std::ifstream in(key);
      std::string hex;
      in >> hex;
      id = Identity::from_secret(from_hex(hex));
    } else {
      id = Identity::generate();
      std::ofstream(key) << to_hex(id.secret_key) << "\n";
      fs::permissions(key, fs::perms::owner_read | fs::perms::owner_write);
    }
  } else {
    blobs = std::make_unique<MemoryBlobStore>();
    id = Identity::generate();
  }
  block_signals();
  CloudService cloud(o, std::move(blobs));
  TcpServer server(cloud, id);
  const HostPort hp = parse_address(g.listen);
  server.start(hp.host, hp.port);
  TcpNetwork net(server.address(), id);
  cloud.set_network(&net);
  std::cout << "cloud " << server.address() << "\nidentity " << to_hex(id.public_key) << "\nfingerprint "
            << fingerprint(id.public_bytes()) << std::endl;
  wait_for_signal();
  server.stop();
  return 0;
}

int cmd_secondary(const Globals& g) {
  const fs::path path = state_path(g.state);
  DeviceState state = fs::exists(path) ? load_state(path) : fresh_device_state(Role::secondary);
  if (state.role != Role::secondary) throw Error(ErrorCode::usage, path.string() + " is not a secondary");
  ApprovalQueue::Options qo;
  qo.notification_log = fs::path(path.string() + ".notifications.jsonl");
  ApprovalQueue queue(qo);

  block_signals();
  const HostPort hp = parse_address(state.listen_address.empty() ? g.listen : state.listen_address);
  struct Forward : Endpoint {
    Endpoint* target = nullptr;
    std::optional<Message> handle(const Message& m, const PeerInfo& from) override { return target->handle(m, from); }
  } forward;
  TcpServer server(forward, state.identity);
  server.start(hp.host, hp.port);
  TcpNetwork net(server.address(), state.identity);
  DeviceOptions o;
  o.state_path = path;
  o.policy = make_policy(g);
  o.approvals = &queue;
  o.confirm_sas = sas_confirmer(g.yes);
  const Bytes identity = state.identity.public_bytes();
  SecondaryDevice device(std::move(state), net, o);
  forward.target = &device;

  const std::string token = new_pairing_token();
  ConsoleServer console(queue, token);
  std::cout << "secondary " << server.address() << "\nidentity " << to_hex(identity) << "\npolicy "
            << policy_mode_name(o.policy.mode) << std::endl;
  start_console(console, g.console, token);
  wait_for_signal();
  console.stop();
  server.stop();
  return 0;
}

int cmd_serve(const Globals& g) {
  DeviceState state;
  {
    StateLock lock(state_path(g.state));
    state = load_state(state_path(g.state));
  }
  if (state.role != Role::primary) throw Error(ErrorCode::usage, "serve runs a primary's state");
  ApprovalQueue queue;
  block_signals();
  const std::string address = require(state.listen_address, "a fixed --listen address at enrollment");
  PrimaryEndpoint endpoint(g, queue, address);
  TcpServer server(endpoint, state.identity);
  const HostPort hp = parse_address(address);
  server.start(hp.host, hp.port);
  const std::string token = new_pairing_token();
  ConsoleServer console(queue, token);
  std::cout << "primary " << server.address() << "\nidentity " << to_hex(state.identity.public_key) << std::endl;
  start_console(console, g.console, token);
  wait_for_signal();
  console.stop();
  server.stop();
  return 0;
}

// --- primary commands ------------------------------------------------------

int cmd_enroll(const Globals& g, const std::string& password, const std::string& secret, bool existing) {
  PrimarySession p(g, false);
  const std::string cloud = require(g.cloud, "--cloud");
  const Bytes cid = hex_identity(g.cloud_identity, "--cloud-identity");
  const std::string account = require(g.account, "--account");
  if (existing) {
    p->login(cloud, cid, account, require(password, "--password"));
  } else {
    p->create_account(cloud, cid, account, require(password, "--password"), require(secret, "--recovery-secret"));
  }
  p->enroll(require(g.peer, "--peer"));
  std::cout << "enrolled " << account << " as " << p->device_id() << "\n";
  return 0;
}

int cmd_login(const Globals& g, const std::string& password) {
  PrimarySession p(g, true);
  const DeviceState s = p->snapshot();
  p->login(s.cloud_address, s.cloud_identity, s.account, require(password, "--password"));
  return 0;
}

int cmd_put(const Globals& g, const std::string& file, std::string name) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + file);
  const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (name.empty()) name = fs::path(file).filename().string();
  PrimarySession p(g, true);
  const FileTag tag = p->encrypt(name, data);
  std::cout << to_hex(tag) << "  " << name << "\n";
  return 0;
}

int cmd_get(const Globals& g, const std::string& what, const std::string& out) {
  PrimarySession p(g, true);
  const Bytes data = p->decrypt(what);
  if (out.empty() || out == "-") {
    std::cout.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    std::cout.flush();
  } else {
    std::ofstream f(out, std::ios::binary);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error(ErrorCode::io, "cannot write " + out);
  }
  return 0;
}

int cmd_ls(const Globals& g) {
  PrimarySession p(g, true);
  for (const auto& [name, tag] : p->list()) std::cout << to_hex(tag) << "  " << name << "\n";
  return 0;
}

// migrate/recover secondary: run on the primary, `--peer` is the new secondary.
// migrate/recover primary: run on the new primary, `--peer` is the secondary.
int cmd_replace(const Globals& g, const std::string& device, ReplaceMode mode, const std::string& secret) {
  if (device != "primary" && device != "secondary") throw Error(ErrorCode::usage, "device must be primary or secondary");
  if (mode == ReplaceMode::recover) require(secret, "--recovery-secret");
  if (device == "secondary") {
    PrimarySession p(g, true);
    p->replace_secondary(require(g.peer, "--peer"), mode, secret);
  } else {
    PrimarySession p(g, false);
    if (p->snapshot().enrolled) throw Error(ErrorCode::duplicate_enrollment, "this primary is already enrolled");
    p->replace_primary(require(g.cloud, "--cloud"), hex_identity(g.cloud_identity, "--cloud-identity"),
                       require(g.account, "--account"), require(g.peer, "--peer"), mode, secret);
  }
  std::cout << replace_mode_name(mode) << " of " << device << " complete\n";
  return 0;
}

// --- harness ---------------------------------------------------------------

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t mult = 1;
    if (!item.empty() && (item.back() == 'K' || item.back() == 'k')) mult = 1000, item.pop_back();
    else if (!item.empty() && (item.back() == 'M' || item.back() == 'm')) mult = 1000'000, item.pop_back();
    try {
      out.push_back(std::stoull(item) * mult);
    } catch (const std::exception&) {
      throw Error(ErrorCode::usage, "bad size " + item);
    }
  }
  return out;
}

int cmd_bench(const std::string& sizes, std::size_t reps, const std::string& transport, std::uint64_t seed,
              std::size_t sweep) {
  BenchOptions o;
  o.cache_sweep_bytes = sweep;
  if (!sizes.empty()) o.sizes = parse_sizes(sizes);
  o.reps = reps;
  o.seed = seed;
  if (transport == "local") o.transports = {TransportKind::local};
  else if (transport == "tcp") o.transports = {TransportKind::tcp};
  else if (transport != "both") throw Error(ErrorCode::usage, "transport must be local, tcp or both");
  const BenchReport r = run_bench(o);
  for (const auto& line : r.records()) std::cout << line << "\n";
  std::cerr << r.table();
  return 0;
}

int cmd_scenario(std::vector<std::string> names, std::uint64_t seed, bool list) {
  if (list) {
    for (const auto& n : scenario_names()) std::cout << n << "\n";
    return 0;
  }
  const bool everything = names.empty();
  if (everything) names = scenario_names();
  std::vector<ScenarioVerdict> verdicts;
  bool ok = true;
  for (const auto& n : names) {
    verdicts.push_back(run_scenario(n, seed));
    const auto& v = verdicts.back();
    ok &= v.passed();
    std::cout << verdict_record(v) << "\n";
    std::size_t passed = 0;
    for (const auto& c : v.checks) passed += c.pass;
    std::fprintf(stderr, "%-34s %-48s %3zu/%-3zu %s\n", v.name.c_str(), v.compromise.c_str(), passed,
                 v.checks.size(), v.passed() ? "PASS" : "FAIL");
    for (const auto& c : v.checks) {
      if (!c.pass) std::fprintf(stderr, "    failed: %s %s\n", c.name.c_str(), c.detail.c_str());
    }
  }
  if (everything) {
    const auto unmet = unmet_table_cells(verdicts);
    std::fprintf(stderr, "table cells evidenced: %zu/%zu\n", claimed_table().size() - unmet.size(),
                 claimed_table().size());
    for (const auto& c : unmet) std::fprintf(stderr, "    unmet: %s %s %s\n", c.row.c_str(), c.column.c_str(), c.mark.c_str());
    ok &= unmet.empty();
  }
  return ok ? 0 : 1;
}

int cmd_schema(const std::string& out) {
  const std::string s = messages_schema();
  if (out.empty() || out == "-") {
    std::cout << s;
  } else {
    std::ofstream f(out);
    f << s;
    if (!f) throw Error(ErrorCode::io, "cannot write " + out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-factor file encryption: primary CLI, secondary daemon, cloud service and test harness"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file holding any of the global options");

  Globals g;
  g.state = env_or("TWOFE_STATE", g.state);
  app.add_option("--state", g.state, "device state file (TWOFE_STATE wins)");
  app.add_option("--cloud", g.cloud, "cloud address host:port");
  app.add_option("--cloud-identity", g.cloud_identity, "cloud identity key (hex)");
  app.add_option("--peer", g.peer, "other device's address host:port");
  app.add_option("--listen", g.listen, "address this node listens on");
  app.add_option("--policy", g.policy, "approval policy: auto, notify or prompt");
  app.add_option("--policy-override", g.policy_overrides, "per-prefix policy, e.g. private/=prompt");
  app.add_option("--approval-window", g.approval_window, "seconds an approval covers the same file");
  app.add_option("--console", g.console, "approval console address (loopback)");
  app.add_option("--account", g.account, "cloud account name");
  app.add_flag("--yes,-y", g.yes, "accept the pairing code without asking");

  std::string password = env_or("TWOFE_PASSWORD", "");
  std::string secret = env_or("TWOFE_RECOVERY_SECRET", "");
  const auto secrets = [&](CLI::App* c, bool with_secret) {
    c->add_option("--password", password, "account password (or TWOFE_PASSWORD)");
    if (with_secret) c->add_option("--recovery-secret", secret, "recovery secret (or TWOFE_RECOVERY_SECRET)");
  };

  std::string data_dir;
  bool fast_kdf = false;
  auto* cloud = app.add_subcommand("cloud", "run the cloud service");
  cloud->add_option("--data-dir", data_dir, "journal, blobs and identity key");
  cloud->add_flag("--fast-kdf", fast_kdf, "minimum Argon2id cost (testing only)");

  auto* secondary = app.add_subcommand("secondary", "run the secondary-device daemon and its approval console");
  auto* serve = app.add_subcommand("serve", "keep the primary reachable for migration approvals");

  bool existing = false;
  auto* enroll = app.add_subcommand("enroll", "create the account (or log in) and pair with the secondary");
  secrets(enroll, true);
  enroll->add_flag("--existing", existing, "log in to an existing account instead of creating one");
  auto* login = app.add_subcommand("login", "renew this primary's cloud session");
  secrets(login, false);

  std::string file, name, out, what;
  auto* put = app.add_subcommand("put", "encrypt a file and upload it");
  put->add_option("file", file, "file to upload")->required();
  put->add_option("--name", name, "catalog name (default: file name)");
  auto* get = app.add_subcommand("get", "download and decrypt a file");
  get->add_option("name", what, "file name or tag (hex)")->required();
  get->add_option("-o,--output", out, "output file (default: stdout)");
  auto* ls = app.add_subcommand("ls", "list files");
  auto* rm = app.add_subcommand("rm", "move a file to the trash");
  rm->add_option("name", what)->required();
  auto* restore = app.add_subcommand("restore", "bring a file back from the trash");
  restore->add_option("name", what)->required();
  auto* refresh = app.add_subcommand("refresh", "re-randomize both devices' shares");

  std::string device;
  auto* migrate = app.add_subcommand("migrate", "move a device's share with the old device's approval");
  migrate->add_option("device", device, "primary or secondary")->required();
  auto* recover = app.add_subcommand("recover", "replace a lost device using the recovery secret");
  recover->add_option("device", device, "primary or secondary")->required();
  secrets(recover, true);
  std::string target;
  auto* invalidate = app.add_subcommand("invalidate", "end a device's cloud session");
  invalidate->add_option("target", target, "device id, primary or secondary (default: this device)");
  auto* reset = app.add_subcommand("reset-password", "set a new password using the recovery secret");
  secrets(reset, true);

  std::string sizes, transport = "both";
  std::size_t reps = 20;
  std::uint64_t seed = 1;
  auto* bench = app.add_subcommand("bench", "time key derivation across file sizes");
  bench->add_option("--sizes", sizes, "comma-separated sizes, K/M suffixes (default 100K,1M,5M,10M)");
  bench->add_option("--reps", reps, "samples per size and operation");
  bench->add_option("--transport", transport, "local, tcp or both");
  bench->add_option("--seed", seed, "size-order shuffle seed");
  std::size_t sweep = BenchOptions{}.cache_sweep_bytes;
  bench->add_option("--cache-sweep", sweep, "bytes swept through the cache before each derivation (0: off)");

  std::vector<std::string> names;
  bool list = false;
  auto* scenario = app.add_subcommand("scenario", "run adversary scenarios");
  scenario->add_option("names", names, "scenarios to run (default: all)");
  scenario->add_option("--seed", seed, "deployment seed");
  scenario->add_flag("--list", list, "list scenario names");

  auto* schema = app.add_subcommand("schema", "print the wire message schema");
  schema->add_option("-o,--output", out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCode::usage);
  }

  try {
    if (*cloud) return cmd_cloud(g, data_dir, fast_kdf);
    if (*secondary) return cmd_secondary(g);
    if (*serve) return cmd_serve(g);
    if (*enroll) return cmd_enroll(g, password, secret, existing);
    if (*login) return cmd_login(g, password);
    if (*put) return cmd_put(g, file, name);
    if (*get) return cmd_get(g, what, out);
    if (*ls) return cmd_ls(g);
    if (*rm) {
      PrimarySession p(g, true);
      p->remove(what);
      return 0;
    }
    if (*restore) {
      PrimarySession p(g, true);
      p->restore(what);
      return 0;
    }
    if (*refresh) {
      PrimarySession p(g, true);
      p->refresh();
      return 0;
    }
    if (*migrate) return cmd_replace(g, device, ReplaceMode::migrate, {});
    if (*recover) return cmd_replace(g, device, ReplaceMode::recover, secret);
    if (*invalidate) {
      PrimarySession p(g, true);
      p->invalidate(target);
      return 0;
    }
    if (*reset) {
      PrimarySession p(g, true);
      p->reset_password(p->snapshot().account, require(password, "--password"), require(secret, "--recovery-secret"));
      return 0;
    }
    if (*bench) return cmd_bench(sizes, reps, transport, seed, sweep);
    if (*scenario) return cmd_scenario(names, seed, list);
    if (*schema) return cmd_schema(out);
  } catch (const Error& e) {
    std::cerr << "twofe: " << error_name(e.code()) << ": " << e.detail() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "twofe: internal: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::internal);
  }
  return static_cast<int>(ErrorCode::usage);
}
