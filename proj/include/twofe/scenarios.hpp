#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"

namespace twofe {

// One assertion inside a scenario run.
struct ScenarioCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// A security-comparison cell a scenario provides evidence for.
//   row:    "2FE" (no prompts) or "2FE with prompts"
//   column: "<confidentiality|availability>/<cloud|stolen|temporary|malware|forgotten-password>"
//   mark:   "yes" or "partial"
struct TableCell {
  std::string row;
  std::string column;
  std::string mark;
  friend bool operator==(const TableCell&, const TableCell&) = default;
};

// The marks claimed for 2FE in the security-comparison table.
const std::vector<TableCell>& claimed_table();

struct ScenarioVerdict {
  std::string name;
  std::string compromise;  // e.g. "stolen primary", "none"
  std::string summary;
  std::vector<ScenarioCheck> checks;
  std::vector<TableCell> cells;
  Bytes wire_digest;         // digest of every message exchanged
  std::string capture_json;  // what the adversary ended up holding
  bool passed() const;
};

// Six device compromises, four recovery attacks, then the cloud and
// forgotten-password cases.
const std::vector<std::string>& scenario_names();

// Runs one scenario on a fresh in-process deployment. Failures are reported
// in the verdict, never thrown (an unknown name throws usage).
ScenarioVerdict run_scenario(const std::string& name, std::uint64_t seed = 1);

// Stable JSON for golden files: name, compromise, check names and results,
// table cells. Digests and captures are left out.
std::string verdict_json(const ScenarioVerdict& v);

// Full record for reports, one line: adds details, digest and capture.
std::string verdict_record(const ScenarioVerdict& v);

// Cells of claimed_table() that no passing scenario evidences with the same
// mark, or that a failing scenario was supposed to evidence.
std::vector<TableCell> unmet_table_cells(const std::vector<ScenarioVerdict>& verdicts);

}  // namespace twofe
