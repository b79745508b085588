#include <cstdio>

#include "json.hpp"
#include "twofe/wire.hpp"

namespace twofe {

std::string messages_schema() {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& spec : message_table()) {
    char code[8];
    std::snprintf(code, sizeof code, "0x%02x", static_cast<unsigned>(spec.type));
    nlohmann::ordered_json fields = nlohmann::ordered_json::array();
    for (auto f : spec.fields) fields.push_back(std::string(f));
    messages.push_back({{"type", code},
                        {"name", std::string(spec.name)},
                        {"direction", std::string(spec.direction)},
                        {"fields", fields}});
  }
  nlohmann::ordered_json flows = nlohmann::ordered_json::object();
  for (int f = 0; f <= static_cast<int>(Flow::storage); ++f) {
    flows[std::string(flow_name(static_cast<Flow>(f)))] = f;
  }
  nlohmann::ordered_json doc = {
      {"version", kWireVersion},
      {"envelope", "version:1 | flow:1 | session_id:16 | type:1 | fields (each be32 len || bytes)"},
      {"flows", flows},
      {"messages", messages},
  };
  return doc.dump(2) + "\n";
}

}  // namespace twofe
