#include "funsearch/run_ledger.hpp"

#include <algorithm>
#include <chrono>

#include "funsearch/errors.hpp"

namespace funsearch {

using nlohmann::json;

RunLedger::RunLedger(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw ConfigError("cannot open ledger file " + path);
}

const std::vector<std::string>& RunLedger::event_types() {
  static const std::vector<std::string> types = {"seed",     "sample", "llm_response", "extraction_fail",
                                                 "safety_reject", "eval", "register", "reset",
                                                 "best_update",   "halt"};
  return types;
}

json RunLedger::append(const std::string& type, json fields, double relative_total) {
  const auto& types = event_types();
  if (std::find(types.begin(), types.end(), type) == types.end()) {
    throw ValidationError("unknown ledger event type '" + type + "'");
  }
  if (fields.is_null()) fields = json::object();
  const double wall =
      std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  std::lock_guard lock(mu_);
  fields["seq"] = ++seq_;
  fields["type"] = type;
  fields["wall_time"] = wall;
  fields["relative_total"] = relative_total;
  if (out_.is_open()) {
    out_ << fields.dump() << '\n';
    out_.flush();
  }
  events_.push_back(fields);
  return fields;
}

std::vector<json> RunLedger::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::uint64_t RunLedger::counter() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::size_t RunLedger::count(const std::string& type) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(), [&](const json& e) { return e.at("type") == type; }));
}

std::vector<json> RunLedger::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ledger file " + path);
  std::vector<json> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace funsearch
