#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace funsearch {

/// Append-only JSONL event log of a run. Every event carries `seq`
/// (monotonic from 1), `type`, `wall_time` (Unix seconds) and
/// `relative_total`. Events are also kept in memory for replay.
class RunLedger {
 public:
  RunLedger() = default;
  /// Truncates and appends to `path`.
  explicit RunLedger(const std::string& path);

  /// Throws ValidationError for an unknown event type. Returns the event.
  nlohmann::json append(const std::string& type, nlohmann::json fields, double relative_total);

  std::vector<nlohmann::json> events() const;
  std::uint64_t counter() const;
  std::size_t count(const std::string& type) const;

  static const std::vector<std::string>& event_types();
  /// Parses a ledger file. Throws FormatError on a malformed line.
  static std::vector<nlohmann::json> read(const std::string& path);

 private:
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<nlohmann::json> events_;
  std::uint64_t seq_ = 0;
};

}  // namespace funsearch
