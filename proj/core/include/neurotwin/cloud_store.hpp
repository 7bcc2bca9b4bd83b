#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neurotwin/packet.hpp"

namespace neurotwin::fog {

struct StoredRecord {
  Packet packet;
  double risk_high_prob = 0.0;
  std::int64_t received_utc_ms = 0;

  bool operator==(const StoredRecord&) const = default;
};

enum class PublishStatus { stored, duplicate, unavailable, ack_lost };

/// In-process stand-in for the cloud broker + table: an append-only record
/// log with a (device_id, seq) index. Every record is stored at most once.
/// Fault injection hooks let tests force outages and lost acknowledgements.
class CloudStore {
 public:
  CloudStore() = default;
  /// Appends each stored record as one JSON line to `log_path`.
  explicit CloudStore(const std::filesystem::path& log_path);

  PublishStatus publish(const StoredRecord& record);

  bool contains(const std::string& device_id, std::uint64_t seq) const;
  std::size_t size() const { return records_.size(); }
  const std::vector<StoredRecord>& records() const { return records_; }
  std::vector<StoredRecord> records_for(const std::string& device_id) const;

  void fail_next(int n) { fail_next_ = n; }
  void lose_next_acks(int n) { lose_acks_ = n; }

  static std::string to_json_line(const StoredRecord& record);
  static StoredRecord from_json_line(std::string_view line);

 private:
  std::vector<StoredRecord> records_;
  std::map<std::pair<std::string, std::uint64_t>, std::size_t> index_;
  std::optional<std::ofstream> log_;
  int fail_next_ = 0;
  int lose_acks_ = 0;
};

}  // namespace neurotwin::fog
