#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "neurotwin/cloud_store.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::fog {

class DeviceRegistry {
 public:
  /// Keys must be exactly 32 bytes.
  void add(const std::string& device_id, std::vector<std::uint8_t> key);
  const std::vector<std::uint8_t>* find(std::string_view device_id) const;
  std::size_t size() const { return keys_.size(); }

  /// Lines `device_id<TAB>hex_key`; blank lines and `#` comments skipped.
  static DeviceRegistry parse(std::string_view text);
  static DeviceRegistry load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::map<std::string, std::vector<std::uint8_t>, std::less<>> keys_;
};

/// Two-class softmax over raw features. Row 0 = low risk, row 1 = high risk.
struct RiskModel {
  Eigen::Matrix<double, 2, 11> weights = Eigen::Matrix<double, 2, 11>::Zero();
  Eigen::Vector2d bias = Eigen::Vector2d::Zero();

  static RiskModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// softmax(W x + b); throws NumericError on non-finite logits.
std::array<double, 2> risk_score(std::span<const double> features, const RiskModel& model);

std::string sign(const Packet& packet, std::span<const std::uint8_t> key);

enum class MacCheck { valid, invalid, unknown_device };

MacCheck verify(const Packet& packet, const DeviceRegistry& registry);

/// |now - timestamp| <= window, symmetric.
bool validate_timestamp(const Packet& packet, std::int64_t now_utc_ms, std::int64_t window_ms);

/// Eleven finite features and a well-formed MAC string.
bool validate_schema(const Packet& packet);

enum class GateAction { forward, park, reject };

enum class GateReason {
  authenticated_forwarded,
  below_threshold,
  bad_hmac,
  stale_timestamp,
  bad_schema,
  unknown_device,
  duplicate,
  store_unavailable,
};

std::string_view to_string(GateAction a);
std::string_view to_string(GateReason r);

struct GateConfig {
  double threshold = 0.75;
  std::int64_t freshness_ms = 5000;
};

struct GateDecision {
  double risk_high_prob = 0.0;  // only meaningful once the risk stage ran
  bool risk_evaluated = false;
  GateAction action = GateAction::reject;
  GateReason reason = GateReason::bad_schema;
};

/// verify -> timestamp -> schema -> risk; the first failing stage decides.
GateDecision gate(const Packet& packet, const DeviceRegistry& registry, const RiskModel& model,
                  std::int64_t now_utc_ms, const GateConfig& config = {});

struct RetryPolicy {
  int max_attempts = 3;
};

enum class DeliveryStatus { delivered, duplicate, parked_store_unavailable };

struct DeliveryReceipt {
  DeliveryStatus status = DeliveryStatus::delivered;
  int attempts = 0;
};

/// Publishes until acknowledged. A duplicate ack after an attempt whose ack
/// was lost counts as delivery by this call. Throws std::logic_error if the
/// decision is not a forward.
DeliveryReceipt forward_exactly_once(const GateDecision& decision, const Packet& packet,
                                     CloudStore& store, std::int64_t received_utc_ms,
                                     const RetryPolicy& retry = {});

struct ParkedRecord {
  Packet packet;
  GateReason reason;
  double risk_high_prob;
};

struct NodeCounters {
  std::size_t input = 0;
  std::size_t forwarded = 0;
  std::size_t parked = 0;
  std::size_t rejected = 0;
  std::map<GateReason, std::size_t> by_reason;
};

struct NodeOutcome {
  GateDecision decision;
  std::optional<DeliveryReceipt> receipt;
};

/// Stateful fog node around the pure gate: keeps the park store, remembers
/// accepted (device, seq) pairs so replays are rejected as duplicates, and
/// forwards high-risk packets to the cloud store.
class FogNode {
 public:
  FogNode(DeviceRegistry registry, RiskModel model, GateConfig config, CloudStore& store,
          RetryPolicy retry = {});

  NodeOutcome process(const Packet& packet, std::int64_t now_utc_ms);

  /// Undecodable frames are rejected with bad_schema.
  NodeOutcome process_frame(std::string_view frame, std::int64_t now_utc_ms);

  const NodeCounters& counters() const { return counters_; }
  const std::vector<ParkedRecord>& parked() const { return parked_; }
  const GateConfig& config() const { return config_; }

 private:
  NodeOutcome record(NodeOutcome outcome, const Packet* packet);

  DeviceRegistry registry_;
  RiskModel model_;
  GateConfig config_;
  CloudStore& store_;
  RetryPolicy retry_;
  std::set<std::pair<std::string, std::uint64_t>> seen_;
  std::vector<ParkedRecord> parked_;
  NodeCounters counters_;
};

}  // namespace neurotwin::fog
