#include "neurotwin/fog_gate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "neurotwin/error.hpp"
#include "neurotwin/hmac.hpp"
#include "neurotwin/tensor_file.hpp"

namespace neurotwin::fog {

void DeviceRegistry::add(const std::string& device_id, std::vector<std::uint8_t> key) {
  if (!valid_device_id(device_id)) throw InvalidSpecError("registry: invalid device id");
  if (key.size() != 32) throw InvalidSpecError("registry: key for " + device_id + " is not 32 bytes");
  keys_[device_id] = std::move(key);
}

const std::vector<std::uint8_t>* DeviceRegistry::find(std::string_view device_id) const {
  auto it = keys_.find(device_id);
  return it == keys_.end() ? nullptr : &it->second;
}

DeviceRegistry DeviceRegistry::parse(std::string_view text) {
  DeviceRegistry reg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("registry line " + std::to_string(lineno) + ": expected device_id<TAB>hex_key");
    }
    try {
      reg.add(line.substr(0, tab), from_hex(line.substr(tab + 1)));
    } catch (const Error& e) {
      throw ParseError("registry line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return reg;
}

DeviceRegistry DeviceRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read registry " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string DeviceRegistry::serialize() const {
  std::string out;
  for (const auto& [id, key] : keys_) out += id + "\t" + to_hex(key) + "\n";
  return out;
}

RiskModel RiskModel::load(const std::filesystem::path& path) {
  const auto tf = io::TensorFile::load(path);
  RiskModel m;
  m.weights = tf.get("risk.weights", 2, 11);
  m.bias = tf.get("risk.bias", 2, 1);
  return m;
}

void RiskModel::save(const std::filesystem::path& path) const {
  io::TensorFile tf;
  tf.set_meta("kind", "risk-model");
  tf.set_meta("classes", "low,high");
  tf.add("risk.weights", weights);
  tf.add("risk.bias", bias);
  tf.save(path);
}

std::array<double, 2> risk_score(std::span<const double> features, const RiskModel& model) {
  if (features.size() != 11) throw ShapeError("risk_score: expected 11 features");
  const Eigen::Map<const Eigen::Matrix<double, 11, 1>> x(features.data());
  const Eigen::Vector2d z = model.weights * x + model.bias;
  if (!std::isfinite(z[0]) || !std::isfinite(z[1])) throw NumericError("risk_score: non-finite logits");
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

std::string sign(const Packet& packet, std::span<const std::uint8_t> key) {
  if (key.size() != 32) throw InvalidSpecError("sign: key must be 32 bytes");
  return to_hex(hmac_sha256(key, canonical_mac_input(packet)));
}

MacCheck verify(const Packet& packet, const DeviceRegistry& registry) {
  const auto* key = registry.find(packet.device_id);
  if (key == nullptr) return MacCheck::unknown_device;
  const auto expected = sign(packet, *key);
  return constant_time_equal(expected, packet.hmac_hex) ? MacCheck::valid : MacCheck::invalid;
}

bool validate_timestamp(const Packet& packet, std::int64_t now_utc_ms, std::int64_t window_ms) {
  if (window_ms <= 0) throw InvalidSpecError("validate_timestamp: window must be positive");
  // Compare in the unsigned domain to dodge overflow on hostile timestamps.
  const auto a = static_cast<std::uint64_t>(now_utc_ms);
  const auto b = static_cast<std::uint64_t>(packet.timestamp_utc_ms);
  const std::uint64_t diff = (now_utc_ms >= packet.timestamp_utc_ms) ? a - b : b - a;
  return diff <= static_cast<std::uint64_t>(window_ms);
}

bool validate_schema(const Packet& packet) {
  if (!valid_device_id(packet.device_id)) return false;
  if (packet.features.size() != features::kFeatureCount) return false;
  for (double v : packet.features) {
    if (!std::isfinite(v)) return false;
  }
  return packet.hmac_hex.size() == 64 && is_lower_hex(packet.hmac_hex);
}

std::string_view to_string(GateAction a) {
  switch (a) {
    case GateAction::forward: return "forward";
    case GateAction::park: return "park";
    case GateAction::reject: return "reject";
  }
  return "?";
}

std::string_view to_string(GateReason r) {
  switch (r) {
    case GateReason::authenticated_forwarded: return "authenticated_forwarded";
    case GateReason::below_threshold: return "below_threshold";
    case GateReason::bad_hmac: return "bad_hmac";
    case GateReason::stale_timestamp: return "stale_timestamp";
    case GateReason::bad_schema: return "bad_schema";
    case GateReason::unknown_device: return "unknown_device";
    case GateReason::duplicate: return "duplicate";
    case GateReason::store_unavailable: return "store_unavailable";
  }
  return "?";
}

GateDecision gate(const Packet& packet, const DeviceRegistry& registry, const RiskModel& model,
                  std::int64_t now_utc_ms, const GateConfig& config) {
  GateDecision d;
  switch (verify(packet, registry)) {
    case MacCheck::unknown_device:
      d.reason = GateReason::unknown_device;
      return d;
    case MacCheck::invalid:
      d.reason = GateReason::bad_hmac;
      return d;
    case MacCheck::valid:
      break;
  }
  if (!validate_timestamp(packet, now_utc_ms, config.freshness_ms)) {
    d.reason = GateReason::stale_timestamp;
    return d;
  }
  if (!validate_schema(packet)) {
    d.reason = GateReason::bad_schema;
    return d;
  }
  const auto probs = risk_score(packet.features, model);
  d.risk_high_prob = probs[1];
  d.risk_evaluated = true;
  if (probs[1] >= config.threshold) {
    d.action = GateAction::forward;
    d.reason = GateReason::authenticated_forwarded;
  } else {
    d.action = GateAction::park;
    d.reason = GateReason::below_threshold;
  }
  return d;
}

DeliveryReceipt forward_exactly_once(const GateDecision& decision, const Packet& packet,
                                     CloudStore& store, std::int64_t received_utc_ms,
                                     const RetryPolicy& retry) {
  if (decision.action != GateAction::forward) {
    throw std::logic_error("forward_exactly_once: decision is not a forward");
  }
  const StoredRecord record{packet, decision.risk_high_prob, received_utc_ms};
  DeliveryReceipt receipt;
  bool ambiguous = false;  // an earlier attempt may have been stored
  for (int attempt = 1; attempt <= std::max(1, retry.max_attempts); ++attempt) {
    receipt.attempts = attempt;
    switch (store.publish(record)) {
      case PublishStatus::stored:
        receipt.status = DeliveryStatus::delivered;
        return receipt;
      case PublishStatus::duplicate:
        receipt.status = ambiguous ? DeliveryStatus::delivered : DeliveryStatus::duplicate;
        return receipt;
      case PublishStatus::ack_lost:
        ambiguous = true;
        break;
      case PublishStatus::unavailable:
        break;
    }
  }
  // Out of attempts. If a lost-ack attempt reached the store the record is
  // there; otherwise the caller parks it.
  receipt.status = (ambiguous && store.contains(packet.device_id, packet.seq))
                       ? DeliveryStatus::delivered
                       : DeliveryStatus::parked_store_unavailable;
  return receipt;
}

FogNode::FogNode(DeviceRegistry registry, RiskModel model, GateConfig config, CloudStore& store,
                 RetryPolicy retry)
    : registry_(std::move(registry)),
      model_(std::move(model)),
      config_(config),
      store_(store),
      retry_(retry) {}

NodeOutcome FogNode::process(const Packet& packet, std::int64_t now_utc_ms) {
  NodeOutcome out;
  out.decision = gate(packet, registry_, model_, now_utc_ms, config_);
  if (out.decision.action == GateAction::reject) return record(std::move(out), &packet);

  const auto key = std::make_pair(packet.device_id, packet.seq);
  if (seen_.count(key) != 0) {
    out.decision.action = GateAction::reject;
    out.decision.reason = GateReason::duplicate;
    return record(std::move(out), &packet);
  }
  seen_.insert(key);

  if (out.decision.action == GateAction::forward) {
    out.receipt = forward_exactly_once(out.decision, packet, store_, now_utc_ms, retry_);
    if (out.receipt->status == DeliveryStatus::duplicate) {
      out.decision.action = GateAction::reject;
      out.decision.reason = GateReason::duplicate;
    } else if (out.receipt->status == DeliveryStatus::parked_store_unavailable) {
      out.decision.action = GateAction::park;
      out.decision.reason = GateReason::store_unavailable;
    }
  }
  return record(std::move(out), &packet);
}

NodeOutcome FogNode::process_frame(std::string_view frame, std::int64_t now_utc_ms) {
  Packet packet;
  try {
    packet = decode_frame(frame);
  } catch (const ParseError&) {
    NodeOutcome out;
    out.decision.action = GateAction::reject;
    out.decision.reason = GateReason::bad_schema;
    return record(std::move(out), nullptr);
  }
  return process(packet, now_utc_ms);
}

NodeOutcome FogNode::record(NodeOutcome outcome, const Packet* packet) {
  ++counters_.input;
  ++counters_.by_reason[outcome.decision.reason];
  switch (outcome.decision.action) {
    case GateAction::forward:
      ++counters_.forwarded;
      break;
    case GateAction::park:
      ++counters_.parked;
      parked_.push_back({*packet, outcome.decision.reason, outcome.decision.risk_high_prob});
      break;
    case GateAction::reject:
      ++counters_.rejected;
      break;
  }
  return outcome;
}

}  // namespace neurotwin::fog
