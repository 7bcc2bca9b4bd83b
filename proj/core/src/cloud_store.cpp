#include "neurotwin/cloud_store.hpp"

#include <json.hpp>

#include "neurotwin/error.hpp"

namespace neurotwin::fog {

CloudStore::CloudStore(const std::filesystem::path& log_path) {
  log_.emplace(log_path, std::ios::binary | std::ios::trunc);
  if (!*log_) throw Error("CloudStore: cannot open log " + log_path.string());
}

PublishStatus CloudStore::publish(const StoredRecord& record) {
  if (fail_next_ > 0) {
    --fail_next_;
    return PublishStatus::unavailable;
  }
  auto key = std::make_pair(record.packet.device_id, record.packet.seq);
  if (index_.count(key) != 0) return PublishStatus::duplicate;

  index_.emplace(std::move(key), records_.size());
  records_.push_back(record);
  if (log_) {
    *log_ << to_json_line(record) << '\n';
    log_->flush();
  }
  if (lose_acks_ > 0) {
    --lose_acks_;
    return PublishStatus::ack_lost;
  }
  return PublishStatus::stored;
}

bool CloudStore::contains(const std::string& device_id, std::uint64_t seq) const {
  return index_.count({device_id, seq}) != 0;
}

std::vector<StoredRecord> CloudStore::records_for(const std::string& device_id) const {
  std::vector<StoredRecord> out;
  for (const auto& r : records_) {
    if (r.packet.device_id == device_id) out.push_back(r);
  }
  return out;
}

std::string CloudStore::to_json_line(const StoredRecord& r) {
  nlohmann::ordered_json j;
  j["device_id"] = r.packet.device_id;
  j["seq"] = r.packet.seq;
  j["timestamp_utc_ms"] = r.packet.timestamp_utc_ms;
  j["received_utc_ms"] = r.received_utc_ms;
  j["risk_high"] = r.risk_high_prob;
  j["features"] = r.packet.features;
  j["hmac"] = r.packet.hmac_hex;
  return j.dump();
}

StoredRecord CloudStore::from_json_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    StoredRecord r;
    r.packet.device_id = j.at("device_id").get<std::string>();
    r.packet.seq = j.at("seq").get<std::uint64_t>();
    r.packet.timestamp_utc_ms = j.at("timestamp_utc_ms").get<std::int64_t>();
    r.packet.features = j.at("features").get<std::vector<double>>();
    r.packet.hmac_hex = j.at("hmac").get<std::string>();
    r.received_utc_ms = j.at("received_utc_ms").get<std::int64_t>();
    r.risk_high_prob = j.at("risk_high").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("store record: ") + e.what());
  }
}

}  // namespace neurotwin::fog
