#include "neurotwin/packet.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "neurotwin/error.hpp"
#include "neurotwin/hmac.hpp"

namespace neurotwin::fog {

namespace {

constexpr std::array<std::string_view, 5> kKeys{"device_id", "timestamp_utc_ms", "seq", "features",
                                                 "hmac"};

std::string render_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return format_double(v);
}

}  // namespace

std::string format_double(double v) {
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool valid_device_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.' || c == ':';
    if (!ok) return false;
  }
  return true;
}

Packet make_packet(std::string device_id, std::int64_t timestamp_utc_ms, std::uint64_t seq,
                   const features::FeatureVector& fv) {
  const auto values = fv.to_array();
  return Packet{std::move(device_id), timestamp_utc_ms, seq, {values.begin(), values.end()}, {}};
}

std::string canonical_mac_input(const Packet& p) {
  std::string s;
  s.reserve(64 + p.features.size() * 24);
  s += "{\"device_id\":\"";
  s += p.device_id;
  s += "\",\"timestamp_utc_ms\":";
  s += std::to_string(p.timestamp_utc_ms);
  s += ",\"seq\":";
  s += std::to_string(p.seq);
  s += ",\"features\":[";
  for (std::size_t i = 0; i < p.features.size(); ++i) {
    if (i) s += ',';
    s += render_number(p.features[i]);
  }
  s += "]}";
  return s;
}

std::string encode_frame(const Packet& p) {
  if (!valid_device_id(p.device_id)) throw InvalidSpecError("encode_frame: invalid device_id");
  for (double v : p.features) {
    if (!std::isfinite(v)) throw InvalidSpecError("encode_frame: non-finite feature");
  }
  if (p.hmac_hex.size() != 64 || !is_lower_hex(p.hmac_hex)) {
    throw InvalidSpecError("encode_frame: hmac must be 64 lowercase hex chars");
  }
  std::string s = canonical_mac_input(p);
  s.pop_back();  // reopen the object
  s += ",\"hmac\":\"";
  s += p.hmac_hex;
  s += "\"}\n";
  return s;
}

Packet decode_frame(std::string_view frame) {
  if (frame.empty() || frame.back() != '\n') throw ParseError("frame not LF-terminated");
  const std::string_view body = frame.substr(0, frame.size() - 1);
  if (body.find('\n') != std::string_view::npos || body.find('\r') != std::string_view::npos) {
    throw ParseError("frame spans more than one line");
  }

  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("frame is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("frame is not a JSON object");
  if (j.size() != kKeys.size()) {
    throw ParseError("frame has " + std::to_string(j.size()) + " fields, expected 5");
  }
  std::size_t k = 0;
  for (auto it = j.begin(); it != j.end(); ++it, ++k) {
    if (it.key() != kKeys[k]) throw ParseError("unexpected field '" + it.key() + "'");
  }

  Packet p;
  const auto& id = j["device_id"];
  if (!id.is_string() || !valid_device_id(id.get_ref<const std::string&>())) {
    throw ParseError("device_id must be a non-empty identifier string");
  }
  p.device_id = id.get<std::string>();

  const auto& ts = j["timestamp_utc_ms"];
  if (ts.is_number_unsigned()) {
    const auto u = ts.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) throw ParseError("timestamp out of range");
    p.timestamp_utc_ms = static_cast<std::int64_t>(u);
  } else if (ts.is_number_integer()) {
    p.timestamp_utc_ms = ts.get<std::int64_t>();
  } else {
    throw ParseError("timestamp_utc_ms must be an integer");
  }

  const auto& seq = j["seq"];
  if (!seq.is_number_unsigned()) throw ParseError("seq must be a non-negative integer");
  p.seq = seq.get<std::uint64_t>();

  const auto& feats = j["features"];
  if (!feats.is_array()) throw ParseError("features must be an array");
  if (feats.size() != features::kFeatureCount) {
    throw ParseError("features has " + std::to_string(feats.size()) + " entries, expected 11");
  }
  for (const auto& v : feats) {
    if (!v.is_number()) throw ParseError("feature is not a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError("feature is not finite");
    p.features.push_back(d);
  }

  const auto& mac = j["hmac"];
  if (!mac.is_string()) throw ParseError("hmac must be a string");
  p.hmac_hex = mac.get<std::string>();
  if (p.hmac_hex.size() != 64 || !is_lower_hex(p.hmac_hex)) {
    throw ParseError("hmac must be 64 lowercase hex chars");
  }
  return p;
}

}  // namespace neurotwin::fog
