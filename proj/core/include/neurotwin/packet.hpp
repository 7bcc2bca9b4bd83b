#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "neurotwin/features.hpp"

namespace neurotwin::fog {

/// One signed feature-vector frame. `features` is a plain vector so that
/// malformed packets can be represented and rejected by the schema check.
struct Packet {
  std::string device_id;
  std::int64_t timestamp_utc_ms = 0;
  std::uint64_t seq = 0;
  std::vector<double> features;
  std::string hmac_hex;

  bool operator==(const Packet&) const = default;
};

Packet make_packet(std::string device_id, std::int64_t timestamp_utc_ms, std::uint64_t seq,
                   const features::FeatureVector& fv);

/// Bytes covered by the MAC: the canonical frame object without the hmac
/// member and without the trailing LF, e.g.
/// {"device_id":"d1","timestamp_utc_ms":5,"seq":0,"features":[...]}
/// Non-finite values render as NaN/Infinity tokens so that a MAC can still be
/// computed over in-process packets; such packets never encode to a frame.
std::string canonical_mac_input(const Packet& packet);

/// {"device_id":...,"timestamp_utc_ms":N,"seq":N,"features":[f0,...,f10],"hmac":"<64 hex>"}\n
/// Numbers carry 17 significant digits. Throws InvalidSpecError for packets
/// that cannot form a valid frame.
std::string encode_frame(const Packet& packet);

/// Strict inverse of encode_frame. Throws ParseError on anything that is not a
/// single LF-terminated frame with exactly the five keys in canonical order,
/// 11 finite features and a 64-char lowercase hex MAC.
Packet decode_frame(std::string_view frame);

bool valid_device_id(std::string_view id);

std::string format_double(double v);

}  // namespace neurotwin::fog
