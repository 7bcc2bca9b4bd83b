#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neurotwin::fog {

using Digest = std::array<std::uint8_t, 32>;

/// HMAC-SHA256 (RFC 2104 over SHA-256). Backed by OpenSSL.
Digest hmac_sha256(std::span<const std::uint8_t> key, std::string_view message);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Throws ParseError on odd length or non-hex characters.
std::vector<std::uint8_t> from_hex(std::string_view hex);

bool is_lower_hex(std::string_view s);

/// Compares every byte regardless of where the first mismatch is; the only
/// early exit is on length, which is public.
bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace neurotwin::fog
