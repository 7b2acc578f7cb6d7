#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pq {

/// Standard alphabet, padded.
std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Accepts padded standard-alphabet input; whitespace is not allowed.
/// Throws InvalidParameter on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace pq
