#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace hsprobe {

// SHA-256 of the input, rendered as 64 lowercase hex characters.
std::string sha256_hex(std::span<const std::uint8_t> data);

}  // namespace hsprobe
