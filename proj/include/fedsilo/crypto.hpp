#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsilo {

// CRC-32, IEEE polynomial (reflected 0xEDB88320), as used by zlib.
std::uint32_t crc32(std::span<const std::uint8_t> data);
std::uint32_t crc32_update(std::uint32_t crc, std::span<const std::uint8_t> data);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
std::string sha256_hex(std::span<const std::uint8_t> data);

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> data);
std::string hmac_sha256_hex(std::span<const std::uint8_t> key, std::string_view data);

std::string to_hex(std::span<const std::uint8_t> bytes);

// Timing-balanced comparison for signature checks.
bool constant_time_eq(std::string_view a, std::string_view b);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

} // namespace fedsilo
