#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ptg {

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

/// UTC time formatted as ISO-8601 with millisecond precision.
std::string utc_timestamp_now();

std::string trim(std::string_view s);

}  // namespace ptg
