#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace opmodel::text {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::vector<std::string_view> split_lines(std::string_view s);

/// FNV-1a, 64 bit. Used for content digests and cache keys, not security.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 14695981039346656037ULL) noexcept;
std::string hex64(std::uint64_t v);

/// Keeps the first `max_bytes` bytes, appending a marker when cut.
std::string truncate_bytes(std::string s, std::size_t max_bytes);

}  // namespace opmodel::text
