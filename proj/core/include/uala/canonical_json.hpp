// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uala {

/// Sorted keys, no insignificant whitespace, shortest round-trip doubles.
/// nlohmann's object type is an ordered std::map, so dump() already sorts.
inline std::string canonical_dump(const nlohmann::json& j) { return j.dump(); }

/// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// One canonical JSON document per line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

}  // namespace uala
