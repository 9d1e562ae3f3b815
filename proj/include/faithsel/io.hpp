#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>

namespace faithsel::io {

using json = nlohmann::json;

/// Calls `fn(object, line_number)` for every non-blank line of a JSON-lines
/// stream. Lines that are not JSON objects raise SchemaViolation.
void for_each_json_line(std::istream& in,
                        const std::function<void(const json&, std::size_t)>& fn);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Field accessors that raise SchemaViolation on absence or wrong type.
const json& require(const json& obj, std::string_view key, std::size_t line);
std::string require_string(const json& obj, std::string_view key, std::size_t line);
std::optional<std::string> optional_string(const json& obj, std::string_view key,
                                           std::size_t line);

}  // namespace faithsel::io
