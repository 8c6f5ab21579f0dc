#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ctnli::detail {

using json = nlohmann::json;

// Parses a JSON file. When reject_duplicate_top_keys is set, a key repeated
// in the top-level object is reported as an InputError instead of silently
// overwriting the first value.
json read_json_file(const std::filesystem::path& path, bool reject_duplicate_top_keys = false);

// Writes `text` to `path` through a temporary sibling and a rename so readers
// never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

std::string trim(std::string_view s);

std::string to_lower(std::string_view s);

}  // namespace ctnli::detail
