#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ontosim {

using json = nlohmann::json;

// Calls fn(line_number, parsed_object) for every non-empty line.
// Throws DataError naming the line number on malformed JSON.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const json&)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);

// Writes one compact JSON object per line via a temp file + rename.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

// Atomic whole-file write (temp + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace ontosim
