#include "ontosim/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "ontosim/errors.hpp"

namespace ontosim {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw DataError("cannot open file: " + path.string());
  }
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
    fn(lineno, obj);
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> rows;
  for_each_jsonl(path, [&](size_t, const json& obj) { rows.push_back(obj); });
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ostringstream out;
  for (const auto& row : rows) {
    out << row.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) {
      throw DataError("cannot open file for writing: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.good()) {
      throw DataError("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw DataError("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ontosim
