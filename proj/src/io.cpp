#include "faithsel/io.hpp"

#include "faithsel/error.hpp"

#include <fstream>
#include <sstream>

namespace faithsel::io {

void for_each_json_line(std::istream& in,
                        const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw Error(Errc::schema_violation, "invalid JSON", line_no);
    }
    if (!obj.is_object()) {
      throw Error(Errc::schema_violation, "expected a JSON object", line_no);
    }
    fn(obj, line_no);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_error, "cannot rename into " + path.string());
}

const json& require(const json& obj, std::string_view key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(Errc::schema_violation, "missing field '" + std::string(key) + "'", line);
  }
  return *it;
}

std::string require_string(const json& obj, std::string_view key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_string()) {
    throw Error(Errc::schema_violation, "field '" + std::string(key) + "' must be a string",
                line);
  }
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, std::string_view key,
                                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(Errc::schema_violation, "field '" + std::string(key) + "' must be a string",
                line);
  }
  return it->get<std::string>();
}

}  // namespace faithsel::io
