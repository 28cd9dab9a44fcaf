#include "binary_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace owas::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("write failed: " + path.string());
}

std::string expect_key(const std::string& line, std::string_view expected_key, std::uint64_t offset) {
  const auto colon = line.find(':');
  if (colon == std::string::npos || std::string_view(line).substr(0, colon) != expected_key) {
    throw FormatError("expected key '" + std::string(expected_key) + "', got '" + line + "'", offset);
  }
  return line.substr(colon + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  if (s.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

long long parse_int(const std::string& s, std::uint64_t offset) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw FormatError("not an integer: '" + s + "'", offset);
  return v;
}

}  // namespace owas::io
