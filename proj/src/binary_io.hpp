#pragma once

// Little-endian scalar encoding and a byte cursor shared by the dataset and
// checkpoint readers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "owas/errors.hpp"

namespace owas::io {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ >= bytes_.size(); }

  /// Next '\n'-terminated line without the terminator.
  std::string line(const char* what) {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string_view::npos) throw FormatError(std::string("truncated header: ") + what, pos_);
    std::string s(bytes_.substr(pos_, nl - pos_));
    pos_ = nl + 1;
    return s;
  }

  std::uint32_t u32(const char* what) {
    if (bytes_.size() - pos_ < 4) throw FormatError(std::string("truncated data: ") + what, pos_);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string_view bytes(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated data: ") + what, pos_);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::int32_t i32(const char* what) { return std::bit_cast<std::int32_t>(u32(what)); }

 private:
  std::string_view bytes_;
  std::uint64_t pos_ = 0;
};

/// Splits "key:value"; throws FormatError at `offset` when `expected_key` does not match.
std::string expect_key(const std::string& line, std::string_view expected_key, std::uint64_t offset);

std::vector<std::string> split(const std::string& s, char sep);
long long parse_int(const std::string& s, std::uint64_t offset);

}  // namespace owas::io
