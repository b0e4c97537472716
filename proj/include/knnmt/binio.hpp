#pragma once

// Little-endian helpers for the binary artifact formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnmt/error.hpp"

namespace knnmt::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { put(&v, sizeof v); }
  void u64(std::uint64_t v) { put(&v, sizeof v); }
  void f32s(std::span<const float> v) { put(v.data(), v.size_bytes()); }
  void u32s(std::span<const std::uint32_t> v) { put(v.data(), v.size_bytes()); }

  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  void put(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0)
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"", pos_);
    pos_ += m.size();
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    get(&v, sizeof v, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    get(&v, sizeof v, what);
    return v;
  }
  void f32s(std::span<float> out, const char* what) { get(out.data(), out.size_bytes(), what); }
  void u32s(std::span<std::uint32_t> out, const char* what) {
    get(out.data(), out.size_bytes(), what);
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void expect_end() const {
    if (pos_ != bytes_.size()) throw FormatError("trailing bytes", pos_);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated while reading ") + what, pos_);
  }
  void get(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace knnmt::binio
