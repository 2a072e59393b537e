#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pshadow/errors.hpp"

namespace pshadow::detail {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(std::string_view b) {
    out_.write(b.data(), static_cast<std::streamsize>(b.size()));
  }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      u8(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    u8(static_cast<std::uint8_t>(v));
  }
  void svarint(std::int64_t v) {
    varint((static_cast<std::uint64_t>(v) << 1) ^
           static_cast<std::uint64_t>(v >> 63));
  }
  void f64(double v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out_.write(buf, 8);
  }
  void str(std::string_view s) {
    varint(s.size());
    bytes(s);
  }
  void strings(const std::vector<std::string>& v) {
    varint(v.size());
    for (const auto& s : v) str(s);
  }
  // Sorted unsigned ids as first value then gaps.
  void delta_ids(const std::vector<std::uint32_t>& ids) {
    varint(ids.size());
    std::uint32_t prev = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      varint(k == 0 ? ids[k] : ids[k] - prev);
      prev = ids[k];
    }
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string_view what) : in_(in), what_(what) {}

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_ || got != magic) {
      throw DataError(std::string(what_) + ": bad magic, expected " +
                      std::string(magic));
    }
  }
  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) fail("unexpected end of file");
    return static_cast<std::uint8_t>(c);
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return v;
    }
    fail("varint too long");
  }
  std::int64_t svarint() {
    const std::uint64_t z = varint();
    return static_cast<std::int64_t>((z >> 1) ^ (~(z & 1) + 1));
  }
  std::uint64_t count(std::uint64_t limit) {
    const std::uint64_t n = varint();
    if (n > limit) fail("count exceeds limit");
    return n;
  }
  double f64() {
    char buf[8];
    in_.read(buf, 8);
    if (!in_) fail("unexpected end of file");
    double v;
    std::memcpy(&v, buf, 8);
    return v;
  }
  std::string str() {
    const auto n = count(1u << 30);
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) fail("unexpected end of file");
    return s;
  }
  std::vector<std::string> strings() {
    const auto n = count(1u << 31);
    std::vector<std::string> v;
    v.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) v.push_back(str());
    return v;
  }
  std::vector<std::uint32_t> delta_ids(std::uint64_t bound) {
    const auto n = count(bound);
    std::vector<std::uint32_t> ids(n);
    std::uint64_t prev = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::uint64_t gap = varint();
      if (k > 0 && gap == 0) fail("ids not strictly increasing");
      const std::uint64_t id = k == 0 ? gap : prev + gap;
      if (id >= bound) fail("id out of range");
      ids[k] = static_cast<std::uint32_t>(id);
      prev = id;
    }
    return ids;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }
  [[noreturn]] void fail(std::string_view why) const {
    throw DataError(std::string(what_) + ": " + std::string(why));
  }

 private:
  std::istream& in_;
  std::string_view what_;
};

}  // namespace pshadow::detail
