#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

namespace mcsbn {

inline uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// murmur-style finalizer; fnv1a alone avalanches poorly in the high bits
inline uint64_t mix64(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

inline uint32_t crc32_bytes(std::string_view data) {
  return static_cast<uint32_t>(
      ::crc32(0, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

// ---- little-endian primitives over an in-memory buffer ----

struct BufWriter {
  std::string buf;

  void bytes(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u8(uint8_t x) { buf.push_back(static_cast<char>(x)); }
  void u16(uint16_t x) {
    for (int i = 0; i < 2; ++i) u8(static_cast<uint8_t>(x >> (8 * i)));
  }
  void u32(uint32_t x) {
    for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(x >> (8 * i)));
  }
  void u64(uint64_t x) {
    for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(x >> (8 * i)));
  }
  void i64(int64_t x) { u64(static_cast<uint64_t>(x)); }
  void f32(float x) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    u32(bits);
  }
  void varint(uint64_t x) {
    while (x >= 0x80) {
      u8(static_cast<uint8_t>(x) | 0x80);
      x >>= 7;
    }
    u8(static_cast<uint8_t>(x));
  }
  void str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

class BufReader {
public:
  explicit BufReader(std::string_view data) : data_(data) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

  void bytes(void* out, size_t n) {
    if (remaining() < n)
      throw std::runtime_error("truncated record at byte offset " + std::to_string(pos_));
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  uint8_t u8() {
    uint8_t x;
    bytes(&x, 1);
    return x;
  }
  uint16_t u16() {
    uint16_t x = 0;
    for (int i = 0; i < 2; ++i) x |= static_cast<uint16_t>(u8()) << (8 * i);
    return x;
  }
  uint32_t u32() {
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(u8()) << (8 * i);
    return x;
  }
  uint64_t u64() {
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(u8()) << (8 * i);
    return x;
  }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  float f32() {
    uint32_t bits = u32();
    float x;
    std::memcpy(&x, &bits, 4);
    return x;
  }
  uint64_t varint() {
    uint64_t x = 0;
    int shift = 0;
    while (true) {
      uint8_t b = u8();
      x |= static_cast<uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) break;
      shift += 7;
      if (shift > 63)
        throw std::runtime_error("varint overflow at byte offset " + std::to_string(pos_));
    }
    return x;
  }
  std::string str() {
    uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void expect_magic(std::string_view magic, const char* what) {
    std::string got(magic.size(), '\0');
    bytes(got.data(), got.size());
    if (got != magic) throw std::runtime_error(std::string("bad magic for ") + what);
  }

private:
  std::string_view data_;
  size_t pos_ = 0;
};

// ---- file helpers ----

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// write to a temp file in the same directory, then rename over the target
inline void write_file_atomic(const std::string& path, std::string_view data) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename Fn>
void for_each_line(const std::string& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    fn(line, lineno);
  }
}

inline std::string format_g9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

} // namespace mcsbn
