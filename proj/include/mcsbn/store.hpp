#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "mcsbn/io.hpp"

namespace mcsbn {

inline constexpr const char* kStoreMagic = "MCSBSTOR";
inline constexpr uint16_t kStoreVersion = 1;
// magic(8) + version(2) + model_version(8) + watermark(8) + committed_len(8)
inline constexpr size_t kStoreHeaderLen = 34;

// Single-file log-structured key-value store. Records are framed as
// (key length, key bytes, value length, value bytes) with a trailing CRC32;
// latest record per key wins. The header's committed length advances only
// after a batch is durably appended, which makes batches atomic: a crash
// mid-batch leaves a garbage tail that is ignored (and overwritten) later.
class VectorStore {
public:
  VectorStore() = default;
  ~VectorStore() { close(); }
  VectorStore(const VectorStore&) = delete;
  VectorStore& operator=(const VectorStore&) = delete;

  void open(const std::string& path) {
    close();
    path_ = path;
    if (!std::filesystem::exists(path)) {
      f_ = std::fopen(path.c_str(), "w+b");
      if (!f_) throw std::runtime_error("cannot create store at " + path);
      committed_len_ = kStoreHeaderLen;
      write_header();
      return;
    }
    std::string data = read_file(path);
    if (data.size() < kStoreHeaderLen)
      throw std::runtime_error("store file too short: " + path);
    BufReader r(data);
    r.expect_magic(kStoreMagic, "vector store");
    uint16_t ver = r.u16();
    if (ver != kStoreVersion)
      throw std::runtime_error("unsupported store version " + std::to_string(ver));
    model_version_ = r.u64();
    watermark_ = r.i64();
    committed_len_ = r.u64();
    if (committed_len_ < kStoreHeaderLen || committed_len_ > data.size())
      throw std::runtime_error("store committed length out of range");
    while (r.pos() < committed_len_) {
      size_t record_off = r.pos();
      std::string key = r.str();
      std::string value = r.str();
      uint32_t crc = r.u32();
      if (crc != record_crc(key, value))
        throw std::runtime_error("store record CRC mismatch at byte offset " +
                                 std::to_string(record_off));
      map_[std::move(key)] = std::move(value);
    }
    f_ = std::fopen(path.c_str(), "r+b");
    if (!f_) throw std::runtime_error("cannot open store at " + path);
  }

  void close() {
    if (f_) {
      std::fclose(f_);
      f_ = nullptr;
    }
  }

  size_t count() const { return map_.size(); }
  uint64_t model_version() const { return model_version_; }
  int64_t watermark() const { return watermark_; }
  uint64_t committed_len() const { return committed_len_; }
  const std::string& path() const { return path_; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  // deterministic iteration (keys ascending)
  const std::map<std::string, std::string>& entries() const { return map_; }

  // Append one batch and commit it. The in-memory view and header advance
  // only after every record is durably on disk; any failure before that
  // leaves both the file (logically) and this object at the pre-batch state.
  void put_batch(std::span<const std::pair<std::string, std::string>> batch,
                 uint64_t model_version, int64_t watermark) {
    require_open();
    BufWriter w;
    size_t written = 0;
    for (const auto& [key, value] : batch) {
      if (fail_after_records_ >= 0 && written >= static_cast<size_t>(fail_after_records_)) {
        // fault-injection hook: flush a partial tail, then die before commit
        flush_at(committed_len_, w.buf);
        throw std::runtime_error("injected store fault after " + std::to_string(written) +
                                 " records");
      }
      w.str(key);
      w.str(value);
      w.u32(record_crc(key, value));
      ++written;
    }
    flush_at(committed_len_, w.buf);
    committed_len_ += w.buf.size();
    model_version_ = model_version;
    if (watermark > watermark_) watermark_ = watermark;
    write_header();
    for (const auto& [key, value] : batch) map_[key] = value;
  }

  // Rewrite the file with one record per live key and swap it in place.
  void compact() {
    require_open();
    BufWriter w;
    w.bytes(kStoreMagic, 8);
    w.u16(kStoreVersion);
    w.u64(model_version_);
    w.i64(watermark_);
    w.u64(0); // patched below
    for (const auto& [key, value] : map_) {
      w.str(key);
      w.str(value);
      w.u32(record_crc(key, value));
    }
    uint64_t total = w.buf.size();
    for (int i = 0; i < 8; ++i) w.buf[26 + i] = static_cast<char>(total >> (8 * i));
    close();
    write_file_atomic(path_, w.buf);
    committed_len_ = total;
    f_ = std::fopen(path_.c_str(), "r+b");
    if (!f_) throw std::runtime_error("cannot reopen store after compaction");
  }

  // test-only: throw after writing n records of the next batch
  void test_fail_after_records(int64_t n) { fail_after_records_ = n; }

private:
  static uint32_t record_crc(const std::string& key, const std::string& value) {
    uint32_t c = crc32_bytes(key);
    return static_cast<uint32_t>(
        ::crc32(c, reinterpret_cast<const Bytef*>(value.data()), static_cast<uInt>(value.size())));
  }

  void require_open() const {
    if (!f_) throw std::runtime_error("store is not open");
  }

  void flush_at(uint64_t offset, const std::string& data) {
    if (data.empty()) return;
    if (std::fseek(f_, static_cast<long>(offset), SEEK_SET) != 0)
      throw std::runtime_error("store seek failed");
    if (std::fwrite(data.data(), 1, data.size(), f_) != data.size())
      throw std::runtime_error("store write failed");
    if (std::fflush(f_) != 0 || ::fsync(fileno(f_)) != 0)
      throw std::runtime_error("store flush failed");
  }

  void write_header() {
    BufWriter w;
    w.bytes(kStoreMagic, 8);
    w.u16(kStoreVersion);
    w.u64(model_version_);
    w.i64(watermark_);
    w.u64(committed_len_);
    flush_at(0, w.buf);
  }

  std::string path_;
  std::FILE* f_ = nullptr;
  std::map<std::string, std::string> map_;
  uint64_t model_version_ = 0;
  int64_t watermark_ = 0;
  uint64_t committed_len_ = kStoreHeaderLen;
  int64_t fail_after_records_ = -1;
};

} // namespace mcsbn
