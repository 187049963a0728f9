#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mcsbn/store.hpp"

using namespace mcsbn;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("mcsbn_store_test_" + std::to_string(::getpid()) + "_" +
           std::to_string(reinterpret_cast<uintptr_t>(this)));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

} // namespace

TEST_CASE("store basic put/get and reopen", "[store]") {
  TempDir tmp;
  std::string path = tmp.file("v.store");
  {
    VectorStore s;
    s.open(path);
    CHECK(s.count() == 0);
    CHECK(!s.get("u1"));
    std::vector<std::pair<std::string, std::string>> batch{{"u1", "aaa"}, {"u2", "bb"}};
    s.put_batch(batch, /*model_version=*/7, /*watermark=*/100);
    CHECK(s.count() == 2);
    CHECK(*s.get("u1") == "aaa");
    // overwrite
    std::vector<std::pair<std::string, std::string>> batch2{{"u1", "zzzz"}};
    s.put_batch(batch2, 7, 120);
    CHECK(*s.get("u1") == "zzzz");
    CHECK(s.watermark() == 120);
  }
  VectorStore r;
  r.open(path);
  CHECK(r.count() == 2);
  CHECK(*r.get("u1") == "zzzz");
  CHECK(*r.get("u2") == "bb");
  CHECK(r.model_version() == 7);
  CHECK(r.watermark() == 120);
}

TEST_CASE("store compaction keeps live state and shrinks the log", "[store]") {
  TempDir tmp;
  std::string path = tmp.file("v.store");
  VectorStore s;
  s.open(path);
  for (int i = 0; i < 20; ++i) {
    std::vector<std::pair<std::string, std::string>> b{{"u1", "value" + std::to_string(i)}};
    s.put_batch(b, 1, i);
  }
  uint64_t before = s.committed_len();
  s.compact();
  CHECK(s.committed_len() < before);
  CHECK(*s.get("u1") == "value19");
  VectorStore r;
  r.open(path);
  CHECK(*r.get("u1") == "value19");
  CHECK(r.watermark() == 19);
}

TEST_CASE("store detects corruption with a byte offset", "[store]") {
  TempDir tmp;
  std::string path = tmp.file("v.store");
  {
    VectorStore s;
    s.open(path);
    std::vector<std::pair<std::string, std::string>> b{{"user", "payload"}};
    s.put_batch(b, 1, 1);
  }
  auto data = read_file(path);
  data[kStoreHeaderLen + 6] ^= 0x40; // flip a bit inside the first record
  write_file_atomic(path, data);
  VectorStore r;
  try {
    r.open(path);
    FAIL("expected CRC failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
}

TEST_CASE("crash mid-batch leaves the committed region untouched", "[store]") {
  TempDir tmp;
  std::string path = tmp.file("v.store");
  {
    VectorStore s;
    s.open(path);
    std::vector<std::pair<std::string, std::string>> b{{"u1", "one"}, {"u2", "two"}};
    s.put_batch(b, 3, 50);
  }
  std::string snapshot = read_file(path);
  uint64_t committed;
  {
    VectorStore s;
    s.open(path);
    committed = s.committed_len();
    s.test_fail_after_records(1);
    std::vector<std::pair<std::string, std::string>> b{{"u1", "NEW"}, {"u3", "three"}};
    CHECK_THROWS(s.put_batch(b, 3, 60));
    // the in-memory view stays pre-batch too
    CHECK(*s.get("u1") == "one");
    CHECK(!s.get("u3"));
  }
  // committed prefix is byte-for-byte the pre-batch snapshot
  std::string after = read_file(path);
  REQUIRE(after.size() >= committed);
  CHECK(after.substr(0, committed) == snapshot.substr(0, committed));

  VectorStore r;
  r.open(path);
  CHECK(r.count() == 2);
  CHECK(*r.get("u1") == "one");
  CHECK(*r.get("u2") == "two");
  CHECK(!r.get("u3"));
  CHECK(r.watermark() == 50);

  // the next successful batch overwrites the garbage tail
  std::vector<std::pair<std::string, std::string>> b{{"u3", "three"}};
  r.put_batch(b, 3, 70);
  VectorStore rr;
  rr.open(path);
  CHECK(rr.count() == 3);
  CHECK(*rr.get("u3") == "three");
}
