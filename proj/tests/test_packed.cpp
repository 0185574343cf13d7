#include <cstring>

#include "doctest.h"
#include "framesift/packed.hpp"
#include "support/fixtures.hpp"

using namespace framesift;
using fixtures::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

SampleSelection random_selection(SplitMix64& rng) {
  SampleSelection s;
  const std::size_t n = 1 + rng.below(8);
  for (std::size_t i = 0; i < n; ++i) s.selection_order.push_back(rng.below(5000));
  s.indices = s.selection_order;
  std::sort(s.indices.begin(), s.indices.end());
  s.success = rng.below(2) == 0;
  s.window = static_cast<int>(rng.below(300));
  const std::size_t m = rng.below(70);
  for (std::size_t i = 0; i < m; ++i) s.profile.push_back(rng.normal() * 10.0);
  return s;
}

PackedRecord random_record(SplitMix64& rng, std::string id) {
  PackedRecord r;
  r.id = std::move(id);
  r.kind = rng.below(2) ? PayloadKind::image_blob : PayloadKind::feature_rows;
  r.selection = random_selection(rng);
  r.payload.resize(1 + rng.below(3000));
  for (auto& b : r.payload) b = static_cast<std::uint8_t>(rng.next());
  return r;
}

/// Offset of the first payload byte of a record, relative to the record.
std::size_t payload_start(const PackedRecord& r) {
  return 4 + 1 + 2 + r.id.size() + 4 + encode_selection(r.selection).size() + 8;
}

}  // namespace

TEST_CASE("selection encoding round-trips") {
  SplitMix64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_selection(rng);
    CHECK(decode_selection(encode_selection(s)) == s);
  }
  auto bytes = encode_selection(random_selection(rng));
  bytes.pop_back();
  CHECK(code_of([&] { decode_selection(bytes); }) == ErrorCode::CorruptRecord);
  bytes.push_back(0);
  bytes.push_back(0);
  CHECK(code_of([&] { decode_selection(bytes); }) == ErrorCode::CorruptRecord);
}

TEST_CASE("payload encodings") {
  const FrameFeatures f("v", 3, 2, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> rows{0, 2};
  const auto bytes = encode_feature_rows(f, rows);
  REQUIRE(bytes.size() == 8 + 2 * 2 * 4);
  float values[4];
  std::memcpy(values, bytes.data() + 8, sizeof values);
  CHECK(values[0] == 1.0f);
  CHECK(values[2] == 5.0f);
  CHECK(values[3] == 6.0f);
  const std::vector<std::size_t> bad_rows{3};
  CHECK(code_of([&] { encode_feature_rows(f, bad_rows); }) == ErrorCode::InvalidInput);

  std::vector<ImageBlob> images{{4, {1, 2, 3}}, {9, {}}, {12, {255}}};
  const auto blob = encode_image_blobs(images);
  const auto back = decode_image_blobs(blob);
  REQUIRE(back.size() == 3);
  CHECK(back[0].frame_index == 4);
  CHECK(back[0].bytes == images[0].bytes);
  CHECK(back[1].bytes.empty());
  CHECK(back[2].frame_index == 12);
  auto cut = blob;
  cut.pop_back();
  CHECK(code_of([&] { decode_image_blobs(cut); }) == ErrorCode::CorruptRecord);
}

TEST_CASE("pack round-trip is bit-exact") {
  TempDir dir;
  SplitMix64 rng(2);
  std::vector<PackedRecord> records;
  for (int i = 0; i < 100; ++i) records.push_back(random_record(rng, "video" + std::to_string(i)));
  {
    PackedWriter w(dir / "a.fspk");
    for (const auto& r : records) w.append(r);
    CHECK(w.size() == 100);
    CHECK(w.contains("video7"));
    CHECK_FALSE(w.contains("video100"));
    w.finish();
    w.finish();
  }
  PackedReader reader(dir / "a.fspk");
  CHECK_FALSE(reader.recovered());
  REQUIRE(reader.index().size() == 100);
  CHECK(std::is_sorted(reader.index().begin(), reader.index().end(),
                       [](const auto& a, const auto& b) { return a.id < b.id; }));
  for (std::size_t i = 1; i < reader.index().size(); ++i) {
    // Records never overlap.
    const auto& e = reader.index();
    std::vector<IndexEntry> by_offset(e.begin(), e.end());
    std::sort(by_offset.begin(), by_offset.end(),
              [](const auto& a, const auto& b) { return a.offset < b.offset; });
    CHECK(by_offset[i - 1].offset + by_offset[i - 1].length <= by_offset[i].offset);
  }
  for (const auto& r : records) CHECK(reader.read(r.id) == r);
  CHECK(code_of([&] { reader.read("missing"); }) == ErrorCode::UnknownId);
}

TEST_CASE("identical appends give identical files") {
  TempDir dir;
  SplitMix64 rng(3);
  std::vector<PackedRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back(random_record(rng, "r" + std::to_string(9 - i)));
  for (const auto* name : {"x.fspk", "y.fspk"}) {
    PackedWriter w(dir / name);
    for (const auto& r : records) w.append(r);
  }
  CHECK(fixtures::read_file(dir / "x.fspk") == fixtures::read_file(dir / "y.fspk"));
}

TEST_CASE("every flipped payload byte is detected") {
  TempDir dir;
  SplitMix64 rng(4);
  auto rec = random_record(rng, "only");
  rec.payload.resize(64);
  {
    PackedWriter w(dir / "p.fspk");
    w.append(rec);
  }
  const auto original = fixtures::read_file(dir / "p.fspk");
  std::uint64_t offset = 0;
  {
    PackedReader r(dir / "p.fspk");
    offset = r.index().front().offset;
  }
  const std::size_t start = offset + payload_start(rec);
  for (std::size_t i = 0; i < rec.payload.size(); ++i) {
    auto bytes = original;
    bytes[start + i] ^= 0x01;
    fixtures::write_file(dir / "p.fspk", bytes);
    PackedReader r(dir / "p.fspk");
    REQUIRE(code_of([&] { r.read("only"); }) == ErrorCode::CorruptRecord);
  }
  // The selection and id are covered too.
  auto bytes = original;
  bytes[offset + 8] ^= 0x80;
  fixtures::write_file(dir / "p.fspk", bytes);
  PackedReader r(dir / "p.fspk");
  CHECK(code_of([&] { r.read("only"); }) == ErrorCode::CorruptRecord);
}

TEST_CASE("a pack without its trailer is recovered by scanning") {
  TempDir dir;
  SplitMix64 rng(5);
  std::vector<PackedRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(random_record(rng, "v" + std::to_string(i)));
  {
    PackedWriter w(dir / "k.fspk");
    for (const auto& r : records) w.append(r);
  }
  std::uint64_t last_offset = 0;
  {
    PackedReader r(dir / "k.fspk");
    for (const auto& e : r.index()) last_offset = std::max(last_offset, e.offset);
  }
  // Simulate a writer killed halfway through the last record.
  std::filesystem::resize_file(dir / "k.fspk", last_offset + 10);
  {
    PackedReader r(dir / "k.fspk");
    CHECK(r.recovered());
    CHECK(r.records_end() == last_offset);
    CHECK(r.index().size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(r.read(records[i].id) == records[i]);
    CHECK(code_of([&] { r.read("v4"); }) == ErrorCode::UnknownId);
  }
  {
    PackedWriter w(dir / "k.fspk");
    CHECK(w.size() == 4);
    CHECK(code_of([&] { w.append(records[0]); }) == ErrorCode::DuplicateEntry);
    w.append(records[4]);
  }
  PackedReader r(dir / "k.fspk");
  CHECK_FALSE(r.recovered());
  for (const auto& rec : records) CHECK(r.read(rec.id) == rec);
}

TEST_CASE("a damaged index falls back to a scan") {
  TempDir dir;
  SplitMix64 rng(6);
  std::vector<PackedRecord> records;
  for (int i = 0; i < 3; ++i) records.push_back(random_record(rng, "v" + std::to_string(i)));
  {
    PackedWriter w(dir / "d.fspk");
    for (const auto& r : records) w.append(r);
  }
  auto bytes = fixtures::read_file(dir / "d.fspk");
  bytes[bytes.size() - 30] ^= 0xFF;
  fixtures::write_file(dir / "d.fspk", bytes);
  PackedReader r(dir / "d.fspk");
  CHECK(r.recovered());
  for (const auto& rec : records) CHECK(r.read(rec.id) == rec);
}

TEST_CASE("reopening a complete pack without appends leaves it untouched") {
  TempDir dir;
  SplitMix64 rng(7);
  {
    PackedWriter w(dir / "c.fspk");
    w.append(random_record(rng, "a"));
  }
  const auto before = fixtures::read_file(dir / "c.fspk");
  const auto stamp = std::filesystem::last_write_time(dir / "c.fspk");
  {
    PackedWriter w(dir / "c.fspk");
    w.finish();
  }
  CHECK(fixtures::read_file(dir / "c.fspk") == before);
  CHECK(std::filesystem::last_write_time(dir / "c.fspk") == stamp);
}

TEST_CASE("empty pack and foreign files") {
  TempDir dir;
  { PackedWriter w(dir / "empty.fspk"); }
  PackedReader empty(dir / "empty.fspk");
  CHECK(empty.index().empty());
  CHECK_FALSE(empty.recovered());

  fixtures::write_text(dir / "junk.fspk", "definitely not a pack");
  CHECK(code_of([&] { PackedReader r(dir / "junk.fspk"); }) == ErrorCode::BadMagic);
  CHECK(code_of([&] { PackedWriter w(dir / "junk.fspk"); }) == ErrorCode::BadMagic);
  CHECK(code_of([&] { PackedReader r(dir / "none.fspk"); }) == ErrorCode::Io);

  PackedWriter w(dir / "ids.fspk");
  PackedRecord r;
  CHECK(code_of([&] { w.append(r); }) == ErrorCode::InvalidInput);
}
