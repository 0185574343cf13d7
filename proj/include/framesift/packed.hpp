#pragma once

// Packed dataset container ("FSPK1").
//
// Layout, all integers little-endian:
//
//   header   "FSPK1" | u8 version (=1) | u16 reserved (=0)
//   records  repeated:
//              u32 "FSRC" | u8 payload kind | u16 id length | id bytes |
//              u32 selection length | selection bytes |
//              u64 payload length | payload bytes |
//              u32 CRC-32 of every preceding byte of the record
//   index    "FSIX" | u32 count | count x (u16 id length | id bytes |
//              u64 record offset | u64 record length | u8 payload kind),
//              sorted by id
//   trailer  u64 index offset | u64 index length | u32 CRC-32 of index |
//            "FSPE"
//
// A record is committed once its CRC is on disk. The index and trailer are
// written when the writer finishes; a file without them (writer killed) is
// recovered by scanning records up to the first incomplete or corrupt one.
//
// Selection bytes: u32 n | n x u32 indices | u32 n | n x u32 pick order |
// u8 success | i32 window | u32 m | m x f64 profile.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "framesift/core.hpp"

namespace framesift {

enum class PayloadKind : std::uint8_t { feature_rows = 0, image_blob = 1 };

struct PackedRecord {
  std::string id;
  PayloadKind kind = PayloadKind::feature_rows;
  SampleSelection selection;
  std::vector<std::uint8_t> payload;

  bool operator==(const PackedRecord&) const = default;
};

struct IndexEntry {
  std::string id;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  PayloadKind kind = PayloadKind::feature_rows;
};

std::vector<std::uint8_t> encode_selection(const SampleSelection& selection);
SampleSelection decode_selection(std::span<const std::uint8_t> bytes);

/// Feature-row payload: u32 rows | u32 dim | rows*dim float32.
std::vector<std::uint8_t> encode_feature_rows(const FrameFeatures& features,
                                              std::span<const std::size_t> rows);
/// Image payload: u32 count | count x (u32 frame index | u64 size | bytes).
struct ImageBlob {
  std::size_t frame_index = 0;
  std::vector<std::uint8_t> bytes;
};
std::vector<std::uint8_t> encode_image_blobs(std::span<const ImageBlob> images);
std::vector<ImageBlob> decode_image_blobs(std::span<const std::uint8_t> payload);

/// Read-only memory-mapped view of a packed file.
class PackedReader {
 public:
  explicit PackedReader(const std::filesystem::path& path);
  ~PackedReader();
  PackedReader(const PackedReader&) = delete;
  PackedReader& operator=(const PackedReader&) = delete;

  const std::vector<IndexEntry>& index() const noexcept { return index_; }
  bool contains(const std::string& id) const;
  /// Throws UnknownId or CorruptRecord.
  PackedRecord read(const std::string& id) const;

  /// True when the trailer was missing or invalid and the index came from a scan.
  bool recovered() const noexcept { return recovered_; }
  /// Byte offset just past the last committed record.
  std::uint64_t records_end() const noexcept { return records_end_; }

 private:
  const IndexEntry* find(const std::string& id) const;
  bool load_trailer_index();
  void scan_records();

  std::span<const std::uint8_t> bytes_;
  void* map_ = nullptr;
  std::size_t map_size_ = 0;
  std::vector<IndexEntry> index_;
  std::uint64_t records_end_ = 0;
  bool recovered_ = false;
};

/// Appends records to a new or existing pack. Opening an existing pack keeps
/// its committed records and discards any partial tail on the first append.
class PackedWriter {
 public:
  explicit PackedWriter(std::filesystem::path path);
  ~PackedWriter();
  PackedWriter(const PackedWriter&) = delete;
  PackedWriter& operator=(const PackedWriter&) = delete;

  bool contains(const std::string& id) const;
  std::size_t size() const noexcept { return index_.size(); }

  /// Throws DuplicateEntry if the id is already stored.
  void append(const PackedRecord& record);
  /// Writes the sorted index and trailer. Idempotent; a pack that was
  /// already complete and received no records is left untouched.
  void finish();

 private:
  void open_for_append();

  std::filesystem::path path_;
  std::vector<IndexEntry> index_;
  std::uint64_t records_end_ = 0;
  bool complete_on_open_ = false;
  bool dirty_ = false;
  bool finished_ = false;
  std::ofstream out_;
};

}  // namespace framesift
