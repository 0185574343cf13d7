#include "framesift/packed.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "byte_io.hpp"

namespace framesift {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFileMagic = "FSPK1";
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 8;
constexpr std::string_view kRecordMagic = "FSRC";
constexpr std::string_view kIndexMagic = "FSIX";
constexpr std::string_view kTrailerMagic = "FSPE";
constexpr std::size_t kTrailerSize = 24;

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(crc32_z(0L, bytes.data(), bytes.size()));
}

bool has_prefix(std::span<const std::uint8_t> bytes, std::string_view magic) {
  return bytes.size() >= magic.size() &&
         std::equal(magic.begin(), magic.end(), bytes.begin());
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> encode_record(const PackedRecord& record) {
  if (record.id.empty() || record.id.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::InvalidInput, "record id must be 1..65535 bytes");
  }
  const auto selection = encode_selection(record.selection);
  std::vector<std::uint8_t> out;
  out.reserve(32 + record.id.size() + selection.size() + record.payload.size());
  detail::ByteWriter w(out);
  w.put_bytes(kRecordMagic);
  w.put(static_cast<std::uint8_t>(record.kind));
  w.put(static_cast<std::uint16_t>(record.id.size()));
  w.put_bytes(record.id);
  w.put(checked_u32(selection.size(), "selection"));
  w.put_bytes(selection);
  w.put(static_cast<std::uint64_t>(record.payload.size()));
  w.put_bytes(record.payload);
  const std::uint32_t crc = crc_of(out);
  w.put(crc);
  return out;
}

/// Parses one record at the start of `bytes`; returns it and its length.
/// Throws CorruptRecord on any structural or checksum failure.
std::pair<PackedRecord, std::uint64_t> decode_record(std::span<const std::uint8_t> bytes) {
  try {
    if (!has_prefix(bytes, kRecordMagic)) throw Error(ErrorCode::CorruptRecord, "bad record tag");
    detail::ByteReader r(bytes.subspan(kRecordMagic.size()), ErrorCode::CorruptRecord);
    PackedRecord record;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw Error(ErrorCode::CorruptRecord, "unknown payload kind");
    record.kind = static_cast<PayloadKind>(kind);
    const auto id = r.take(r.get<std::uint16_t>());
    record.id.assign(id.begin(), id.end());
    const auto selection = r.take(r.get<std::uint32_t>());
    const auto payload_len = r.get<std::uint64_t>();
    if (payload_len > r.remaining()) throw Error(ErrorCode::CorruptRecord, "payload overruns");
    const auto payload = r.take(static_cast<std::size_t>(payload_len));
    const std::size_t body = kRecordMagic.size() + r.position();
    const auto stored_crc = r.get<std::uint32_t>();
    if (crc_of(bytes.first(body)) != stored_crc) {
      throw Error(ErrorCode::CorruptRecord, "checksum mismatch for '" + record.id + "'");
    }
    record.selection = decode_selection(selection);
    record.payload.assign(payload.begin(), payload.end());
    return {std::move(record), body + 4};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptRecord) throw;
    throw Error(ErrorCode::CorruptRecord, e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_selection(const SampleSelection& selection) {
  std::vector<std::uint8_t> out;
  detail::ByteWriter w(out);
  auto put_indices = [&](const std::vector<std::size_t>& v) {
    w.put(checked_u32(v.size(), "index list"));
    for (std::size_t i : v) w.put(checked_u32(i, "frame index"));
  };
  put_indices(selection.indices);
  put_indices(selection.selection_order);
  w.put(static_cast<std::uint8_t>(selection.success ? 1 : 0));
  w.put(static_cast<std::int32_t>(selection.window));
  w.put(checked_u32(selection.profile.size(), "profile"));
  for (double v : selection.profile) w.put(v);
  return out;
}

SampleSelection decode_selection(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptRecord);
  SampleSelection s;
  auto get_indices = [&](std::vector<std::size_t>& v) {
    const auto n = r.get<std::uint32_t>();
    if (std::uint64_t{n} * 4 > r.remaining()) throw Error(ErrorCode::CorruptRecord, "index list overruns");
    v.resize(n);
    for (auto& i : v) i = r.get<std::uint32_t>();
  };
  get_indices(s.indices);
  get_indices(s.selection_order);
  s.success = r.get<std::uint8_t>() != 0;
  s.window = r.get<std::int32_t>();
  const auto m = r.get<std::uint32_t>();
  if (std::uint64_t{m} * 8 > r.remaining()) throw Error(ErrorCode::CorruptRecord, "profile overruns");
  s.profile.resize(m);
  for (auto& v : s.profile) v = r.get<double>();
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptRecord, "trailing selection bytes");
  return s;
}

std::vector<std::uint8_t> encode_feature_rows(const FrameFeatures& features,
                                              std::span<const std::size_t> rows) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + rows.size() * features.dim() * 4);
  detail::ByteWriter w(out);
  w.put(checked_u32(rows.size(), "row count"));
  w.put(checked_u32(features.dim(), "dimension"));
  for (std::size_t t : rows) {
    if (t >= features.frames()) throw Error(ErrorCode::InvalidInput, "row index out of range");
    for (double v : features.row(t)) w.put(static_cast<float>(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_image_blobs(std::span<const ImageBlob> images) {
  std::vector<std::uint8_t> out;
  detail::ByteWriter w(out);
  w.put(checked_u32(images.size(), "image count"));
  for (const auto& image : images) {
    w.put(checked_u32(image.frame_index, "frame index"));
    w.put(static_cast<std::uint64_t>(image.bytes.size()));
    w.put_bytes(image.bytes);
  }
  return out;
}

std::vector<ImageBlob> decode_image_blobs(std::span<const std::uint8_t> payload) {
  detail::ByteReader r(payload, ErrorCode::CorruptRecord);
  std::vector<ImageBlob> images(r.get<std::uint32_t>());
  for (auto& image : images) {
    image.frame_index = r.get<std::uint32_t>();
    const auto size = r.get<std::uint64_t>();
    if (size > r.remaining()) throw Error(ErrorCode::CorruptRecord, "image overruns payload");
    const auto bytes = r.take(static_cast<std::size_t>(size));
    image.bytes.assign(bytes.begin(), bytes.end());
  }
  return images;
}

PackedReader::PackedReader(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw Error(ErrorCode::Io, "cannot open " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw Error(ErrorCode::Io, "cannot stat " + path.string());
  }
  map_size_ = static_cast<std::size_t>(st.st_size);
  if (map_size_ > 0) {
    map_ = ::mmap(nullptr, map_size_, PROT_READ, MAP_PRIVATE, fd, 0);
  }
  ::close(fd);
  if (map_ == MAP_FAILED) {
    map_ = nullptr;
    throw Error(ErrorCode::Io, "cannot map " + path.string());
  }
  bytes_ = {static_cast<const std::uint8_t*>(map_), map_size_};
  if (bytes_.size() < kHeaderSize || !has_prefix(bytes_, kFileMagic) ||
      bytes_[kFileMagic.size()] != kVersion) {
    ::munmap(map_, map_size_);
    map_ = nullptr;
    throw Error(ErrorCode::BadMagic, path.string() + " is not an FSPK1 pack");
  }
  if (!load_trailer_index()) {
    recovered_ = true;
    scan_records();
  }
}

PackedReader::~PackedReader() {
  if (map_ != nullptr) ::munmap(map_, map_size_);
  map_ = nullptr;
}

bool PackedReader::load_trailer_index() {
  if (bytes_.size() < kHeaderSize + kTrailerSize) return false;
  try {
    const auto trailer = bytes_.last(kTrailerSize);
    detail::ByteReader t(trailer, ErrorCode::CorruptRecord);
    const auto index_offset = t.get<std::uint64_t>();
    const auto index_length = t.get<std::uint64_t>();
    const auto index_crc = t.get<std::uint32_t>();
    if (!has_prefix(t.take(4), kTrailerMagic)) return false;
    if (index_offset < kHeaderSize ||
        index_offset + index_length + kTrailerSize != bytes_.size()) {
      return false;
    }
    const auto index_bytes = bytes_.subspan(index_offset, index_length);
    if (crc_of(index_bytes) != index_crc || !has_prefix(index_bytes, kIndexMagic)) return false;
    detail::ByteReader r(index_bytes.subspan(kIndexMagic.size()), ErrorCode::CorruptRecord);
    std::vector<IndexEntry> entries(r.get<std::uint32_t>());
    for (auto& e : entries) {
      const auto id = r.take(r.get<std::uint16_t>());
      e.id.assign(id.begin(), id.end());
      e.offset = r.get<std::uint64_t>();
      e.length = r.get<std::uint64_t>();
      e.kind = static_cast<PayloadKind>(r.get<std::uint8_t>());
      if (e.offset < kHeaderSize || e.offset + e.length > index_offset) return false;
    }
    if (r.remaining() != 0) return false;
    if (!std::is_sorted(entries.begin(), entries.end(),
                        [](const auto& a, const auto& b) { return a.id < b.id; })) {
      return false;
    }
    index_ = std::move(entries);
    records_end_ = index_offset;
    return true;
  } catch (const Error&) {
    return false;
  }
}

void PackedReader::scan_records() {
  std::uint64_t pos = kHeaderSize;
  index_.clear();
  while (pos < bytes_.size()) {
    try {
      auto [record, length] = decode_record(bytes_.subspan(pos));
      index_.push_back({std::move(record.id), pos, length, record.kind});
      pos += length;
    } catch (const Error&) {
      break;
    }
  }
  records_end_ = pos;
  std::stable_sort(index_.begin(), index_.end(),
                   [](const auto& a, const auto& b) { return a.id < b.id; });
  index_.erase(std::unique(index_.begin(), index_.end(),
                           [](const auto& a, const auto& b) { return a.id == b.id; }),
               index_.end());
}

const IndexEntry* PackedReader::find(const std::string& id) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), id,
                             [](const IndexEntry& e, const std::string& key) { return e.id < key; });
  return (it != index_.end() && it->id == id) ? &*it : nullptr;
}

bool PackedReader::contains(const std::string& id) const { return find(id) != nullptr; }

PackedRecord PackedReader::read(const std::string& id) const {
  const auto* entry = find(id);
  if (entry == nullptr) throw Error(ErrorCode::UnknownId, "no record for '" + id + "'");
  if (entry->offset + entry->length > bytes_.size()) {
    throw Error(ErrorCode::CorruptRecord, "record for '" + id + "' lies past the end of file");
  }
  auto [record, length] = decode_record(bytes_.subspan(entry->offset, entry->length));
  if (length != entry->length || record.id != id || record.kind != entry->kind) {
    throw Error(ErrorCode::CorruptRecord, "record for '" + id + "' disagrees with the index");
  }
  return std::move(record);
}

PackedWriter::PackedWriter(fs::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (fs::exists(path_, ec) && fs::file_size(path_, ec) > 0) {
    PackedReader existing(path_);
    index_ = existing.index();
    records_end_ = existing.records_end();
    complete_on_open_ = !existing.recovered();
  }
}

PackedWriter::~PackedWriter() {
  try {
    finish();
  } catch (...) {
  }
}

bool PackedWriter::contains(const std::string& id) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), id,
                             [](const IndexEntry& e, const std::string& key) { return e.id < key; });
  return it != index_.end() && it->id == id;
}

void PackedWriter::open_for_append() {
  if (out_.is_open()) return;
  if (records_end_ == 0) {
    std::ofstream create(path_, std::ios::binary | std::ios::trunc);
    std::vector<std::uint8_t> header;
    detail::ByteWriter w(header);
    w.put_bytes(kFileMagic);
    w.put(kVersion);
    w.put(std::uint16_t{0});
    create.write(reinterpret_cast<const char*>(header.data()),
                 static_cast<std::streamsize>(header.size()));
    if (!create) throw Error(ErrorCode::Io, "cannot create " + path_.string());
    records_end_ = kHeaderSize;
  } else {
    fs::resize_file(path_, records_end_);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::Io, "cannot open " + path_.string() + " for append");
}

void PackedWriter::append(const PackedRecord& record) {
  if (finished_) throw Error(ErrorCode::InvalidInput, "pack already finished");
  if (contains(record.id)) {
    throw Error(ErrorCode::DuplicateEntry, "pack already holds '" + record.id + "'");
  }
  const auto bytes = encode_record(record);
  open_for_append();
  dirty_ = true;
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "write failed on " + path_.string());
  IndexEntry entry{record.id, records_end_, bytes.size(), record.kind};
  records_end_ += bytes.size();
  auto pos = std::lower_bound(index_.begin(), index_.end(), entry.id,
                              [](const IndexEntry& e, const std::string& key) { return e.id < key; });
  index_.insert(pos, std::move(entry));
}

void PackedWriter::finish() {
  if (finished_) return;
  finished_ = true;
  if (!dirty_ && complete_on_open_) return;
  open_for_append();
  std::vector<std::uint8_t> index;
  detail::ByteWriter w(index);
  w.put_bytes(kIndexMagic);
  w.put(checked_u32(index_.size(), "index size"));
  for (const auto& e : index_) {
    w.put(static_cast<std::uint16_t>(e.id.size()));
    w.put_bytes(e.id);
    w.put(e.offset);
    w.put(e.length);
    w.put(static_cast<std::uint8_t>(e.kind));
  }
  std::vector<std::uint8_t> trailer;
  detail::ByteWriter t(trailer);
  t.put(records_end_);
  t.put(static_cast<std::uint64_t>(index.size()));
  t.put(crc_of(index));
  t.put_bytes(kTrailerMagic);
  out_.write(reinterpret_cast<const char*>(index.data()), static_cast<std::streamsize>(index.size()));
  out_.write(reinterpret_cast<const char*>(trailer.data()),
             static_cast<std::streamsize>(trailer.size()));
  out_.close();
  if (!out_) throw Error(ErrorCode::Io, "cannot finish " + path_.string());
}

}  // namespace framesift
