#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "framesift/core.hpp"
#include "framesift/featurize.hpp"
#include "framesift/mif.hpp"

namespace framesift {

enum class SamplerKind { mdf, mif, uniform, random };

std::string_view to_string(SamplerKind kind) noexcept;
SamplerKind parse_sampler(std::string_view text);

/// One manifest line: {"video_id", "source", "frame_count", "questions"?}.
/// `source` is a frame directory or an embedding file.
struct ManifestRecord {
  std::string video_id;
  std::filesystem::path source;
  std::size_t frame_count = 0;
  std::vector<std::string> questions;
};

/// Throws ManifestInvalid on malformed lines, empty ids or sources,
/// frame_count < 1 and duplicate video ids. Relative sources are resolved
/// against `base_dir` when it is non-empty.
std::vector<ManifestRecord> read_manifest(std::istream& in,
                                          const std::filesystem::path& base_dir = {});
/// Relative sources resolve against the manifest's own directory.
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);

struct PipelineOptions {
  SamplerKind sampler = SamplerKind::mdf;
  SamplingConfig config;
  std::uint64_t seed = 0;  // random sampler; mixed with each video id
  unsigned workers = 0;    // 0: one per core
  FeaturizerOptions featurizer;
  const ScoreTable* scores = nullptr;  // required for mif
};

/// Record key in the pack: the video id, or "video_id#question_id" for MIF.
std::string record_key(const std::string& video_id, const std::string& question_id = {});

struct RecordOutcome {
  enum class Status { sampled, skipped, failed };

  std::string key;
  std::string video_id;
  Status status = Status::sampled;
  bool success = false;
  std::vector<std::size_t> indices;  // empty for skipped and failed records
  std::string error;
};

std::string_view to_string(RecordOutcome::Status status) noexcept;

struct RunReport {
  std::string sampler;
  unsigned workers = 0;
  std::vector<RecordOutcome> records;  // manifest order
  std::size_t sampler_invocations = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t errors = 0;
  // Over every record present in the pack after the run, sampled now or
  // earlier; failed records are not counted.
  std::size_t n_success = 0;
  std::size_t n_total = 0;
  double r_success = 0.0;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const RunReport& report);

/// Samples every manifest record into the pack at `out`. Records already in
/// the pack are skipped, so an interrupted run can be resumed and a rerun
/// over a complete pack leaves it byte-identical. Per-record failures are
/// reported, never thrown. Records are written in manifest order whatever
/// the worker count.
RunReport process_manifest(const std::vector<ManifestRecord>& manifest,
                           const std::filesystem::path& out,
                           const PipelineOptions& options);

/// `<out>.report.json`
std::filesystem::path report_path(const std::filesystem::path& out);
void write_report(const std::filesystem::path& path, const RunReport& report);

}  // namespace framesift
