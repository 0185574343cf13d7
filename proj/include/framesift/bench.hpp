#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "framesift/core.hpp"
#include "framesift/pipeline.hpp"

namespace framesift {

/// Closed integer range; lo == hi is a constant.
struct IntRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  bool operator==(const IntRange&) const = default;
};

/// Synthetic corpus recipe. Each video is a run of K scene segments joined
/// by linear-interpolation transitions. Scene centroids are random
/// orthonormal vectors (per video); frames are centroid + N(0, noise_std^2).
///
/// Scene lengths come from `video_length` when it is set (hi > 0): the
/// video length T is drawn from the range and T - (K-1)*transition_length
/// is split evenly. Otherwise each scene length is drawn from
/// `frames_per_scene`. With dominant_fraction > 0 one randomly placed scene
/// takes that fraction of the scene frames and the rest share the remainder.
struct SyntheticSpec {
  std::size_t scene_count = 6;
  IntRange frames_per_scene{10, 10};
  IntRange video_length{0, 0};
  std::size_t transition_length = 0;
  double noise_std = 0.0;
  std::size_t dim = 16;
  std::size_t corpus_size = 100;
  std::uint64_t seed = 0;
  double dominant_fraction = 0.0;

  bool operator==(const SyntheticSpec&) const = default;
};

/// Throws DimTooSmall when dim < scene_count, InvalidConfig otherwise.
void validate_spec(const SyntheticSpec& spec);
void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);
SyntheticSpec load_spec_file(const std::string& path);

struct LabeledVideo {
  FrameFeatures features;
  std::vector<int> labels;  // scene per frame, -1 for transitions
  std::size_t scene_count = 0;
};

/// Deterministic in (spec, seed); video v uses mix_seed(spec.seed, v).
std::vector<LabeledVideo> gen_corpus(const SyntheticSpec& spec, unsigned workers = 1);

/// Distinct scenes hit (transitions excluded) / min(|indices|, scene_count).
double scene_coverage(std::span<const std::size_t> indices, std::span<const int> labels,
                      std::size_t scene_count);
/// Largest number of picks in one scene / |indices|.
double redundancy(std::span<const std::size_t> indices, std::span<const int> labels);

/// FNV-1a over every feature value and label, as 16 hex digits.
std::string corpus_fingerprint(std::span<const LabeledVideo> corpus);

struct BenchRow {
  std::string sampler;
  double lambda = 0.0;
  int frames_per_video = 0;
  std::size_t videos = 0;
  std::size_t n_success = 0;
  double r_success = 0.0;
  double mean_coverage = 0.0;
  double mean_redundancy = 0.0;
  std::vector<bool> success;       // per video
  std::vector<double> coverage;    // per video
  bool min_full_success = false;   // smallest sweep lambda with r_success = 1
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string corpus_fingerprint;
  std::optional<double> min_full_success_lambda;

  /// Header plus one line per row; reals printed with 6 decimals.
  std::string to_csv() const;
};

/// Columns of BenchReport::to_csv, in order.
inline constexpr const char* kBenchCsvHeader =
    "sampler,lambda,frames_per_video,videos,n_success,r_success,mean_coverage,"
    "mean_redundancy,corpus_fingerprint,min_full_success";

/// Runs one sampler over every video. Random uses mix_seed(seed, v).
BenchRow evaluate_sampler(std::span<const LabeledVideo> corpus, SamplerKind sampler,
                          const SamplingConfig& config, std::uint64_t seed, unsigned workers = 1);

/// MDF at each grid lambda; flags the smallest lambda reaching r_success = 1.
BenchReport sweep_lambda(std::span<const LabeledVideo> corpus, std::span<const double> grid,
                         const SamplingConfig& config, unsigned workers = 1);

/// One row per sampler at config.lambda. mif is not supported here.
BenchReport compare_samplers(std::span<const LabeledVideo> corpus,
                             std::span<const SamplerKind> samplers, const SamplingConfig& config,
                             std::uint64_t seed, unsigned workers = 1);

/// "start:stop:step" (inclusive stop) or a comma list. Values are rounded to
/// 9 decimals so 1.5 + 7*0.1 prints and compares as 2.2.
std::vector<double> parse_lambda_grid(std::string_view text);

}  // namespace framesift
