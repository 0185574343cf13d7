#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "framesift/error.hpp"
#include "json.hpp"

namespace framesift {

// Frame indices are 0-based throughout the library.

enum class DomMode { raw_sum, mean };
enum class TieBreak { lowest_index };

std::string_view to_string(DomMode mode) noexcept;
DomMode parse_dom_mode(std::string_view text);

/// Per-video feature matrix: row t is the embedding of frame t, rows in
/// temporal order. Immutable once built.
class FrameFeatures {
 public:
  FrameFeatures(std::string video_id, std::size_t frames, std::size_t dim,
                std::vector<double> values,
                std::vector<double> timestamps = {});

  const std::string& video_id() const noexcept { return video_id_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * dim_, dim_);
  }
  const std::vector<double>& timestamps() const noexcept { return timestamps_; }

  bool operator==(const FrameFeatures&) const = default;

 private:
  std::string video_id_;
  std::size_t frames_;
  std::size_t dim_;
  std::vector<double> values_;
  std::vector<double> timestamps_;
};

struct SamplingConfig {
  int frames_per_video = 6;
  double lambda = 2.5;
  DomMode dom_mode = DomMode::raw_sum;
  TieBreak tie_break = TieBreak::lowest_index;
  int min_window = 1;

  bool operator==(const SamplingConfig&) const = default;
};

struct SampleSelection {
  std::vector<std::size_t> indices;          // ascending
  std::vector<std::size_t> selection_order;  // pick order
  bool success = true;
  std::vector<double> profile;  // dom (MDF) or score (MIF) per candidate
  int window = 0;               // derived W; 0 when not applicable

  bool operator==(const SampleSelection&) const = default;
};

/// Throws Error(InvalidConfig, field) on the first violated invariant.
void validate_config(const SamplingConfig& config);

/// Adaptive window: max(min_window, floor(L / (lambda * N))).
int derive_window(std::size_t video_length, const SamplingConfig& config);

/// Flat `key = value` text, `#` comments. Keys: frames_per_video, lambda,
/// dom_mode, min_window. Unset keys keep the values already in `base`.
SamplingConfig parse_config_text(std::string_view text,
                                 SamplingConfig base = {});
SamplingConfig load_config_file(const std::string& path,
                                SamplingConfig base = {});

void to_json(nlohmann::json& j, const SamplingConfig& config);
void from_json(const nlohmann::json& j, SamplingConfig& config);
void to_json(nlohmann::json& j, const SampleSelection& selection);
void from_json(const nlohmann::json& j, SampleSelection& selection);

/// SplitMix64 (Steele, Lea, Flood 2014). The exact constants are part of
/// the public contract so seeded fixtures reproduce on every platform:
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, bound) by rejection: draws below (2^64 - bound) % bound
  /// are discarded, then the draw is reduced modulo bound.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

/// Stateless mixing of a seed with a stream index (one SplitMix64 step).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xCBF29CE484222325ULL) noexcept;

}  // namespace framesift
