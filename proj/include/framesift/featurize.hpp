#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "framesift/core.hpp"

namespace framesift {

/// Decoded image, row-major, interleaved channels, values in [0, 1].
struct RawFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 or 3
  std::vector<double> pixels;

  double at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

/// Throws InvalidInput unless the frame's shape and value invariants hold.
void validate_frame(const RawFrame& frame);

/// g x g block means per channel, ordered (block row, block column, channel).
/// Remainder pixels fold into the last block row/column.
std::vector<double> blockmean_features(const RawFrame& frame, std::size_t grid);

/// L1-normalized luminance histogram with `bins` equal bins over [0, 1],
/// last bin closed.
std::vector<double> grayscale_histogram(const RawFrame& frame, std::size_t bins);

/// Dense symmetric T x T matrix.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t size, std::vector<double> values);

  std::size_t size() const noexcept { return size_; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return values_[i * size_ + j];
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return std::span<const double>(values_).subspan(i * size_, size_);
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t size_ = 0;
  std::vector<double> values_;
};

inline constexpr double kZeroNormEpsilon = 1e-12;

/// Pairwise cosine similarity of the rows of a rows x cols matrix. Rows with
/// norm below kZeroNormEpsilon are similar to nothing but themselves.
/// Off-diagonal values are rounded to multiples of 2^-40.
SimilarityMatrix cosine_similarity_matrix(std::span<const double> values,
                                          std::size_t rows, std::size_t cols);
SimilarityMatrix cosine_similarity_matrix(const FrameFeatures& features);

// Embedding file ("FSEM1"), little-endian:
//   magic "FSEM1" (5 bytes) | T u32 | d u32 | T*d float32 row-major |
//   id length u32 | id bytes (UTF-8)
std::vector<std::uint8_t> write_embedding_file(const FrameFeatures& features);
FrameFeatures read_embedding_file(std::span<const std::uint8_t> bytes);

FrameFeatures load_embedding_file(const std::filesystem::path& path);
void save_embedding_file(const std::filesystem::path& path,
                         const FrameFeatures& features);

// Image files: PNG (libpng) and binary/ASCII PNM (P2, P3, P5, P6).
RawFrame load_image(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const RawFrame& frame);

/// Image files in `dir` (png/ppm/pgm/pnm), sorted by filename.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

enum class Featurizer { blockmean, histogram };

struct FeaturizerOptions {
  Featurizer kind = Featurizer::blockmean;
  std::size_t grid = 4;
  std::size_t bins = 32;
};

Featurizer parse_featurizer(std::string_view text);

std::vector<double> featurize_frame(const RawFrame& frame,
                                    const FeaturizerOptions& options);

/// Featurizes every frame of a frame directory; the directory name is the
/// video id unless `video_id` is given.
FrameFeatures load_frame_directory(const std::filesystem::path& dir,
                                   const FeaturizerOptions& options,
                                   std::string video_id = {});

}  // namespace framesift
