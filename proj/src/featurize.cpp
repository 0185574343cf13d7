#include "framesift/featurize.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace framesift {

namespace fs = std::filesystem;

void validate_frame(const RawFrame& frame) {
  if (frame.width == 0 || frame.height == 0) {
    throw Error(ErrorCode::InvalidInput, "frame width and height must be positive");
  }
  if (frame.channels != 1 && frame.channels != 3) {
    throw Error(ErrorCode::InvalidInput, "frame must have 1 or 3 channels");
  }
  if (frame.pixels.size() != frame.width * frame.height * frame.channels) {
    throw Error(ErrorCode::InvalidInput, "pixel count does not match frame shape");
  }
  for (double v : frame.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidInput, "pixel values must lie in [0, 1]");
    }
  }
}

std::vector<double> blockmean_features(const RawFrame& frame, std::size_t grid) {
  validate_frame(frame);
  if (grid == 0 || grid > std::min(frame.width, frame.height)) {
    throw Error(ErrorCode::GridTooFine,
                "grid " + std::to_string(grid) + " exceeds frame size " +
                    std::to_string(frame.width) + "x" + std::to_string(frame.height));
  }
  const std::size_t ch = frame.channels;
  const std::size_t block_w = frame.width / grid;
  const std::size_t block_h = frame.height / grid;
  std::vector<double> sums(grid * grid * ch, 0.0);
  std::vector<std::size_t> counts(grid * grid, 0);
  for (std::size_t y = 0; y < frame.height; ++y) {
    const std::size_t by = std::min(y / block_h, grid - 1);
    for (std::size_t x = 0; x < frame.width; ++x) {
      const std::size_t bx = std::min(x / block_w, grid - 1);
      const std::size_t cell = by * grid + bx;
      ++counts[cell];
      for (std::size_t c = 0; c < ch; ++c) sums[cell * ch + c] += frame.at(x, y, c);
    }
  }
  for (std::size_t cell = 0; cell < grid * grid; ++cell) {
    for (std::size_t c = 0; c < ch; ++c) {
      sums[cell * ch + c] /= static_cast<double>(counts[cell]);
    }
  }
  return sums;
}

std::vector<double> grayscale_histogram(const RawFrame& frame, std::size_t bins) {
  validate_frame(frame);
  if (bins < 2) throw Error(ErrorCode::InvalidInput, "histogram needs at least 2 bins");
  std::vector<double> hist(bins, 0.0);
  const std::size_t n = frame.width * frame.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double* px = frame.pixels.data() + i * frame.channels;
    const double lum =
        frame.channels == 3 ? 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2] : px[0];
    auto bin = static_cast<std::size_t>(lum * static_cast<double>(bins));
    hist[std::min(bin, bins - 1)] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(n);
  return hist;
}

SimilarityMatrix::SimilarityMatrix(std::size_t size, std::vector<double> values)
    : size_(size), values_(std::move(values)) {
  if (values_.size() != size_ * size_) {
    throw Error(ErrorCode::InvalidInput, "similarity matrix must be square");
  }
}

namespace {

constexpr double kSimilarityScale = 0x1.0p40;

}  // namespace

SimilarityMatrix cosine_similarity_matrix(std::span<const double> values,
                                          std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::ZeroDimension, "similarity needs at least one row and column");
  }
  if (values.size() != rows * cols) {
    throw Error(ErrorCode::InvalidInput, "value count does not match rows x cols");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteInput, "feature matrix has a non-finite entry");
    }
  }
  std::vector<double> norms(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < cols; ++k) sq += values[i * cols + k] * values[i * cols + k];
    norms[i] = std::sqrt(sq);
  }
  std::vector<double> s(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    s[i * rows + i] = 1.0;
    if (norms[i] < kZeroNormEpsilon) continue;
    const double* a = values.data() + i * cols;
    for (std::size_t j = i + 1; j < rows; ++j) {
      if (norms[j] < kZeroNormEpsilon) continue;
      const double* b = values.data() + j * cols;
      double dot = 0.0;
      for (std::size_t k = 0; k < cols; ++k) dot += a[k] * b[k];
      // Snap to a 2^-40 grid: rescaled copies of a frame then give the same
      // similarities, and dom sums over the grid are exact.
      const double cos = std::round(dot / (norms[i] * norms[j]) * kSimilarityScale) / kSimilarityScale;
      s[i * rows + j] = cos;
      s[j * rows + i] = cos;
    }
  }
  return SimilarityMatrix(rows, std::move(s));
}

SimilarityMatrix cosine_similarity_matrix(const FrameFeatures& features) {
  return cosine_similarity_matrix(features.values(), features.frames(), features.dim());
}

namespace {

constexpr std::string_view kEmbeddingMagic = "FSEM1";

}  // namespace

std::vector<std::uint8_t> write_embedding_file(const FrameFeatures& features) {
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingMagic.size() + 12 + 4 * features.values().size() +
              features.video_id().size());
  detail::ByteWriter w(out);
  w.put_bytes(kEmbeddingMagic);
  w.put(static_cast<std::uint32_t>(features.frames()));
  w.put(static_cast<std::uint32_t>(features.dim()));
  for (double v : features.values()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::NonFiniteInput, "feature value overflows float32");
    }
    w.put(f);
  }
  w.put(static_cast<std::uint32_t>(features.video_id().size()));
  w.put_bytes(features.video_id());
  return out;
}

FrameFeatures read_embedding_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEmbeddingMagic.size() ||
      !std::equal(kEmbeddingMagic.begin(), kEmbeddingMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "not an FSEM1 embedding file");
  }
  detail::ByteReader r(bytes.subspan(kEmbeddingMagic.size()), ErrorCode::TruncatedPayload);
  const auto frames = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (frames == 0 || dim == 0) {
    throw Error(ErrorCode::ZeroDimension, "embedding file declares T or d = 0");
  }
  const std::uint64_t count = std::uint64_t{frames} * dim;
  if (count * 4 > r.remaining()) {
    throw Error(ErrorCode::TruncatedPayload,
                "payload needs " + std::to_string(count * 4) + " bytes, have " +
                    std::to_string(r.remaining()));
  }
  std::vector<double> values(count);
  for (auto& v : values) v = static_cast<double>(r.get<float>());
  const auto id_len = r.get<std::uint32_t>();
  const auto id = r.take(id_len);
  if (r.remaining() != 0) {
    throw Error(ErrorCode::TrailingData, "bytes after the video id");
  }
  return FrameFeatures(std::string(id.begin(), id.end()), frames, dim, std::move(values));
}

namespace {

std::vector<std::uint8_t> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

FrameFeatures load_embedding_file(const fs::path& path) {
  return read_embedding_file(read_all(path));
}

void save_embedding_file(const fs::path& path, const FrameFeatures& features) {
  const auto bytes = write_embedding_file(features);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

RawFrame load_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::InvalidInput, "cannot decode PNG " + path.string() + ": " +
                                             image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::InvalidInput, "cannot decode PNG " + path.string() + ": " + message);
  }
  RawFrame frame;
  frame.width = image.width;
  frame.height = image.height;
  frame.channels = color ? 3 : 1;
  frame.pixels.resize(buffer.size());
  std::transform(buffer.begin(), buffer.end(), frame.pixels.begin(),
                 [](png_byte b) { return b / 255.0; });
  return frame;
}

class PnmParser {
 public:
  explicit PnmParser(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  RawFrame parse(const fs::path& path) {
    if (bytes_.size() < 2 || bytes_[0] != 'P') fail(path, "missing P magic");
    const char kind = static_cast<char>(bytes_[1]);
    pos_ = 2;
    const bool ascii = kind == '2' || kind == '3';
    const bool binary = kind == '5' || kind == '6';
    if (!ascii && !binary) fail(path, "unsupported PNM variant");
    RawFrame frame;
    frame.channels = (kind == '3' || kind == '6') ? 3 : 1;
    frame.width = number(path);
    frame.height = number(path);
    const std::size_t maxval = number(path);
    if (frame.width == 0 || frame.height == 0 || maxval == 0 || maxval > 65535) {
      fail(path, "bad header values");
    }
    const std::size_t count = frame.width * frame.height * frame.channels;
    frame.pixels.resize(count);
    const double scale = 1.0 / static_cast<double>(maxval);
    if (ascii) {
      for (auto& p : frame.pixels) p = std::min<double>(number(path), maxval) * scale;
    } else {
      ++pos_;  // single whitespace after maxval
      const std::size_t width = maxval < 256 ? 1 : 2;
      if (bytes_.size() - std::min(pos_, bytes_.size()) < count * width) {
        fail(path, "truncated pixel data");
      }
      for (auto& p : frame.pixels) {
        std::size_t v = bytes_[pos_++];
        if (width == 2) v = (v << 8) | bytes_[pos_++];
        p = static_cast<double>(std::min(v, maxval)) * scale;
      }
    }
    return frame;
  }

 private:
  [[noreturn]] static void fail(const fs::path& path, const std::string& why) {
    throw Error(ErrorCode::InvalidInput, "cannot decode PNM " + path.string() + ": " + why);
  }

  std::size_t number(const fs::path& path) {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail(path, "expected a number");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000'000) fail(path, "number out of range");
    }
    return v;
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool is_frame_file(const fs::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

}  // namespace

RawFrame load_image(const fs::path& path) {
  RawFrame frame = lower_extension(path) == ".png" ? load_png(path)
                                                    : PnmParser(read_all(path)).parse(path);
  validate_frame(frame);
  return frame;
}

void write_pnm(const fs::path& path, const RawFrame& frame) {
  validate_frame(frame);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << (frame.channels == 3 ? "P6" : "P5") << '\n'
      << frame.width << ' ' << frame.height << "\n255\n";
  for (double v : frame.pixels) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return files;
}

Featurizer parse_featurizer(std::string_view text) {
  if (text == "blockmean") return Featurizer::blockmean;
  if (text == "histogram") return Featurizer::histogram;
  throw Error(ErrorCode::InvalidInput, "unknown featurizer '" + std::string(text) + "'");
}

std::vector<double> featurize_frame(const RawFrame& frame, const FeaturizerOptions& options) {
  return options.kind == Featurizer::blockmean ? blockmean_features(frame, options.grid)
                                               : grayscale_histogram(frame, options.bins);
}

FrameFeatures load_frame_directory(const fs::path& dir, const FeaturizerOptions& options,
                                   std::string video_id) {
  const auto files = list_frame_files(dir);
  if (files.empty()) throw Error(ErrorCode::ZeroDimension, "no frames in " + dir.string());
  std::vector<double> values;
  std::size_t dim = 0;
  for (const auto& file : files) {
    const auto row = featurize_frame(load_image(file), options);
    if (dim == 0) {
      dim = row.size();
    } else if (row.size() != dim) {
      throw Error(ErrorCode::InvalidInput,
                  "frame " + file.filename().string() + " has a different feature size");
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  if (video_id.empty()) {
    const auto name = dir.has_filename() ? dir.filename() : dir.parent_path().filename();
    video_id = name.string();
  }
  return FrameFeatures(std::move(video_id), files.size(), dim, std::move(values));
}

}  // namespace framesift
