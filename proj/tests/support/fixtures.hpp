#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "framesift/core.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("framesift-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

/// T x d matrix of N(0,1) entries.
inline framesift::FrameFeatures random_features(framesift::SplitMix64& rng, std::size_t frames,
                                                std::size_t dim, std::string id = "v") {
  std::vector<double> values(frames * dim);
  for (auto& v : values) v = rng.normal();
  return framesift::FrameFeatures(std::move(id), frames, dim, std::move(values));
}

inline std::vector<std::vector<double>> rows_of(const framesift::FrameFeatures& f) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < f.frames(); ++t) {
    const auto r = f.row(t);
    rows.emplace_back(r.begin(), r.end());
  }
  return rows;
}

}  // namespace fixtures
